#pragma once

#include "cellnav/environment.hpp"
#include "cellnav/simulator.hpp"
#include "cellnav/synthesis.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cellnav::io {

std::uint64_t fnv1a64(const std::string& bytes);
/// 16 lowercase hex digits.
std::string hex64(std::uint64_t v);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

/// Pretty JSON with sorted keys.
std::string decomposition_to_json(const CellDecomposition& d);
CellDecomposition decomposition_from_json(const std::string& text);
/// Hash of the compact canonical JSON of the decomposition.
std::string decomposition_hash(const CellDecomposition& d);

struct GainsFile {
  GainSet gains;
  SynthesisConfig config;
  std::string decomposition_hash;
};

std::string gains_to_json(const GainsFile& f);
GainsFile gains_from_json(const std::string& text);

struct TrajectoryHeader {
  std::uint64_t seed = 0;
  std::string decomposition_hash;
  double eta = 0.0;
  std::string mode;
};

/// `# key=value ...` comment, then `t,x1..xn,u1..um,cell`, 17 significant
/// digits. Every `stride`-th sample is written, plus the last one.
std::string trajectory_to_csv(const Trajectory& traj, const TrajectoryHeader& header, int stride = 1);

struct TrajectoryTable {
  TrajectoryHeader header;
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> u;
  std::vector<int> cell;
};

TrajectoryTable trajectory_from_csv(const std::string& text);

}  // namespace cellnav::io
