#pragma once

#include "cellnav/environment.hpp"
#include "cellnav/error.hpp"
#include "cellnav/io.hpp"
#include "cellnav/simulator.hpp"
#include "cellnav/synthesis.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace cellnav::cmd {

/// Process exit code for an error: 2 input, 3 synthesis, 4 simulation start,
/// 5 numerical failure.
int exit_code(const Error& e);

LinearSystem system_of(const Environment& env);
/// Objective of the environment; throws SchemaError when absent.
ExitPlan plan_of(const Environment& env, const CellDecomposition& d);

struct DecomposeOptions {
  std::uint64_t seed = 0;
  bool cells_from_file = false;
  RrtParams rrt;
};

std::string decompose(const Environment& env, const DecomposeOptions& opt);

struct SynthesisOutput {
  io::GainsFile file;
  std::string json;
  std::string summary;  // objective breakdown and per-cell margins
};

/// Fills in `allow_mixed_relative_degree` for systems with dynamic states.
SynthesisOutput synthesize(const Environment& env, const CellDecomposition& d, SynthesisConfig config);

struct SimulateOptions {
  SimConfig sim;
  int num_starts = 20;
  std::uint64_t seed = 0;
  std::vector<Eigen::VectorXd> starts;  // used instead of random starts when nonempty
  int stride = 10;
  int boundary_starts = 10;
  int threads = 0;  // 0: hardware concurrency
};

struct SimulationOutput {
  std::vector<Eigen::VectorXd> starts;
  std::vector<Trajectory> trajectories;
  std::vector<std::string> csv;
  PropertyReport report;
  std::string report_json;
};

/// Random positions inside the decomposition that pass the initial-state
/// check, drawn from mt19937_64(seed).
std::vector<Eigen::VectorXd> random_starts(const Scenario& sc, const Environment& env, int count, std::uint64_t seed,
                                           double stop_tol);

/// Throws SchemaError when the gains were synthesized for another
/// decomposition.
Scenario scenario_of(const Environment& env, const CellDecomposition& d, const io::GainsFile& gains);

SimulationOutput simulate(const Environment& env, const CellDecomposition& d, const io::GainsFile& gains,
                          const SimulateOptions& opt);

/// Trajectory tables must reference `d` by hash.
std::string plot(const Environment& env, const CellDecomposition& d, const std::vector<io::TrajectoryTable>& trajectories);

}  // namespace cellnav::cmd
