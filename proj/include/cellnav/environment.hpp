#pragma once

#include "cellnav/geometry.hpp"
#include "cellnav/objective.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cellnav {

/// Optional dynamics block of an environment file.
struct SystemSpec {
  enum class Kind { SingleIntegrator, DoubleIntegrator };
  Kind kind = Kind::SingleIntegrator;
  double u_max = 1.0;
  double v_max = 1.0;
};

struct Environment {
  std::vector<Point> boundary;  // counterclockwise
  std::vector<std::vector<Point>> obstacles;
  std::vector<Point> landmarks;
  std::optional<std::vector<std::vector<Point>>> cells;
  std::optional<std::vector<std::vector<int>>> cell_landmarks;
  std::optional<Objective> objective;
  std::optional<SystemSpec> system;

  bool in_free_space(const Point& x) const;
  /// Segment stays inside the boundary and never touches an obstacle interior.
  bool segment_free(const Point& a, const Point& b) const;
};

/// Parses the environment JSON document. Throws ParseError, SchemaError or
/// InvalidGeometry.
Environment parse_environment(const std::string& text);
Environment load_environment(const std::string& path);

struct CellDecomposition {
  std::vector<Polytope> cells;
  /// Unordered adjacent pairs stored as (i, j) with i < j, sorted.
  std::vector<std::pair<int, int>> adjacency;
  /// Per cell, the global landmark indices its controller uses.
  std::vector<std::vector<int>> landmarks;
  /// Generating tree node per cell (centroid for user-supplied cells).
  std::vector<Point> generators;
  /// Tree parent cell per cell, -1 for the root or user-supplied cells.
  std::vector<int> parents;
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(cells.size()); }
  /// Lowest-index cell containing x, or -1.
  int locate(const Point& x, double tol = kGeomTol) const;
};

/// Uses the environment's `cells` as given (validated convex, nonempty).
CellDecomposition decomposition_from_cells(const Environment& env);

struct RrtParams {
  int n_samples = 200;  // total node budget including the root
  double step = 0.5;
  double radius = 1.0;
  std::optional<Point> root;  // defaults to the boundary centroid
  /// Skip the bisector against the parent node so each cell also covers the
  /// region toward its parent. Cells then overlap.
  bool overlap_parent = false;
  /// Samples that land inside obstacles still cut neighboring cells.
  bool colliding_generators = true;
  int max_attempts_factor = 50;
};

/// Space-filling RRT*, simplified, then one bisector cell per remaining node,
/// clipped against obstacles. Bitwise deterministic for a seed.
CellDecomposition decompose_rrt(const Environment& env, std::uint64_t seed, const RrtParams& params = {});

/// Recomputes the adjacency list from common faces.
void compute_adjacency(CellDecomposition& d);

struct AbstractGraph {
  int num_nodes = 0;
  std::vector<std::pair<int, int>> edges;
  std::vector<std::vector<int>> neighbors;  // ascending

  bool has_edge(int i, int j) const;
};

AbstractGraph build_graph(const CellDecomposition& d);

}  // namespace cellnav
