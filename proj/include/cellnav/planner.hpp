#pragma once

#include "cellnav/environment.hpp"
#include "cellnav/geometry.hpp"
#include "cellnav/objective.hpp"

#include <optional>
#include <vector>

namespace cellnav {

enum class GoalType { Vertex, Interior };

/// Exit of one cell: the neighbor it hands over to, the shared face, the
/// inward normal z of that face (pointing back into the cell) and the exit
/// point x_e on it. For a vertex-goal final cell `next` is -1, x_e is the goal
/// and z bisects the inward normals of the rows meeting there.
struct CellExit {
  int next = -1;
  std::optional<Face> face;
  Point z = Point::Zero();
  Point x_e = Point::Zero();
};

struct ExitPlan {
  Objective::Kind kind = Objective::Kind::Stabilize;
  std::vector<CellExit> exits;
  std::optional<int> final_cell;
  Point goal = Point::Zero();
  GoalType goal_type = GoalType::Interior;
  std::vector<int> cycle;

  int successor(int cell) const { return exits[static_cast<std::size_t>(cell)].next; }
  bool is_final(int cell) const { return final_cell && *final_cell == cell; }
};

enum class EdgeWeight { Unit, CentroidDistance };

/// Shortest-path exits toward the cell holding `goal`. Throws Unreachable or
/// InvalidGoal (goal outside every cell, or on a face but not a vertex).
ExitPlan plan_stabilization(const AbstractGraph& g, const CellDecomposition& d, const Point& goal,
                            EdgeWeight weight = EdgeWeight::Unit);

/// Cycle cells exit to their successor, others along shortest paths to the
/// cycle. The cycle may repeat its first cell at the end. Throws InvalidCycle.
ExitPlan plan_patrol(const AbstractGraph& g, const CellDecomposition& d, const std::vector<int>& cycle,
                     EdgeWeight weight = EdgeWeight::Unit);

/// Fills face, z and x_e (face midpoint) for every planned edge. Throws
/// MissingFace.
void exit_geometry(const CellDecomposition& d, ExitPlan& plan);

ExitPlan make_plan(const AbstractGraph& g, const CellDecomposition& d, const Objective& objective,
                   EdgeWeight weight = EdgeWeight::Unit);

/// Row indices of `cell` active at x (unit-row slack within tol).
std::vector<std::size_t> active_rows(const Polytope& cell, const Point& x, double tol = 1e-9);

}  // namespace cellnav
