#include "cellnav/planner.hpp"

#include "cellnav/error.hpp"

#include <algorithm>
#include <limits>
#include <queue>

namespace cellnav {

namespace {

constexpr double kInfDist = std::numeric_limits<double>::infinity();

double edge_weight(const CellDecomposition& d, int i, int j, EdgeWeight w) {
  if (w == EdgeWeight::Unit) return 1.0;
  return (polygon_centroid(vertices_2d(d.cells[static_cast<std::size_t>(i)])) -
          polygon_centroid(vertices_2d(d.cells[static_cast<std::size_t>(j)])))
      .norm();
}

// Multi-source Dijkstra distances to `sources`.
std::vector<double> distances_to(const AbstractGraph& g, const CellDecomposition& d, const std::vector<int>& sources,
                                 EdgeWeight w) {
  std::vector<double> dist(static_cast<std::size_t>(g.num_nodes), kInfDist);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  for (int s : sources) {
    dist[static_cast<std::size_t>(s)] = 0.0;
    pq.emplace(0.0, s);
  }
  while (!pq.empty()) {
    const auto [du, u] = pq.top();
    pq.pop();
    if (du > dist[static_cast<std::size_t>(u)]) continue;
    for (int v : g.neighbors[static_cast<std::size_t>(u)]) {
      const double alt = du + edge_weight(d, u, v, w);
      if (alt < dist[static_cast<std::size_t>(v)]) {
        dist[static_cast<std::size_t>(v)] = alt;
        pq.emplace(alt, v);
      }
    }
  }
  return dist;
}

// First hop toward the sources: neighbor minimizing w + dist, ties to the
// smaller index.
int first_hop(const AbstractGraph& g, const CellDecomposition& d, const std::vector<double>& dist, int i, EdgeWeight w) {
  int best = -1;
  double best_val = kInfDist;
  for (int j : g.neighbors[static_cast<std::size_t>(i)]) {
    const double val = edge_weight(d, i, j, w) + dist[static_cast<std::size_t>(j)];
    if (val < best_val - 1e-12) {
      best_val = val;
      best = j;
    }
  }
  return best;
}

void check_graph(const AbstractGraph& g, const CellDecomposition& d) {
  if (g.num_nodes != d.size()) throw Error(ErrorKind::DimensionMismatch, "graph and decomposition differ in size");
}

}  // namespace

std::vector<std::size_t> active_rows(const Polytope& cell, const Point& x, double tol) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < cell.size(); ++i) {
    if (std::abs(cell.unit_row(i).slack(x)) <= tol) rows.push_back(i);
  }
  return rows;
}

ExitPlan plan_stabilization(const AbstractGraph& g, const CellDecomposition& d, const Point& goal, EdgeWeight weight) {
  check_graph(g, d);
  const int final_cell = d.locate(goal);
  if (final_cell < 0) throw Error(ErrorKind::InvalidGoal, "goal lies outside every cell");
  const Polytope& cell = d.cells[static_cast<std::size_t>(final_cell)];

  ExitPlan plan;
  plan.kind = Objective::Kind::Stabilize;
  plan.goal = goal;
  plan.final_cell = final_cell;
  if (cell.depth(goal) > kGeomTol) {
    plan.goal_type = GoalType::Interior;
  } else {
    const auto verts = vertices_2d(cell);
    const bool is_vertex =
        std::any_of(verts.begin(), verts.end(), [&](const Point& v) { return (v - goal).norm() <= kGeomTol; });
    if (!is_vertex) throw Error(ErrorKind::InvalidGoal, "goal on a face must be a cell vertex or strictly interior");
    plan.goal_type = GoalType::Vertex;
  }

  const auto dist = distances_to(g, d, {final_cell}, weight);
  plan.exits.assign(static_cast<std::size_t>(g.num_nodes), {});
  for (int i = 0; i < g.num_nodes; ++i) {
    if (i == final_cell) continue;
    if (dist[static_cast<std::size_t>(i)] == kInfDist) {
      throw Error(ErrorKind::Unreachable, "cell " + std::to_string(i) + " cannot reach the goal cell");
    }
    plan.exits[static_cast<std::size_t>(i)].next = first_hop(g, d, dist, i, weight);
  }
  exit_geometry(d, plan);
  return plan;
}

ExitPlan plan_patrol(const AbstractGraph& g, const CellDecomposition& d, const std::vector<int>& cycle_in,
                     EdgeWeight weight) {
  check_graph(g, d);
  std::vector<int> cycle = cycle_in;
  if (cycle.size() > 1 && cycle.front() == cycle.back()) cycle.pop_back();
  if (cycle.size() < 2) throw Error(ErrorKind::InvalidCycle, "patrol cycle needs at least two cells");
  for (std::size_t k = 0; k < cycle.size(); ++k) {
    const int a = cycle[k];
    const int b = cycle[(k + 1) % cycle.size()];
    if (a < 0 || a >= g.num_nodes) throw Error(ErrorKind::InvalidCycle, "cycle cell index out of range");
    if (std::count(cycle.begin(), cycle.end(), a) != 1) {
      throw Error(ErrorKind::InvalidCycle, "cycle visits cell " + std::to_string(a) + " twice");
    }
    if (!g.has_edge(a, b)) {
      throw Error(ErrorKind::InvalidCycle, "cells " + std::to_string(a) + " and " + std::to_string(b) + " are not adjacent");
    }
  }
  ExitPlan plan;
  plan.kind = Objective::Kind::Patrol;
  plan.cycle = cycle;
  plan.exits.assign(static_cast<std::size_t>(g.num_nodes), {});
  for (std::size_t k = 0; k < cycle.size(); ++k) {
    plan.exits[static_cast<std::size_t>(cycle[k])].next = cycle[(k + 1) % cycle.size()];
  }
  const auto dist = distances_to(g, d, cycle, weight);
  for (int i = 0; i < g.num_nodes; ++i) {
    if (std::find(cycle.begin(), cycle.end(), i) != cycle.end()) continue;
    if (dist[static_cast<std::size_t>(i)] == kInfDist) {
      throw Error(ErrorKind::Unreachable, "cell " + std::to_string(i) + " cannot reach the patrol cycle");
    }
    plan.exits[static_cast<std::size_t>(i)].next = first_hop(g, d, dist, i, weight);
  }
  exit_geometry(d, plan);
  return plan;
}

void exit_geometry(const CellDecomposition& d, ExitPlan& plan) {
  for (int i = 0; i < d.size(); ++i) {
    CellExit& e = plan.exits[static_cast<std::size_t>(i)];
    const Polytope& cell = d.cells[static_cast<std::size_t>(i)];
    if (e.next < 0) {
      e.face.reset();
      if (plan.is_final(i)) {
        e.x_e = plan.goal;
        if (plan.goal_type == GoalType::Vertex) {
          Point z = Point::Zero();
          for (std::size_t r : active_rows(cell, plan.goal)) {
            const Eigen::VectorXd n = cell.unit_row(r).normal;
            z -= Point(n(0), n(1));
          }
          e.z = z.normalized();
        }
      }
      continue;
    }
    const auto face = common_face(cell, d.cells[static_cast<std::size_t>(e.next)]);
    if (!face) {
      throw Error(ErrorKind::MissingFace,
                  "cells " + std::to_string(i) + " and " + std::to_string(e.next) + " share no face");
    }
    e.face = face;
    e.z = inward_normal(*face, cell);
    e.x_e = face->midpoint();
  }
}

ExitPlan make_plan(const AbstractGraph& g, const CellDecomposition& d, const Objective& objective, EdgeWeight weight) {
  if (objective.kind == Objective::Kind::Stabilize) return plan_stabilization(g, d, objective.goal, weight);
  return plan_patrol(g, d, objective.cycle, weight);
}

}  // namespace cellnav
