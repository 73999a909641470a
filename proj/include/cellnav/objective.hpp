#pragma once

#include "cellnav/geometry.hpp"

#include <vector>

namespace cellnav {

/// High-level task: converge to a point, or circulate along a cell cycle.
struct Objective {
  enum class Kind { Stabilize, Patrol };

  Kind kind = Kind::Stabilize;
  Point goal = Point::Zero();
  std::vector<int> cycle;

  static Objective stabilize(const Point& goal) { return {Kind::Stabilize, goal, {}}; }
  static Objective patrol(std::vector<int> cycle) { return {Kind::Patrol, Point::Zero(), std::move(cycle)}; }
};

}  // namespace cellnav
