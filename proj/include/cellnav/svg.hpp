#pragma once

#include "cellnav/environment.hpp"
#include "cellnav/planner.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cellnav::svg {

struct Polyline {
  std::string label;
  std::vector<Point> points;
};

struct PlotInput {
  const Environment* env = nullptr;
  const CellDecomposition* decomposition = nullptr;
  const ExitPlan* plan = nullptr;  // draws exit arrows when set
  std::vector<Polyline> trajectories;
  int width = 800;
};

/// Cells, obstacles, landmarks, exit arrows and labeled trajectories. Output
/// bytes depend only on the inputs.
std::string render(const PlotInput& in);

}  // namespace cellnav::svg
