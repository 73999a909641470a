#pragma once

#include "cellnav/environment.hpp"
#include "cellnav/planner.hpp"
#include "cellnav/synthesis.hpp"

#include <Eigen/Dense>

#include <vector>

namespace cellnav {

/// What the robot senses at one instant. Displacements and bearings are
/// indexed by global landmark index; hidden landmarks keep zero entries.
struct Measurement {
  std::vector<Point> displacements;  // l_i - x_p
  std::vector<bool> visible;
  std::vector<Point> bearings;  // unit (l_i - x_p), valid where visible

  int visible_count() const;
};

/// Throws CoincidentLandmark when bearings are requested for a visible
/// landmark at the robot position.
Measurement measure(const Point& xp, const std::vector<Point>& landmarks, const std::vector<bool>& mask,
                    bool with_bearings);
Measurement measure(const Point& xp, const std::vector<Point>& landmarks, bool with_bearings = false);

/// u = K_p y + K_d x_d + K_b with every cell landmark visible. Throws
/// MissingLandmark or DimensionMismatch.
Eigen::VectorXd control_full(const CellGains& g, const Measurement& meas, const Eigen::VectorXd& xd);

/// Same control from the visible subset: hidden displacements are replaced
/// by the lowest-index visible one plus the known offset between the two
/// landmarks. Throws NoVisibleLandmark.
Eigen::VectorXd control_limited_fov(const CellGains& g, const Measurement& meas, const std::vector<Point>& landmarks,
                                    const Eigen::VectorXd& xd);

/// Displacement stack (over g.landmarks order) recovered from bearings up to
/// the unknown distance to landmark `fixed`: the fixed landmark is placed at
/// unit distance and every other one at the intersection of its bearing ray
/// with the line through the fixed landmark along the known inter-landmark
/// direction. Throws FixedLandmarkHidden, MissingLandmark or
/// DegenerateGeometry (parallel lines).
std::vector<Point> rescale_bearings(const Measurement& meas, int fixed, const std::vector<Point>& landmarks,
                                    const std::vector<int>& cell_landmarks);

/// u~ = K_p y~ + K_d x_d + K_b for a rescaled stack.
Eigen::VectorXd control_bearing(const CellGains& g, const std::vector<Point>& scaled, const Eigen::VectorXd& xd);

struct ControllerState {
  int active_cell = -1;
  double last_switch_time = 0.0;
};

/// Keeps the active cell while it contains x, otherwise hands over to the
/// planned successor, otherwise to the lowest-index containing cell. Throws
/// OutOfDecomposition.
ControllerState switch_cell(const CellDecomposition& d, const ExitPlan& plan, const Point& x,
                            const ControllerState& state, double t, double tol = kGeomTol);

/// v_des * u / |u|. Throws ZeroControl.
Eigen::VectorXd normalize_velocity(const Eigen::VectorXd& u, double v_des);

/// Circular-sector camera: visible when within `range` and within half of
/// `angle` of `heading`. A zero heading sees everything in range.
std::vector<bool> sector_visibility(const Point& xp, const Point& heading, const std::vector<Point>& landmarks,
                                    double angle, double range);

}  // namespace cellnav
