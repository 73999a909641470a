#pragma once

#include "cellnav/environment.hpp"
#include "cellnav/planner.hpp"
#include "cellnav/runtime.hpp"
#include "cellnav/synthesis.hpp"

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace cellnav {

enum class Integrator { Rk4, Euler };
enum class MeasurementMode { Displacement, LimitedFov, Bearing };

const char* to_string(MeasurementMode m);
MeasurementMode parse_mode(const std::string& s);

struct SimConfig {
  double dt = 1e-3;
  Integrator integrator = Integrator::Rk4;
  double t_max = 60.0;
  double stop_tol = 1e-2;
  MeasurementMode mode = MeasurementMode::Displacement;
  std::optional<double> normalize;  // constant speed
  double fov_angle = 2.0 * 3.14159265358979323846;
  double fov_range = std::numeric_limits<double>::infinity();
  /// Hold the control over each step. When false, every integrator stage
  /// re-evaluates the controller (the active cell stays fixed in the step).
  bool zero_order_hold = true;

  void validate() const;
};

/// Everything needed to run and check the closed loop.
struct Scenario {
  LinearSystem sys;
  CellDecomposition decomposition;
  ExitPlan plan;
  std::vector<Point> landmarks;
  GainSet gains;
  SynthesisConfig synthesis;
  std::vector<CellSpec> specs;

  static Scenario make(LinearSystem sys, CellDecomposition d, ExitPlan plan, std::vector<Point> landmarks, GainSet gains,
                       SynthesisConfig config);
  /// Goal as a joint state (dynamic part zero); only for stabilization.
  Eigen::VectorXd goal_state() const;
};

struct Sample {
  double t = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd u;
  int cell = -1;
  int visible = 0;
};

struct SwitchEvent {
  double t = 0.0;
  int from = -1;
  int to = -1;
  Eigen::VectorXd x;
};

enum class Termination { ReachedGoal, TimeLimit, OutOfDecomposition, ControllerFailure };
const char* to_string(Termination t);

struct Trajectory {
  std::vector<Sample> samples;
  std::vector<SwitchEvent> switches;
  Termination termination = Termination::TimeLimit;
  std::string message;
  bool chattering = false;
};

/// Throws BadInitialState when x0 is outside every cell, outside the dynamic
/// box, or violates a restricted row of its cell.
void check_initial_state(const Scenario& sc, const Eigen::VectorXd& x0);

/// Control applied at x in `cell` under the configured measurement mode.
/// `heading` orients the camera for the limited field of view.
Eigen::VectorXd evaluate_control(const Scenario& sc, int cell, const Eigen::VectorXd& x, const SimConfig& cfg,
                                 const Point& heading, int* visible = nullptr);

Trajectory integrate(const Scenario& sc, const Eigen::VectorXd& x0, const SimConfig& cfg);

struct CheckResult {
  std::string name;
  bool applicable = true;
  bool pass = true;
  double value = 0.0;
  double bound = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct PropertyReport {
  std::vector<CheckResult> checks;

  void add(CheckResult c) { checks.push_back(std::move(c)); }
  void add(const std::vector<CheckResult>& more) { checks.insert(checks.end(), more.begin(), more.end()); }
  bool all_pass() const;
  int failures() const;
};

/// d_max / -delta_l bound on the dwell of every completed visit of a cell
/// with relative degree one.
std::vector<CheckResult> check_exit_time(const Trajectory& traj, const Scenario& sc, double dt);

/// Barrier distances stay above |delta_b| / c_0 for visits that enter above it.
std::vector<CheckResult> check_margin(const Trajectory& traj, const Scenario& sc, double dt);

/// Residual of x' at the goal, inward rows for interior goals and, when
/// `cfg` is given, convergence from boundary starts of the final cell.
std::vector<CheckResult> check_equilibrium(const Scenario& sc, const std::optional<SimConfig>& cfg, int boundary_starts = 10);

/// Recurrent switching: a later handover within eps of an earlier one after
/// exactly one traversal of the cycle.
CheckResult check_loop(const Trajectory& traj, const Scenario& sc, double eps = 1e-2);

/// Discrete Hausdorff distance of the two arc-length resampled paths against
/// 1e-3 of the path length. Throws PreconditionViolated for systems with drift.
CheckResult check_path_equivalence(const Trajectory& a, const Trajectory& b, const LinearSystem& sys, int samples = 1000);

/// Evenly spaced points (by arc length) along the position path.
std::vector<Point> resample_path(const Trajectory& traj, const LinearSystem& sys, int samples);

}  // namespace cellnav
