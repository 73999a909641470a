#pragma once

#include "cellnav/environment.hpp"
#include "cellnav/geometry.hpp"
#include "cellnav/lp.hpp"
#include "cellnav/planner.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace cellnav {

/// x' = A x + B u with x split into position (P_p x) and dynamic (P_d x)
/// coordinates, inputs in a polytope and dynamic states in a box.
struct LinearSystem {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd Pp;
  Eigen::MatrixXd Pd;
  Polytope control;
  Eigen::VectorXd dyn_lo;
  Eigen::VectorXd dyn_hi;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int np() const { return static_cast<int>(Pp.rows()); }
  int nd() const { return static_cast<int>(Pd.rows()); }
  bool driftless() const { return A.isZero(0.0); }

  /// Joint state from a position and dynamic part.
  Eigen::VectorXd lift(const Eigen::VectorXd& xp, const Eigen::VectorXd& xd) const;
  Eigen::VectorXd lift(const Eigen::VectorXd& xp) const;
  /// Corners of the dynamic box (a single empty vector when n_d = 0).
  std::vector<Eigen::VectorXd> dyn_vertices() const;

  /// Throws InvalidSystem on shape errors, uncontrollable pairs, projections
  /// that do not split the state, 0 outside the input set or an unbounded or
  /// oversized dynamic box.
  void validate() const;

  static LinearSystem single_integrator(double u_max);
  /// State (p, v); velocity box |v_i| <= v_max, input box |u_i| <= u_max.
  static LinearSystem double_integrator(double u_max, double v_max);
  static LinearSystem from_spec(const SystemSpec& spec);
};

/// Derivative rows of h(x) = a x + b up to the first one touching the input.
struct LieRows {
  int r = 0;
  std::vector<Eigen::RowVectorXd> rows;  // a, aA, ..., aA^{r-1}
  Eigen::RowVectorXd input_row;          // aA^{r-1}B
  Eigen::RowVectorXd top_row;            // aA^r
};

/// Throws NoRelativeDegree when aA^{k-1}B vanishes for every k <= n.
LieRows lie_rows(const LinearSystem& sys, const Eigen::RowVectorXd& a);

/// Coefficients c_0..c_{r-1} of h, h', ..., h^{(r-1)} in the expanded
/// recursion psi_k = psi_{k-1}' + alpha_{k-1} psi_{k-1}: c_k is the
/// elementary symmetric polynomial of degree r-k in the alphas.
Eigen::VectorXd ho_coefficients(const std::vector<double>& alphas);

/// Affine barrier h(x) = a x + b >= 0 on the joint state (unit normal).
struct Barrier {
  Eigen::RowVectorXd a;
  double b = 0.0;
  bool dynamic = false;  // from the dynamic box rather than the cell
  int source_row = -1;   // row of the cell or of the dynamic box
};

/// Barriers for every cell row except `exit_row` (pass -1 to keep all), then
/// the dynamic box rows.
std::vector<Barrier> barrier_rows(const LinearSystem& sys, const Polytope& cell, int exit_row);

/// psi_i(x) >= 0 for i = 1..r-1 of each barrier, as rows G x <= g.
Polytope restricted_rows(const LinearSystem& sys, const std::vector<double>& alphas, const std::vector<Barrier>& barriers);

struct SynthesisConfig {
  std::vector<double> alphas{1.0};      // barrier recursion rates; last entry repeats
  std::vector<double> clf_alphas;       // empty: same as alphas
  double eta = 0.5;
  double omega_b = 1.0;
  double omega_l = 10.0;
  std::optional<double> delta_min = -1e3;
  bool regularize = true;
  bool zero_bias = false;  // pin K_b = 0
  /// Let each barrier use its own relative degree instead of rejecting
  /// systems whose barriers differ (e.g. position and velocity limits).
  bool allow_mixed_relative_degree = false;
  lp::SolverOptions solver;

  void validate() const;
  std::vector<double> alphas_for(int r) const;
  std::vector<double> clf_alphas_for(int r) const;
};

/// Everything the LP needs about one cell.
struct CellSpec {
  int index = 0;
  Polytope cell;
  std::vector<Barrier> barriers;
  std::vector<int> barrier_r;  // relative degree per barrier
  int exit_row = -1;
  int next = -1;
  Point z = Point::Zero();
  Point x_e = Point::Zero();
  std::vector<int> landmarks;
  bool is_final = false;
  bool goal_interior = false;
  int clf_r = 0;
  /// Joint region (cell x dynamic box x restricted rows), unit rows.
  Polytope region;
  /// Barriers whose margin is pinned to zero (active at a vertex goal).
  std::vector<int> pinned_barriers;
};

std::vector<CellSpec> build_cell_specs(const LinearSystem& sys, const CellDecomposition& d, const ExitPlan& plan,
                                       const SynthesisConfig& config);

/// Gains and margins of one cell: u = K_p y + K_d x_d + K_b with y the
/// stacked displacements (l_k - x_p) of the cell's landmarks.
struct CellGains {
  std::vector<int> landmarks;
  Eigen::MatrixXd Kp;
  Eigen::MatrixXd Kd;
  Eigen::VectorXd Kb;
  double delta_l = 0.0;
  Eigen::VectorXd delta_b;
};

/// Closed-loop affine map u = Kx x + k0 of a cell.
struct AffineControl {
  Eigen::MatrixXd Kx;
  Eigen::VectorXd k0;

  Eigen::VectorXd operator()(const Eigen::VectorXd& x) const { return Kx * x + k0; }
};

AffineControl closed_loop(const CellGains& g, const LinearSystem& sys, const std::vector<Point>& landmarks);

struct ObjectiveBreakdown {
  double phi_t = 0.0;
  double phi_p = 0.0;
  double margin_b = 0.0;  // omega_b * sum delta_b
  double margin_l = 0.0;  // omega_l * sum delta_l
  double total() const { return phi_t + phi_p + margin_b + margin_l; }
};

struct GainSet {
  std::vector<CellGains> cells;
  ObjectiveBreakdown objective;
  std::vector<std::string> warnings;
};

/// Smoothness terms of the objective evaluated directly from gains, with the
/// per-transition phi^t sums.
struct SmoothnessReport {
  double phi_t = 0.0;
  double phi_p = 0.0;
  std::vector<std::pair<int, int>> transitions;
  std::vector<double> phi_t_per_face;
};

SmoothnessReport evaluate_smoothness(const LinearSystem& sys, const CellDecomposition& d, const ExitPlan& plan,
                                     const std::vector<Point>& landmarks, const GainSet& gains, double eta);

/// Full objective (all phi terms plus margins) of a gain set, regardless of
/// whether it was synthesized with regularization.
ObjectiveBreakdown evaluate_objective(const LinearSystem& sys, const CellDecomposition& d, const ExitPlan& plan,
                                      const std::vector<Point>& landmarks, const GainSet& gains,
                                      const SynthesisConfig& config);

/// Variable layout of one cell inside the joint LP.
struct CellVars {
  std::vector<int> Kp;  // row-major m x (n_p * n_l)
  std::vector<int> Kd;  // row-major m x n_d
  std::vector<int> Kb;
  int delta_l = -1;
  std::vector<int> delta_b;
};

struct AssembledProgram {
  lp::LinearProgram lp;
  std::vector<CellVars> vars;
  std::vector<int> phi_t_slacks;
  std::vector<int> phi_p_slacks;
};

/// The joint LP over every cell (or only `only_cell` when >= 0, without
/// smoothness coupling).
AssembledProgram assemble(const LinearSystem& sys, const std::vector<CellSpec>& specs, const ExitPlan& plan,
                          const CellDecomposition& d, const std::vector<Point>& landmarks,
                          const SynthesisConfig& config, int only_cell = -1);

/// Solves the joint LP. Throws Error{Infeasible} naming the cells whose own
/// constraints cannot be met, or Error{Unbounded}.
GainSet synthesize(const LinearSystem& sys, const CellDecomposition& d, const ExitPlan& plan,
                   const std::vector<Point>& landmarks, const SynthesisConfig& config);

/// Distance bounds from the fixed landmark to a cell (scale range of the
/// bearing rescaling). s_min is 0 when the landmark lies in the cell.
struct ScaleBounds {
  double s_min = 0.0;
  double s_max = 0.0;
};
ScaleBounds bearing_scale_bounds(const Polytope& cell, const Point& fixed_landmark);

// Building blocks exposed for testing.
namespace blocks {

using ExprRow = std::vector<lp::AffineExpr>;

/// u = Kx x + k0 with entries affine in the cell's gain variables.
struct SymbolicControl {
  std::vector<ExprRow> Kx;  // m rows of length n
  ExprRow k0;               // length m
};

SymbolicControl symbolic_control(const LinearSystem& sys, const CellVars& v, const std::vector<Point>& landmarks,
                                 const std::vector<int>& cell_landmarks);

/// Row w . Kx as a length-n expression vector, plus a constant row c.
ExprRow row_times(const Eigen::RowVectorXd& w, const std::vector<ExprRow>& Kx, const Eigen::RowVectorXd& c);

lp::DualBlock cbf_block(lp::LinearProgram& lp, const LinearSystem& sys, const CellSpec& spec, std::size_t q,
                        const SymbolicControl& u, const std::vector<double>& alphas, const lp::AffineExpr& delta_b);
lp::DualBlock clf_block(lp::LinearProgram& lp, const LinearSystem& sys, const CellSpec& spec, const SymbolicControl& u,
                        const std::vector<double>& alphas, const lp::AffineExpr& delta_l);
std::vector<lp::DualBlock> control_bound_block(lp::LinearProgram& lp, const LinearSystem& sys, const CellSpec& spec,
                                               const SymbolicControl& u);
/// K_p (L - x_e 1^T)^vee + K_b = 0 and inward rows at every region vertex.
void middle_stabilization_rows(lp::LinearProgram& lp, const LinearSystem& sys, const CellSpec& spec,
                               const SymbolicControl& u, const lp::AffineExpr& delta_l);
/// Expressions whose absolute values form phi^t (first) and phi^p (second)
/// for the transition cell i -> cell j.
std::pair<std::vector<lp::AffineExpr>, std::vector<lp::AffineExpr>> smoothness_terms(
    const LinearSystem& sys, const CellSpec& spec_i, const SymbolicControl& u_i, const SymbolicControl& u_j,
    const Face& face, double eta);

}  // namespace blocks

}  // namespace cellnav
