#pragma once

#include <Eigen/Dense>

#include <limits>
#include <map>
#include <string>
#include <vector>

namespace cellnav::lp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Bounds at or beyond this magnitude are treated as infinite by the solver.
inline constexpr double kInfSentinel = 1e30;

/// Sparse linear form over LP variables plus a constant term.
class AffineExpr {
 public:
  AffineExpr() = default;
  explicit AffineExpr(double constant) : constant_(constant) {}
  static AffineExpr variable(int index, double coef = 1.0);

  AffineExpr& add_term(int index, double coef);
  AffineExpr& add_constant(double c) {
    constant_ += c;
    return *this;
  }

  const std::map<int, double>& terms() const { return terms_; }
  double constant() const { return constant_; }
  bool is_constant() const { return terms_.empty(); }
  double evaluate(const std::vector<double>& values) const;

  AffineExpr& operator+=(const AffineExpr& o);
  AffineExpr& operator-=(const AffineExpr& o);
  AffineExpr& operator*=(double s);

 private:
  std::map<int, double> terms_;
  double constant_ = 0.0;
};

AffineExpr operator+(AffineExpr a, const AffineExpr& b);
AffineExpr operator-(AffineExpr a, const AffineExpr& b);
AffineExpr operator-(AffineExpr a);
AffineExpr operator*(double s, AffineExpr a);

enum class Sense { LessEqual, Equal };

struct Variable {
  std::string name;
  double lower = 0.0;
  double upper = kInf;
  double cost = 0.0;
};

/// row . v (+ row constant) <sense> rhs. The constant is folded into rhs.
struct Constraint {
  std::map<int, double> row;
  Sense sense = Sense::LessEqual;
  double rhs = 0.0;
  std::string tag;
};

enum class Status { Optimal, Infeasible, Unbounded };
const char* to_string(Status s);

struct Solution {
  Status status = Status::Infeasible;
  std::vector<double> values;
  double objective = 0.0;
  int iterations = 0;
};

/// Minimization LP: min c.v subject to equality and <= rows and bounds.
class LinearProgram {
 public:
  int add_variable(std::string name, double lower = 0.0, double upper = kInf, double cost = 0.0);
  void set_cost(int index, double cost);
  void set_bounds(int index, double lower, double upper);

  /// expr <= 0
  void add_less_equal(const AffineExpr& expr, std::string tag = {});
  /// expr == 0
  void add_equal(const AffineExpr& expr, std::string tag = {});

  int num_variables() const { return static_cast<int>(variables_.size()); }
  int num_constraints() const { return static_cast<int>(constraints_.size()); }
  const std::vector<Variable>& variables() const { return variables_; }
  const Variable& variable(int i) const { return variables_[static_cast<std::size_t>(i)]; }
  const std::vector<Constraint>& constraints() const { return constraints_; }

  double objective_value(const std::vector<double>& values) const;
  /// Largest bound or row violation of `values`.
  double max_violation(const std::vector<double>& values) const;

  /// Plain-text listing (objective, bounds, rows) for debugging.
  std::string dump() const;

 private:
  void check_index(int i) const;
  void add_row(const AffineExpr& expr, Sense sense, std::string tag);

  std::vector<Variable> variables_;
  std::vector<Constraint> constraints_;
};

struct SolverOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  double pivot_tol = 1e-9;
  /// Switch from Dantzig pricing to Bland's rule after this many pivots
  /// without objective progress.
  int stall_limit = 50;
  int refactor_period = 64;
  int max_iterations = 200000;
};

/// Dense two-phase revised simplex. Infeasible and unbounded outcomes are
/// reported through Solution::status; pivot breakdown throws
/// Error{NumericalFailure}.
Solution solve(const LinearProgram& lp, const SolverOptions& options = {});

/// Adds t >= 0 with expr - t <= 0 and -expr - t <= 0; returns t's index.
int add_abs_epigraph(LinearProgram& lp, const AffineExpr& expr, const std::string& name = "abs");

/// Multipliers and rows emitted for one dualized "max over region <= rhs".
struct DualBlock {
  std::vector<int> multipliers;
  std::string tag;
};

/// Encodes max{gamma . x : G x <= g} <= rhs with multipliers lambda >= 0:
/// G^T lambda == gamma and g^T lambda <= rhs. Throws Error{DimensionMismatch}
/// when gamma's length differs from G's column count.
DualBlock dualize_max(LinearProgram& lp, const std::vector<AffineExpr>& gamma, const Eigen::MatrixXd& G,
                      const Eigen::VectorXd& g, const AffineExpr& rhs, const std::string& tag);

}  // namespace cellnav::lp
