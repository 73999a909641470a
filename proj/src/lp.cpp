#include "cellnav/lp.hpp"

#include "cellnav/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace cellnav::lp {

// ---------------------------------------------------------------- AffineExpr

AffineExpr AffineExpr::variable(int index, double coef) {
  AffineExpr e;
  e.add_term(index, coef);
  return e;
}

AffineExpr& AffineExpr::add_term(int index, double coef) {
  if (coef == 0.0) return *this;
  auto [it, inserted] = terms_.emplace(index, coef);
  if (!inserted) {
    it->second += coef;
    if (it->second == 0.0) terms_.erase(it);
  }
  return *this;
}

double AffineExpr::evaluate(const std::vector<double>& values) const {
  double v = constant_;
  for (const auto& [i, c] : terms_) v += c * values.at(static_cast<std::size_t>(i));
  return v;
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& o) {
  for (const auto& [i, c] : o.terms_) add_term(i, c);
  constant_ += o.constant_;
  return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& o) {
  for (const auto& [i, c] : o.terms_) add_term(i, -c);
  constant_ -= o.constant_;
  return *this;
}

AffineExpr& AffineExpr::operator*=(double s) {
  if (s == 0.0) {
    terms_.clear();
    constant_ = 0.0;
    return *this;
  }
  for (auto& [i, c] : terms_) c *= s;
  constant_ *= s;
  return *this;
}

AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
AffineExpr operator-(AffineExpr a) { return a *= -1.0; }
AffineExpr operator*(double s, AffineExpr a) { return a *= s; }

const char* to_string(Status s) {
  switch (s) {
    case Status::Optimal: return "optimal";
    case Status::Infeasible: return "infeasible";
    case Status::Unbounded: return "unbounded";
  }
  return "unknown";
}

// ------------------------------------------------------------ LinearProgram

int LinearProgram::add_variable(std::string name, double lower, double upper, double cost) {
  if (!std::isfinite(cost)) throw Error(ErrorKind::InvalidConfig, "objective coefficient must be finite");
  if (lower > upper) throw Error(ErrorKind::InvalidConfig, "variable " + name + " has lower > upper");
  variables_.push_back({std::move(name), lower, upper, cost});
  return static_cast<int>(variables_.size()) - 1;
}

void LinearProgram::check_index(int i) const {
  if (i < 0 || i >= num_variables()) throw Error(ErrorKind::DimensionMismatch, "variable index out of range");
}

void LinearProgram::set_cost(int index, double cost) {
  check_index(index);
  if (!std::isfinite(cost)) throw Error(ErrorKind::InvalidConfig, "objective coefficient must be finite");
  variables_[static_cast<std::size_t>(index)].cost = cost;
}

void LinearProgram::set_bounds(int index, double lower, double upper) {
  check_index(index);
  if (lower > upper) throw Error(ErrorKind::InvalidConfig, "lower bound exceeds upper bound");
  variables_[static_cast<std::size_t>(index)].lower = lower;
  variables_[static_cast<std::size_t>(index)].upper = upper;
}

void LinearProgram::add_row(const AffineExpr& expr, Sense sense, std::string tag) {
  for (const auto& [i, c] : expr.terms()) {
    check_index(i);
    (void)c;
  }
  constraints_.push_back({expr.terms(), sense, -expr.constant(), std::move(tag)});
}

void LinearProgram::add_less_equal(const AffineExpr& expr, std::string tag) {
  add_row(expr, Sense::LessEqual, std::move(tag));
}

void LinearProgram::add_equal(const AffineExpr& expr, std::string tag) { add_row(expr, Sense::Equal, std::move(tag)); }

double LinearProgram::objective_value(const std::vector<double>& values) const {
  double v = 0.0;
  for (std::size_t j = 0; j < variables_.size(); ++j) v += variables_[j].cost * values.at(j);
  return v;
}

double LinearProgram::max_violation(const std::vector<double>& values) const {
  double worst = 0.0;
  for (std::size_t j = 0; j < variables_.size(); ++j) {
    worst = std::max(worst, variables_[j].lower - values.at(j));
    worst = std::max(worst, values.at(j) - variables_[j].upper);
  }
  for (const auto& c : constraints_) {
    double lhs = 0.0;
    for (const auto& [i, a] : c.row) lhs += a * values.at(static_cast<std::size_t>(i));
    const double r = lhs - c.rhs;
    worst = std::max(worst, c.sense == Sense::Equal ? std::abs(r) : r);
  }
  return worst;
}

std::string LinearProgram::dump() const {
  std::ostringstream os;
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  os << "minimize\n ";
  for (std::size_t j = 0; j < variables_.size(); ++j) {
    if (variables_[j].cost != 0.0) os << ' ' << num(variables_[j].cost) << ' ' << variables_[j].name;
  }
  os << "\nsubject to\n";
  for (std::size_t k = 0; k < constraints_.size(); ++k) {
    const auto& c = constraints_[k];
    os << " r" << k;
    if (!c.tag.empty()) os << '[' << c.tag << ']';
    os << ':';
    for (const auto& [i, a] : c.row) os << ' ' << num(a) << ' ' << variables_[static_cast<std::size_t>(i)].name;
    os << (c.sense == Sense::Equal ? " = " : " <= ") << num(c.rhs) << '\n';
  }
  os << "bounds\n";
  for (const auto& v : variables_) os << ' ' << num(v.lower) << " <= " << v.name << " <= " << num(v.upper) << '\n';
  return os.str();
}

// ------------------------------------------------------------------- solver

namespace {

bool finite_bound(double v) { return std::isfinite(v) && std::abs(v) < kInfSentinel; }

// Standard form  min c.s  s.t.  A s = b, s >= 0, b >= 0.
struct StandardForm {
  Eigen::MatrixXd A;
  Eigen::VectorXd b;
  Eigen::VectorXd c;
  double cost_offset = 0.0;
  std::vector<int> basis;          // initial basis, one column per row
  int num_structural = 0;          // columns before artificials
  std::vector<std::vector<std::pair<int, double>>> var_cols;  // original var -> (col, coef)
  std::vector<double> var_offset;
};

StandardForm to_standard_form(const LinearProgram& lp) {
  StandardForm sf;
  const auto& vars = lp.variables();
  const std::size_t nv = vars.size();
  sf.var_cols.resize(nv);
  sf.var_offset.assign(nv, 0.0);

  int ncols = 0;
  struct BoundRow {
    int col;
    double width;
  };
  std::vector<BoundRow> bound_rows;
  for (std::size_t j = 0; j < nv; ++j) {
    const bool lo = finite_bound(vars[j].lower);
    const bool hi = finite_bound(vars[j].upper);
    if (lo) {
      sf.var_offset[j] = vars[j].lower;
      sf.var_cols[j].push_back({ncols, 1.0});
      if (hi) bound_rows.push_back({ncols, vars[j].upper - vars[j].lower});
      ++ncols;
    } else if (hi) {
      sf.var_offset[j] = vars[j].upper;
      sf.var_cols[j].push_back({ncols++, -1.0});
    } else {
      sf.var_cols[j].push_back({ncols++, 1.0});
      sf.var_cols[j].push_back({ncols++, -1.0});
    }
  }

  const auto& cons = lp.constraints();
  int nslack = 0;
  for (const auto& c : cons) nslack += c.sense == Sense::LessEqual ? 1 : 0;
  nslack += static_cast<int>(bound_rows.size());

  const int m = static_cast<int>(cons.size() + bound_rows.size());
  const int nstruct = ncols + nslack;
  sf.A = Eigen::MatrixXd::Zero(m, nstruct);
  sf.b = Eigen::VectorXd::Zero(m);
  std::vector<int> slack_of_row(static_cast<std::size_t>(m), -1);

  int slack_col = ncols;
  int r = 0;
  for (const auto& c : cons) {
    double rhs = c.rhs;
    for (const auto& [i, a] : c.row) {
      const auto ui = static_cast<std::size_t>(i);
      for (const auto& [col, coef] : sf.var_cols[ui]) sf.A(r, col) += a * coef;
      rhs -= a * sf.var_offset[ui];
    }
    if (c.sense == Sense::LessEqual) {
      sf.A(r, slack_col) = 1.0;
      slack_of_row[static_cast<std::size_t>(r)] = slack_col++;
    }
    sf.b(r) = rhs;
    ++r;
  }
  for (const auto& br : bound_rows) {
    sf.A(r, br.col) = 1.0;
    sf.A(r, slack_col) = 1.0;
    slack_of_row[static_cast<std::size_t>(r)] = slack_col++;
    sf.b(r) = br.width;
    ++r;
  }

  sf.c = Eigen::VectorXd::Zero(nstruct);
  for (std::size_t j = 0; j < nv; ++j) {
    for (const auto& [col, coef] : sf.var_cols[j]) sf.c(col) += vars[j].cost * coef;
    sf.cost_offset += vars[j].cost * sf.var_offset[j];
  }

  // Make b >= 0 and pick slacks as initial basics where possible.
  std::vector<int> needs_artificial;
  sf.basis.assign(static_cast<std::size_t>(m), -1);
  for (int i = 0; i < m; ++i) {
    if (sf.b(i) < 0) {
      sf.A.row(i) *= -1.0;
      sf.b(i) *= -1.0;
    } else if (slack_of_row[static_cast<std::size_t>(i)] >= 0) {
      sf.basis[static_cast<std::size_t>(i)] = slack_of_row[static_cast<std::size_t>(i)];
      continue;
    }
    needs_artificial.push_back(i);
  }
  sf.num_structural = nstruct;
  if (!needs_artificial.empty()) {
    const int na = static_cast<int>(needs_artificial.size());
    sf.A.conservativeResize(Eigen::NoChange, nstruct + na);
    sf.A.rightCols(na).setZero();
    sf.c.conservativeResize(nstruct + na);
    sf.c.tail(na).setZero();
    for (int k = 0; k < na; ++k) {
      const int row = needs_artificial[static_cast<std::size_t>(k)];
      sf.A(row, nstruct + k) = 1.0;
      sf.basis[static_cast<std::size_t>(row)] = nstruct + k;
    }
  }
  return sf;
}

enum class PhaseResult { Optimal, Unbounded };

class Simplex {
 public:
  Simplex(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, std::vector<int> basis, const SolverOptions& opt)
      : A_(A), b_(b), basis_(std::move(basis)), opt_(opt) {
    is_basic_.assign(static_cast<std::size_t>(A_.cols()), -1);
    for (std::size_t i = 0; i < basis_.size(); ++i) is_basic_[static_cast<std::size_t>(basis_[i])] = static_cast<int>(i);
    refactor();
  }

  PhaseResult run(const Eigen::VectorXd& cost, const std::vector<char>& may_enter, int& iterations) {
    int stalled = 0;
    bool bland = false;
    int since_refactor = 0;
    while (true) {
      if (iterations >= opt_.max_iterations) {
        throw Error(ErrorKind::NumericalFailure, "simplex iteration limit reached");
      }
      if (since_refactor >= opt_.refactor_period) {
        refactor();
        since_refactor = 0;
      }
      Eigen::VectorXd cb(static_cast<Eigen::Index>(basis_.size()));
      for (std::size_t i = 0; i < basis_.size(); ++i) cb(static_cast<Eigen::Index>(i)) = cost(basis_[i]);
      const Eigen::VectorXd y = binv_.transpose() * cb;
      const Eigen::VectorXd d = cost - A_.transpose() * y;

      int q = -1;
      double best = -opt_.optimality_tol;
      for (Eigen::Index j = 0; j < A_.cols(); ++j) {
        if (is_basic_[static_cast<std::size_t>(j)] >= 0 || !may_enter[static_cast<std::size_t>(j)]) continue;
        if (bland) {
          if (d(j) < -opt_.optimality_tol) {
            q = static_cast<int>(j);
            break;
          }
        } else if (d(j) < best) {
          best = d(j);
          q = static_cast<int>(j);
        }
      }
      if (q < 0) return PhaseResult::Optimal;

      const Eigen::VectorXd alpha = binv_ * A_.col(q);
      int r = -1;
      double theta = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < alpha.size(); ++i) {
        if (alpha(i) <= opt_.pivot_tol) continue;
        const double ratio = std::max(xb_(i), 0.0) / alpha(i);
        const auto ui = static_cast<std::size_t>(i);
        if (r < 0 || ratio < theta - 1e-12) {
          r = static_cast<int>(i);
          theta = ratio;
        } else if (ratio <= theta + 1e-12) {
          const auto ur = static_cast<std::size_t>(r);
          const bool take = bland ? basis_[ui] < basis_[ur] : alpha(i) > alpha(r);
          if (take) {
            r = static_cast<int>(i);
            theta = std::min(theta, ratio);
          }
        }
      }
      if (r < 0) return PhaseResult::Unbounded;

      pivot(r, q, alpha, theta);
      ++iterations;
      ++since_refactor;
      if (theta * std::abs(d(q)) <= 1e-14) {
        if (++stalled >= opt_.stall_limit) bland = true;
      } else {
        stalled = 0;
        bland = false;
      }
    }
  }

  /// Degenerate pivot of column q into row r (used to evict artificials).
  void force_pivot(int r, int q) {
    const Eigen::VectorXd alpha = binv_ * A_.col(q);
    pivot(r, q, alpha, std::max(xb_(r), 0.0) / alpha(r));
  }

  void refactor() {
    const Eigen::Index m = static_cast<Eigen::Index>(basis_.size());
    if (m == 0) {
      binv_.resize(0, 0);
      xb_.resize(0);
      return;
    }
    Eigen::MatrixXd B(m, m);
    for (Eigen::Index i = 0; i < m; ++i) B.col(i) = A_.col(basis_[static_cast<std::size_t>(i)]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    const double rcond = lu.rcond();
    if (!(rcond > 1e-14)) throw Error(ErrorKind::NumericalFailure, "basis matrix became singular");
    binv_ = lu.inverse();
    xb_ = lu.solve(b_);
    // one step of iterative refinement
    xb_ += lu.solve(b_ - B * xb_);
  }

  const std::vector<int>& basis() const { return basis_; }
  const Eigen::VectorXd& xb() const { return xb_; }
  const Eigen::MatrixXd& binv() const { return binv_; }
  bool is_basic(int j) const { return is_basic_[static_cast<std::size_t>(j)] >= 0; }

 private:
  void pivot(int r, int q, const Eigen::VectorXd& alpha, double theta) {
    const double piv = alpha(r);
    if (std::abs(piv) < 1e-13) throw Error(ErrorKind::NumericalFailure, "pivot element vanished");
    xb_ -= theta * alpha;
    xb_(r) = theta;
    const Eigen::RowVectorXd row_r = binv_.row(r) / piv;
    for (Eigen::Index i = 0; i < binv_.rows(); ++i) {
      if (i == r || alpha(i) == 0.0) continue;
      binv_.row(i) -= alpha(i) * row_r;
    }
    binv_.row(r) = row_r;
    is_basic_[static_cast<std::size_t>(basis_[static_cast<std::size_t>(r)])] = -1;
    basis_[static_cast<std::size_t>(r)] = q;
    is_basic_[static_cast<std::size_t>(q)] = r;
  }

  const Eigen::MatrixXd& A_;
  const Eigen::VectorXd& b_;
  std::vector<int> basis_;
  std::vector<int> is_basic_;
  SolverOptions opt_;
  Eigen::MatrixXd binv_;
  Eigen::VectorXd xb_;
};

}  // namespace

Solution solve(const LinearProgram& lp, const SolverOptions& options) {
  StandardForm sf = to_standard_form(lp);
  const int ncols = static_cast<int>(sf.A.cols());
  const int nstruct = sf.num_structural;
  Solution sol;

  Simplex simplex(sf.A, sf.b, sf.basis, options);
  const double bscale = std::max(1.0, sf.b.size() ? sf.b.lpNorm<Eigen::Infinity>() : 0.0);

  if (ncols > nstruct) {
    Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(ncols);
    phase1.tail(ncols - nstruct).setOnes();
    std::vector<char> may_enter(static_cast<std::size_t>(ncols), 1);
    simplex.run(phase1, may_enter, sol.iterations);
    simplex.refactor();
    double infeas = 0.0;
    for (std::size_t i = 0; i < simplex.basis().size(); ++i) {
      if (simplex.basis()[i] >= nstruct) infeas += std::max(simplex.xb()(static_cast<Eigen::Index>(i)), 0.0);
    }
    if (infeas > options.feasibility_tol * bscale * 10.0) {
      sol.status = Status::Infeasible;
      return sol;
    }
    // Evict artificials still basic at zero; rows with no eligible column are redundant.
    for (std::size_t i = 0; i < simplex.basis().size(); ++i) {
      if (simplex.basis()[i] < nstruct) continue;
      const Eigen::RowVectorXd row = simplex.binv().row(static_cast<Eigen::Index>(i)) * sf.A.leftCols(nstruct);
      int best = -1;
      double best_abs = 1e-7;
      for (int j = 0; j < nstruct; ++j) {
        if (simplex.is_basic(j)) continue;
        if (std::abs(row(j)) > best_abs) {
          best_abs = std::abs(row(j));
          best = j;
        }
      }
      if (best >= 0) simplex.force_pivot(static_cast<int>(i), best);
    }
    simplex.refactor();
  }

  Eigen::VectorXd cost = Eigen::VectorXd::Zero(ncols);
  cost.head(nstruct) = sf.c;
  std::vector<char> may_enter(static_cast<std::size_t>(ncols), 0);
  std::fill(may_enter.begin(), may_enter.begin() + nstruct, 1);
  if (simplex.run(cost, may_enter, sol.iterations) == PhaseResult::Unbounded) {
    sol.status = Status::Unbounded;
    return sol;
  }
  simplex.refactor();

  Eigen::VectorXd s = Eigen::VectorXd::Zero(ncols);
  for (std::size_t i = 0; i < simplex.basis().size(); ++i) {
    s(simplex.basis()[i]) = std::max(simplex.xb()(static_cast<Eigen::Index>(i)), 0.0);
  }
  const double residual = (sf.A * s - sf.b).lpNorm<Eigen::Infinity>();
  if (residual > 1e-7 * bscale) {
    throw Error(ErrorKind::NumericalFailure, "final basic solution violates rows by " + std::to_string(residual));
  }

  const auto& vars = lp.variables();
  sol.values.assign(vars.size(), 0.0);
  for (std::size_t j = 0; j < vars.size(); ++j) {
    double v = sf.var_offset[j];
    for (const auto& [col, coef] : sf.var_cols[j]) v += coef * s(col);
    sol.values[j] = v;
  }
  sol.objective = lp.objective_value(sol.values);
  sol.status = Status::Optimal;
  return sol;
}

int add_abs_epigraph(LinearProgram& lp, const AffineExpr& expr, const std::string& name) {
  const int t = lp.add_variable(name, 0.0, kInf, 0.0);
  lp.add_less_equal(expr - AffineExpr::variable(t), name + "+");
  lp.add_less_equal(-expr - AffineExpr::variable(t), name + "-");
  return t;
}

DualBlock dualize_max(LinearProgram& lp, const std::vector<AffineExpr>& gamma, const Eigen::MatrixXd& G,
                      const Eigen::VectorXd& g, const AffineExpr& rhs, const std::string& tag) {
  if (static_cast<Eigen::Index>(gamma.size()) != G.cols()) {
    throw Error(ErrorKind::DimensionMismatch, tag + ": gamma length differs from region dimension");
  }
  if (G.rows() != g.size()) throw Error(ErrorKind::DimensionMismatch, tag + ": region rows and offsets differ");
  DualBlock block;
  block.tag = tag;
  for (Eigen::Index k = 0; k < G.rows(); ++k) {
    block.multipliers.push_back(lp.add_variable(tag + ".lambda" + std::to_string(k), 0.0, kInf));
  }
  for (Eigen::Index j = 0; j < G.cols(); ++j) {
    AffineExpr stat = -gamma[static_cast<std::size_t>(j)];
    for (Eigen::Index k = 0; k < G.rows(); ++k) {
      if (G(k, j) != 0.0) stat.add_term(block.multipliers[static_cast<std::size_t>(k)], G(k, j));
    }
    lp.add_equal(stat, tag + ".stat" + std::to_string(j));
  }
  AffineExpr value = -rhs;
  for (Eigen::Index k = 0; k < G.rows(); ++k) {
    if (g(k) != 0.0) value.add_term(block.multipliers[static_cast<std::size_t>(k)], g(k));
  }
  lp.add_less_equal(value, tag + ".value");
  return block;
}

}  // namespace cellnav::lp
