#include "cellnav/synthesis.hpp"

#include "cellnav/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cellnav {

using lp::AffineExpr;
using blocks::ExprRow;
using blocks::SymbolicControl;

// ------------------------------------------------------------ LinearSystem

Eigen::VectorXd LinearSystem::lift(const Eigen::VectorXd& xp, const Eigen::VectorXd& xd) const {
  Eigen::VectorXd x = Pp.transpose() * xp;
  if (nd() > 0) x += Pd.transpose() * xd;
  return x;
}

Eigen::VectorXd LinearSystem::lift(const Eigen::VectorXd& xp) const { return Pp.transpose() * xp; }

std::vector<Eigen::VectorXd> LinearSystem::dyn_vertices() const {
  const int k = nd();
  std::vector<Eigen::VectorXd> out;
  for (int mask = 0; mask < (1 << k); ++mask) {
    Eigen::VectorXd v(k);
    for (int i = 0; i < k; ++i) v(i) = (mask >> i) & 1 ? dyn_hi(i) : dyn_lo(i);
    out.push_back(v);
  }
  return out;
}

void LinearSystem::validate() const {
  const Eigen::Index nn = A.rows();
  if (A.cols() != nn || B.rows() != nn || B.cols() < 1) throw Error(ErrorKind::InvalidSystem, "A must be n x n and B n x m");
  if (Pp.cols() != nn || (Pd.size() > 0 && Pd.cols() != nn) || Pp.rows() + Pd.rows() != nn) {
    throw Error(ErrorKind::InvalidSystem, "position and dynamic selectors must split the state");
  }
  if (np() != 2) throw Error(ErrorKind::InvalidSystem, "position space must be planar");
  Eigen::MatrixXd S(nn, nn);
  S << Pp, Pd;
  if (!(S * S.transpose()).isIdentity(1e-12)) throw Error(ErrorKind::InvalidSystem, "selectors must be orthonormal");

  Eigen::MatrixXd ctrb(nn, nn * B.cols());
  Eigen::MatrixXd blk = B;
  for (Eigen::Index k = 0; k < nn; ++k) {
    ctrb.middleCols(k * B.cols(), B.cols()) = blk;
    blk = A * blk;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(ctrb);
  lu.setThreshold(1e-10);
  if (lu.rank() != nn) throw Error(ErrorKind::InvalidSystem, "(A, B) is not controllable");

  if (control.dim() != static_cast<std::size_t>(m())) throw Error(ErrorKind::InvalidSystem, "control set dimension differs from m");
  for (const auto& r : control.rows()) {
    if (r.offset < 0) throw Error(ErrorKind::InvalidSystem, "control set must contain u = 0");
  }
  if (dyn_lo.size() != nd() || dyn_hi.size() != nd()) throw Error(ErrorKind::InvalidSystem, "dynamic box size differs from n_d");
  if (nd() > 4) throw Error(ErrorKind::InvalidSystem, "at most 4 dynamic states are supported");
  for (int i = 0; i < nd(); ++i) {
    if (!std::isfinite(dyn_lo(i)) || !std::isfinite(dyn_hi(i)) || !(dyn_lo(i) < dyn_hi(i))) {
      throw Error(ErrorKind::InvalidSystem, "dynamic box must be bounded with lo < hi");
    }
  }
}

LinearSystem LinearSystem::single_integrator(double u_max) {
  LinearSystem s;
  s.A = Eigen::MatrixXd::Zero(2, 2);
  s.B = Eigen::MatrixXd::Identity(2, 2);
  s.Pp = Eigen::MatrixXd::Identity(2, 2);
  s.Pd = Eigen::MatrixXd::Zero(0, 2);
  s.control = Polytope::box(Eigen::Vector2d::Constant(-u_max), Eigen::Vector2d::Constant(u_max));
  s.dyn_lo = Eigen::VectorXd(0);
  s.dyn_hi = Eigen::VectorXd(0);
  return s;
}

LinearSystem LinearSystem::double_integrator(double u_max, double v_max) {
  LinearSystem s;
  s.A = Eigen::MatrixXd::Zero(4, 4);
  s.A.topRightCorner(2, 2).setIdentity();
  s.B = Eigen::MatrixXd::Zero(4, 2);
  s.B.bottomRows(2).setIdentity();
  s.Pp = Eigen::MatrixXd::Zero(2, 4);
  s.Pp.leftCols(2).setIdentity();
  s.Pd = Eigen::MatrixXd::Zero(2, 4);
  s.Pd.rightCols(2).setIdentity();
  s.control = Polytope::box(Eigen::Vector2d::Constant(-u_max), Eigen::Vector2d::Constant(u_max));
  s.dyn_lo = Eigen::Vector2d::Constant(-v_max);
  s.dyn_hi = Eigen::Vector2d::Constant(v_max);
  return s;
}

LinearSystem LinearSystem::from_spec(const SystemSpec& spec) {
  return spec.kind == SystemSpec::Kind::SingleIntegrator ? single_integrator(spec.u_max)
                                                         : double_integrator(spec.u_max, spec.v_max);
}

// ------------------------------------------------------ derivative helpers

LieRows lie_rows(const LinearSystem& sys, const Eigen::RowVectorXd& a) {
  if (a.size() != sys.n()) throw Error(ErrorKind::DimensionMismatch, "row length differs from state dimension");
  if (a.isZero(0.0)) throw Error(ErrorKind::NoRelativeDegree, "zero row has no relative degree");
  LieRows out;
  Eigen::RowVectorXd row = a;
  for (int k = 1; k <= sys.n(); ++k) {
    out.rows.push_back(row);
    const Eigen::RowVectorXd in = row * sys.B;
    if (in.cwiseAbs().maxCoeff() > 1e-12) {
      out.r = k;
      out.input_row = in;
      out.top_row = row * sys.A;
      return out;
    }
    row = row * sys.A;
  }
  throw Error(ErrorKind::NoRelativeDegree, "input never reaches this output");
}

namespace {

// Coefficients of prod_k (s + alpha_k), lowest degree first, leading 1 included.
Eigen::VectorXd char_poly(const std::vector<double>& alphas) {
  Eigen::VectorXd p = Eigen::VectorXd::Ones(1);
  for (double a : alphas) {
    Eigen::VectorXd q = Eigen::VectorXd::Zero(p.size() + 1);
    q.tail(p.size()) += p;
    q.head(p.size()) += a * p;
    p = q;
  }
  return p;
}

}  // namespace

Eigen::VectorXd ho_coefficients(const std::vector<double>& alphas) {
  if (alphas.empty()) throw Error(ErrorKind::InvalidConfig, "need at least one alpha");
  const Eigen::VectorXd p = char_poly(alphas);
  return p.head(static_cast<Eigen::Index>(alphas.size()));
}

std::vector<Barrier> barrier_rows(const LinearSystem& sys, const Polytope& cell, int exit_row) {
  std::vector<Barrier> out;
  for (std::size_t i = 0; i < cell.size(); ++i) {
    if (static_cast<int>(i) == exit_row) continue;
    const Halfspace& h = cell.unit_row(i);
    out.push_back({-(h.normal.transpose() * sys.Pp), h.offset, false, static_cast<int>(i)});
  }
  if (sys.nd() > 0) {
    const Polytope box = Polytope::box(sys.dyn_lo, sys.dyn_hi);
    for (std::size_t i = 0; i < box.size(); ++i) {
      const Halfspace& h = box.unit_row(i);
      out.push_back({-(h.normal.transpose() * sys.Pd), h.offset, true, static_cast<int>(i)});
    }
  }
  return out;
}

Polytope restricted_rows(const LinearSystem& sys, const std::vector<double>& alphas, const std::vector<Barrier>& barriers) {
  std::vector<Halfspace> rows;
  for (const auto& bar : barriers) {
    const LieRows lr = lie_rows(sys, bar.a);
    for (int i = 1; i < lr.r; ++i) {
      const std::vector<double> head(alphas.begin(), alphas.begin() + i);
      const Eigen::VectorXd p = char_poly(head);
      Eigen::RowVectorXd g = Eigen::RowVectorXd::Zero(sys.n());
      for (int k = 0; k <= i; ++k) g += p(k) * lr.rows[static_cast<std::size_t>(k)];
      if (g.isZero(1e-14)) continue;
      rows.emplace_back(-g.transpose(), p(0) * bar.b);
    }
  }
  return Polytope(std::move(rows));
}

void SynthesisConfig::validate() const {
  if (alphas.empty()) throw Error(ErrorKind::InvalidConfig, "alphas must not be empty");
  for (double a : alphas) {
    if (!(a > 0)) throw Error(ErrorKind::InvalidConfig, "alphas must be positive");
  }
  for (double a : clf_alphas) {
    if (!(a > 0)) throw Error(ErrorKind::InvalidConfig, "CLF alphas must be positive");
  }
  if (!(eta >= 0.0 && eta <= 1.0)) throw Error(ErrorKind::InvalidConfig, "eta must lie in [0, 1]");
  if (!(omega_b >= 0) || !(omega_l >= 0)) throw Error(ErrorKind::InvalidConfig, "omega weights must be nonnegative");
  if (delta_min && !(*delta_min < 0)) throw Error(ErrorKind::InvalidConfig, "delta_min must be negative");
}

std::vector<double> SynthesisConfig::alphas_for(int r) const {
  std::vector<double> out(alphas.begin(), alphas.begin() + std::min<std::size_t>(alphas.size(), static_cast<std::size_t>(r)));
  while (static_cast<int>(out.size()) < r) out.push_back(alphas.back());
  return out;
}

std::vector<double> SynthesisConfig::clf_alphas_for(int r) const {
  if (clf_alphas.empty()) return alphas_for(r);
  std::vector<double> out(clf_alphas.begin(),
                          clf_alphas.begin() + std::min<std::size_t>(clf_alphas.size(), static_cast<std::size_t>(r)));
  while (static_cast<int>(out.size()) < r) out.push_back(clf_alphas.back());
  return out;
}

// -------------------------------------------------------------- cell specs

std::vector<CellSpec> build_cell_specs(const LinearSystem& sys, const CellDecomposition& d, const ExitPlan& plan,
                                       const SynthesisConfig& config) {
  if (static_cast<int>(plan.exits.size()) != d.size()) throw Error(ErrorKind::DimensionMismatch, "plan and decomposition differ");
  std::vector<CellSpec> specs;
  for (int i = 0; i < d.size(); ++i) {
    CellSpec s;
    s.index = i;
    s.cell = d.cells[static_cast<std::size_t>(i)];
    s.landmarks = d.landmarks[static_cast<std::size_t>(i)];
    if (s.landmarks.empty()) throw Error(ErrorKind::SchemaError, "cell " + std::to_string(i) + " has no landmark");
    const CellExit& e = plan.exits[static_cast<std::size_t>(i)];
    s.next = e.next;
    s.z = e.z;
    s.x_e = e.x_e;
    s.is_final = plan.is_final(i);
    s.goal_interior = s.is_final && plan.goal_type == GoalType::Interior;
    if (s.next >= 0) {
      s.exit_row = static_cast<int>(e.face->row_index);
    } else if (!s.is_final) {
      throw Error(ErrorKind::InvalidConfig, "cell " + std::to_string(i) + " has neither an exit nor the goal");
    }
    if (s.is_final && !s.cell.contains(s.x_e, 1e-9)) {
      throw Error(ErrorKind::GoalOutsideCell, "goal is outside final cell " + std::to_string(i));
    }
    s.barriers = barrier_rows(sys, s.cell, s.exit_row);

    int reference = 0;
    if (!s.goal_interior) {
      s.clf_r = lie_rows(sys, s.z.transpose() * sys.Pp).r;
      reference = s.clf_r;
    }
    for (const auto& b : s.barriers) {
      const int r = lie_rows(sys, b.a).r;
      s.barrier_r.push_back(r);
      if (reference == 0) reference = r;
      if (r != reference && !config.allow_mixed_relative_degree) {
        throw Error(ErrorKind::HeterogeneousRelativeDegree,
                    "cell " + std::to_string(i) + " mixes relative degrees " + std::to_string(reference) + " and " +
                        std::to_string(r));
      }
    }
    if (s.goal_interior) {
      for (std::size_t k = 0; k < s.cell.size(); ++k) {
        if (lie_rows(sys, s.cell.unit_row(k).normal.transpose() * sys.Pp).r != 1) {
          throw Error(ErrorKind::InvalidConfig, "an interior goal needs relative degree one in position");
        }
      }
    }
    if (s.is_final && plan.goal_type == GoalType::Vertex) {
      const auto active = active_rows(s.cell, s.x_e);
      for (std::size_t q = 0; q < s.barriers.size(); ++q) {
        const auto& b = s.barriers[q];
        if (!b.dynamic && std::find(active.begin(), active.end(), static_cast<std::size_t>(b.source_row)) != active.end()) {
          s.pinned_barriers.push_back(static_cast<int>(q));
        }
      }
    }

    std::vector<Halfspace> rows;
    for (const auto& h : s.cell.unit_rows()) rows.emplace_back(sys.Pp.transpose() * h.normal, h.offset);
    if (sys.nd() > 0) {
      const Polytope box = Polytope::box(sys.dyn_lo, sys.dyn_hi);
      for (const auto& h : box.unit_rows()) {
        rows.emplace_back(sys.Pd.transpose() * h.normal, h.offset);
      }
    }
    // group barriers by relative degree so each uses its own alpha prefix
    for (std::size_t q = 0; q < s.barriers.size(); ++q) {
      const int r = s.barrier_r[q];
      if (r < 2) continue;
      const Polytope extra = restricted_rows(sys, config.alphas_for(r), {s.barriers[q]});
      for (const auto& h : extra.unit_rows()) rows.push_back(h);
    }
    s.region = Polytope(std::move(rows)).normalized();
    specs.push_back(std::move(s));
  }
  return specs;
}

// ------------------------------------------------------------ closed loop

AffineControl closed_loop(const CellGains& g, const LinearSystem& sys, const std::vector<Point>& landmarks) {
  const int np = sys.np();
  const Eigen::Index nl = static_cast<Eigen::Index>(g.landmarks.size());
  if (g.Kp.cols() != np * nl || g.Kp.rows() != sys.m()) throw Error(ErrorKind::DimensionMismatch, "K_p shape mismatch");
  AffineControl c;
  c.Kx = Eigen::MatrixXd::Zero(sys.m(), sys.n());
  c.k0 = g.Kb;
  for (Eigen::Index k = 0; k < nl; ++k) {
    const auto blk = g.Kp.middleCols(k * np, np);
    c.Kx -= blk * sys.Pp;
    c.k0 += blk * landmarks.at(static_cast<std::size_t>(g.landmarks[static_cast<std::size_t>(k)]));
  }
  if (sys.nd() > 0) c.Kx += g.Kd * sys.Pd;
  return c;
}

// ------------------------------------------------------------------ blocks

namespace blocks {

SymbolicControl symbolic_control(const LinearSystem& sys, const CellVars& v, const std::vector<Point>& landmarks,
                                 const std::vector<int>& cell_landmarks) {
  const int m = sys.m();
  const int n = sys.n();
  const int np = sys.np();
  const int nd = sys.nd();
  const int nl = static_cast<int>(cell_landmarks.size());
  SymbolicControl u;
  u.Kx.assign(static_cast<std::size_t>(m), ExprRow(static_cast<std::size_t>(n)));
  u.k0.assign(static_cast<std::size_t>(m), AffineExpr());
  for (int r = 0; r < m; ++r) {
    auto& row = u.Kx[static_cast<std::size_t>(r)];
    for (int k = 0; k < nl; ++k) {
      const Point& l = landmarks.at(static_cast<std::size_t>(cell_landmarks[static_cast<std::size_t>(k)]));
      for (int c = 0; c < np; ++c) {
        const int var = v.Kp[static_cast<std::size_t>(r * np * nl + k * np + c)];
        for (int j = 0; j < n; ++j) {
          if (sys.Pp(c, j) != 0.0) row[static_cast<std::size_t>(j)].add_term(var, -sys.Pp(c, j));
        }
        u.k0[static_cast<std::size_t>(r)].add_term(var, l(c));
      }
    }
    for (int c = 0; c < nd; ++c) {
      const int var = v.Kd[static_cast<std::size_t>(r * nd + c)];
      for (int j = 0; j < n; ++j) {
        if (sys.Pd(c, j) != 0.0) row[static_cast<std::size_t>(j)].add_term(var, sys.Pd(c, j));
      }
    }
    u.k0[static_cast<std::size_t>(r)].add_term(v.Kb[static_cast<std::size_t>(r)], 1.0);
  }
  return u;
}

ExprRow row_times(const Eigen::RowVectorXd& w, const std::vector<ExprRow>& Kx, const Eigen::RowVectorXd& c) {
  ExprRow out(static_cast<std::size_t>(c.size()));
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    AffineExpr e(c(j));
    for (Eigen::Index r = 0; r < w.size(); ++r) {
      if (w(r) != 0.0) e += w(r) * Kx[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)];
    }
    out[static_cast<std::size_t>(j)] = std::move(e);
  }
  return out;
}

namespace {

AffineExpr dot(const Eigen::RowVectorXd& w, const ExprRow& v) {
  AffineExpr e;
  for (Eigen::Index r = 0; r < w.size(); ++r) {
    if (w(r) != 0.0) e += w(r) * v[static_cast<std::size_t>(r)];
  }
  return e;
}

// u(x) for a numeric joint state x.
ExprRow control_at(const SymbolicControl& u, const Eigen::VectorXd& x) {
  ExprRow out = u.k0;
  for (std::size_t r = 0; r < u.Kx.size(); ++r) {
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      if (x(j) != 0.0) out[r] += x(j) * u.Kx[r][static_cast<std::size_t>(j)];
    }
  }
  return out;
}

void check_region(const CellSpec& spec) {
  if (spec.region.empty()) throw Error(ErrorKind::EmptyRegion, "cell " + std::to_string(spec.index) + " has an empty region");
}

std::string tag(const CellSpec& spec, const std::string& what) { return "c" + std::to_string(spec.index) + "." + what; }

}  // namespace

lp::DualBlock cbf_block(lp::LinearProgram& lp, const LinearSystem& sys, const CellSpec& spec, std::size_t q,
                        const SymbolicControl& u, const std::vector<double>& alphas, const AffineExpr& delta_b) {
  check_region(spec);
  const Barrier& bar = spec.barriers.at(q);
  const LieRows lr = lie_rows(sys, bar.a);
  const Eigen::VectorXd c = ho_coefficients(std::vector<double>(alphas.begin(), alphas.begin() + lr.r));
  Eigen::RowVectorXd drift = lr.top_row;
  for (int k = 0; k < lr.r; ++k) drift += c(k) * lr.rows[static_cast<std::size_t>(k)];
  ExprRow gamma = row_times(lr.input_row, u.Kx, drift);
  for (auto& g : gamma) g *= -1.0;
  const AffineExpr rhs = delta_b + AffineExpr(c(0) * bar.b) + dot(lr.input_row, u.k0);
  return lp::dualize_max(lp, gamma, spec.region.A(), spec.region.b(), rhs, tag(spec, "cbf" + std::to_string(q)));
}

lp::DualBlock clf_block(lp::LinearProgram& lp, const LinearSystem& sys, const CellSpec& spec, const SymbolicControl& u,
                        const std::vector<double>& alphas, const AffineExpr& delta_l) {
  check_region(spec);
  const Eigen::RowVectorXd zf = spec.z.transpose() * sys.Pp;
  const LieRows lr = lie_rows(sys, zf);
  const Eigen::VectorXd c = ho_coefficients(std::vector<double>(alphas.begin(), alphas.begin() + lr.r));
  Eigen::RowVectorXd drift = lr.top_row;
  for (int k = 0; k < lr.r; ++k) drift += c(k) * lr.rows[static_cast<std::size_t>(k)];
  const ExprRow gamma = row_times(lr.input_row, u.Kx, drift);
  const double ve = zf.dot(sys.lift(spec.x_e));
  const AffineExpr rhs = delta_l - dot(lr.input_row, u.k0) + AffineExpr(c(0) * ve);
  return lp::dualize_max(lp, gamma, spec.region.A(), spec.region.b(), rhs, tag(spec, "clf"));
}

std::vector<lp::DualBlock> control_bound_block(lp::LinearProgram& lp, const LinearSystem& sys, const CellSpec& spec,
                                               const SymbolicControl& u) {
  check_region(spec);
  std::vector<lp::DualBlock> out;
  for (std::size_t k = 0; k < sys.control.size(); ++k) {
    const Halfspace& h = sys.control.row(k);
    if (h.offset < 0) throw Error(ErrorKind::InvalidSystem, "control set must contain u = 0");
    const Eigen::RowVectorXd w = h.normal.transpose();
    const ExprRow gamma = row_times(w, u.Kx, Eigen::RowVectorXd::Zero(sys.n()));
    const AffineExpr rhs = AffineExpr(h.offset) - dot(w, u.k0);
    out.push_back(lp::dualize_max(lp, gamma, spec.region.A(), spec.region.b(), rhs, tag(spec, "u" + std::to_string(k))));
  }
  return out;
}

void middle_stabilization_rows(lp::LinearProgram& lp, const LinearSystem& sys, const CellSpec& spec,
                               const SymbolicControl& u, const AffineExpr& delta_l) {
  if (!spec.cell.contains(spec.x_e, 1e-9)) throw Error(ErrorKind::GoalOutsideCell, "goal lies outside the final cell");
  const Eigen::VectorXd xe = sys.lift(spec.x_e);
  const ExprRow ue = control_at(u, xe);
  for (std::size_t r = 0; r < ue.size(); ++r) lp.add_equal(ue[r], tag(spec, "mid" + std::to_string(r)));
  const auto verts = vertices_2d(spec.cell);
  for (std::size_t vi = 0; vi < verts.size(); ++vi) {
    const auto active = active_rows(spec.cell, verts[vi]);
    for (const auto& xd : sys.dyn_vertices()) {
      const Eigen::VectorXd x = sys.lift(verts[vi], xd);
      const ExprRow ux = control_at(u, x);
      for (std::size_t row : active) {
        const Eigen::RowVectorXd a = spec.cell.unit_row(row).normal.transpose() * sys.Pp;
        AffineExpr e = AffineExpr((a * sys.A * x).value()) + dot(a * sys.B, ux) - delta_l;
        lp.add_less_equal(e, tag(spec, "inward" + std::to_string(vi) + "." + std::to_string(row)));
      }
    }
  }
}

std::pair<std::vector<AffineExpr>, std::vector<AffineExpr>> smoothness_terms(const LinearSystem& sys,
                                                                             const CellSpec& spec_i,
                                                                             const SymbolicControl& u_i,
                                                                             const SymbolicControl& u_j,
                                                                             const Face& face, double eta) {
  std::vector<AffineExpr> phi_t;
  std::vector<AffineExpr> phi_p;
  const Eigen::Vector2d z = spec_i.z;
  const Eigen::Matrix2d P = Eigen::Matrix2d::Identity() - eta * z * z.transpose();
  const Eigen::MatrixXd PB = P * sys.Pp * sys.B;
  const Point mid = face.midpoint();
  for (const auto& v : face.vertices) {
    for (const auto& xd : sys.dyn_vertices()) {
      const Eigen::VectorXd x = sys.lift(v, xd);
      const ExprRow ui = control_at(u_i, x);
      const ExprRow uj = control_at(u_j, x);
      for (std::size_t r = 0; r < ui.size(); ++r) phi_t.push_back(ui[r] - uj[r]);
      const Eigen::Vector2d pull = mid - v;
      for (Eigen::Index c = 0; c < PB.rows(); ++c) phi_p.push_back(dot(PB.row(c), ui) - AffineExpr(pull(c)));
    }
  }
  return {phi_t, phi_p};
}

}  // namespace blocks

// ---------------------------------------------------------------- assemble

AssembledProgram assemble(const LinearSystem& sys, const std::vector<CellSpec>& specs, const ExitPlan& plan,
                          const CellDecomposition& d, const std::vector<Point>& landmarks,
                          const SynthesisConfig& config, int only_cell) {
  (void)plan;
  config.validate();
  AssembledProgram prog;
  lp::LinearProgram& lp = prog.lp;
  const int m = sys.m();
  const int np = sys.np();
  const int nd = sys.nd();
  const double dlo = config.delta_min ? *config.delta_min : -lp::kInf;
  prog.vars.resize(specs.size());

  std::vector<SymbolicControl> controls(specs.size());
  for (const auto& s : specs) {
    if (only_cell >= 0 && s.index != only_cell) continue;
    CellVars& v = prog.vars[static_cast<std::size_t>(s.index)];
    const std::string c = "c" + std::to_string(s.index);
    const int nl = static_cast<int>(s.landmarks.size());
    for (int r = 0; r < m; ++r) {
      for (int k = 0; k < np * nl; ++k) {
        v.Kp.push_back(lp.add_variable(c + ".Kp" + std::to_string(r) + "_" + std::to_string(k), -lp::kInf, lp::kInf));
      }
    }
    for (int r = 0; r < m; ++r) {
      for (int k = 0; k < nd; ++k) {
        v.Kd.push_back(lp.add_variable(c + ".Kd" + std::to_string(r) + "_" + std::to_string(k), -lp::kInf, lp::kInf));
      }
    }
    for (int r = 0; r < m; ++r) {
      const double lim = config.zero_bias ? 0.0 : lp::kInf;
      v.Kb.push_back(lp.add_variable(c + ".Kb" + std::to_string(r), -lim, lim));
    }
    const bool pin_l = s.is_final && !s.goal_interior;
    v.delta_l = lp.add_variable(c + ".dl", pin_l ? 0.0 : dlo, 0.0, config.omega_l);
    for (std::size_t q = 0; q < s.barriers.size(); ++q) {
      const bool pinned = std::find(s.pinned_barriers.begin(), s.pinned_barriers.end(), static_cast<int>(q)) !=
                          s.pinned_barriers.end();
      v.delta_b.push_back(lp.add_variable(c + ".db" + std::to_string(q), pinned ? 0.0 : dlo, 0.0, config.omega_b));
    }
    controls[static_cast<std::size_t>(s.index)] = blocks::symbolic_control(sys, v, landmarks, s.landmarks);
  }

  for (const auto& s : specs) {
    if (only_cell >= 0 && s.index != only_cell) continue;
    const CellVars& v = prog.vars[static_cast<std::size_t>(s.index)];
    const SymbolicControl& u = controls[static_cast<std::size_t>(s.index)];
    for (std::size_t q = 0; q < s.barriers.size(); ++q) {
      blocks::cbf_block(lp, sys, s, q, u, config.alphas_for(s.barrier_r[q]),
                        AffineExpr::variable(v.delta_b[q]));
    }
    if (s.goal_interior) {
      blocks::middle_stabilization_rows(lp, sys, s, u, AffineExpr::variable(v.delta_l));
    } else {
      blocks::clf_block(lp, sys, s, u, config.clf_alphas_for(s.clf_r), AffineExpr::variable(v.delta_l));
    }
    blocks::control_bound_block(lp, sys, s, u);
  }

  if (only_cell < 0 && config.regularize) {
    for (const auto& s : specs) {
      if (s.next < 0) continue;
      const auto& face = plan.exits[static_cast<std::size_t>(s.index)].face;
      if (!face) throw Error(ErrorKind::MissingFace, "transition without a face");
      const auto [pt, pp] = blocks::smoothness_terms(sys, s, controls[static_cast<std::size_t>(s.index)],
                                                     controls[static_cast<std::size_t>(s.next)], *face, config.eta);
      const std::string c = "c" + std::to_string(s.index);
      for (std::size_t k = 0; k < pt.size(); ++k) {
        const int t = lp::add_abs_epigraph(lp, pt[k], c + ".phit" + std::to_string(k));
        lp.set_cost(t, 1.0);
        prog.phi_t_slacks.push_back(t);
      }
      for (std::size_t k = 0; k < pp.size(); ++k) {
        const int t = lp::add_abs_epigraph(lp, pp[k], c + ".phip" + std::to_string(k));
        lp.set_cost(t, 1.0);
        prog.phi_p_slacks.push_back(t);
      }
    }
  }
  (void)d;
  return prog;
}

// ----------------------------------------------------------- evaluation

SmoothnessReport evaluate_smoothness(const LinearSystem& sys, const CellDecomposition& d, const ExitPlan& plan,
                                     const std::vector<Point>& landmarks, const GainSet& gains, double eta) {
  SmoothnessReport rep;
  const Eigen::MatrixXd PpB = sys.Pp * sys.B;
  for (int i = 0; i < d.size(); ++i) {
    const CellExit& e = plan.exits[static_cast<std::size_t>(i)];
    if (e.next < 0 || !e.face) continue;
    const AffineControl ui = closed_loop(gains.cells[static_cast<std::size_t>(i)], sys, landmarks);
    const AffineControl uj = closed_loop(gains.cells[static_cast<std::size_t>(e.next)], sys, landmarks);
    const Eigen::Vector2d z = e.z;
    const Eigen::Matrix2d P = Eigen::Matrix2d::Identity() - eta * z * z.transpose();
    const Point mid = e.face->midpoint();
    double face_t = 0.0;
    for (const auto& v : e.face->vertices) {
      for (const auto& xd : sys.dyn_vertices()) {
        const Eigen::VectorXd x = sys.lift(v, xd);
        const Eigen::VectorXd a = ui(x);
        face_t += (a - uj(x)).lpNorm<1>();
        rep.phi_p += (P * PpB * a - (mid - v)).lpNorm<1>();
      }
    }
    rep.transitions.emplace_back(i, e.next);
    rep.phi_t_per_face.push_back(face_t);
    rep.phi_t += face_t;
  }
  return rep;
}

ObjectiveBreakdown evaluate_objective(const LinearSystem& sys, const CellDecomposition& d, const ExitPlan& plan,
                                      const std::vector<Point>& landmarks, const GainSet& gains,
                                      const SynthesisConfig& config) {
  const SmoothnessReport s = evaluate_smoothness(sys, d, plan, landmarks, gains, config.eta);
  ObjectiveBreakdown o;
  o.phi_t = s.phi_t;
  o.phi_p = s.phi_p;
  for (const auto& c : gains.cells) {
    o.margin_b += config.omega_b * c.delta_b.sum();
    o.margin_l += config.omega_l * c.delta_l;
  }
  return o;
}

ScaleBounds bearing_scale_bounds(const Polytope& cell, const Point& f) {
  const auto verts = vertices_2d(cell);
  ScaleBounds b;
  for (const auto& v : verts) b.s_max = std::max(b.s_max, (v - f).norm());
  if (cell.contains(f, 1e-12)) return b;
  b.s_min = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < verts.size(); ++k) {
    const Point a = verts[k];
    const Point ab = verts[(k + 1) % verts.size()] - a;
    const double t = std::clamp((f - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    b.s_min = std::min(b.s_min, (a + t * ab - f).norm());
  }
  return b;
}

// -------------------------------------------------------------- synthesize

namespace {

CellGains extract(const LinearSystem& sys, const CellSpec& s, const CellVars& v, const std::vector<double>& x) {
  const int m = sys.m();
  const int nl = static_cast<int>(s.landmarks.size());
  const int cols = sys.np() * nl;
  auto val = [&](int idx) { return x[static_cast<std::size_t>(idx)]; };
  CellGains g;
  g.landmarks = s.landmarks;
  g.Kp = Eigen::MatrixXd(m, cols);
  for (int r = 0; r < m; ++r) {
    for (int k = 0; k < cols; ++k) g.Kp(r, k) = val(v.Kp[static_cast<std::size_t>(r * cols + k)]);
  }
  g.Kd = Eigen::MatrixXd(m, sys.nd());
  for (int r = 0; r < m; ++r) {
    for (int k = 0; k < sys.nd(); ++k) g.Kd(r, k) = val(v.Kd[static_cast<std::size_t>(r * sys.nd() + k)]);
  }
  g.Kb = Eigen::VectorXd(m);
  for (int r = 0; r < m; ++r) g.Kb(r) = val(v.Kb[static_cast<std::size_t>(r)]);
  g.delta_l = val(v.delta_l);
  g.delta_b = Eigen::VectorXd(static_cast<Eigen::Index>(v.delta_b.size()));
  for (std::size_t q = 0; q < v.delta_b.size(); ++q) g.delta_b(static_cast<Eigen::Index>(q)) = val(v.delta_b[q]);
  return g;
}

}  // namespace

GainSet synthesize(const LinearSystem& sys, const CellDecomposition& d, const ExitPlan& plan,
                   const std::vector<Point>& landmarks, const SynthesisConfig& config) {
  sys.validate();
  config.validate();
  const auto specs = build_cell_specs(sys, d, plan, config);
  AssembledProgram prog = assemble(sys, specs, plan, d, landmarks, config);
  const lp::Solution sol = lp::solve(prog.lp, config.solver);
  if (sol.status == lp::Status::Infeasible) {
    std::vector<int> bad;
    for (const auto& s : specs) {
      AssembledProgram one = assemble(sys, specs, plan, d, landmarks, config, s.index);
      if (lp::solve(one.lp, config.solver).status == lp::Status::Infeasible) bad.push_back(s.index);
    }
    std::ostringstream os;
    os << "no controller satisfies the constraints";
    if (!bad.empty()) {
      os << "; infeasible cells:";
      for (int b : bad) os << ' ' << b;
    }
    throw Error(ErrorKind::Infeasible, os.str());
  }
  if (sol.status == lp::Status::Unbounded) {
    throw Error(ErrorKind::Unbounded, "synthesis LP is unbounded; set a delta lower bound or bound the controls");
  }
  GainSet gs;
  for (const auto& s : specs) gs.cells.push_back(extract(sys, s, prog.vars[static_cast<std::size_t>(s.index)], sol.values));
  gs.objective = evaluate_objective(sys, d, plan, landmarks, gs, config);
  for (const auto& s : specs) {
    const int f = *std::min_element(s.landmarks.begin(), s.landmarks.end());
    if (bearing_scale_bounds(s.cell, landmarks[static_cast<std::size_t>(f)]).s_min <= 0.0) {
      gs.warnings.push_back("cell " + std::to_string(s.index) + ": fixed landmark " + std::to_string(f) +
                            " lies in the cell (bearing scale lower bound is 0)");
    }
  }
  return gs;
}

}  // namespace cellnav
