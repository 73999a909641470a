#include "cellnav/simulator.hpp"

#include "cellnav/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace cellnav {

const char* to_string(MeasurementMode m) {
  switch (m) {
    case MeasurementMode::Displacement: return "displacement";
    case MeasurementMode::LimitedFov: return "fov";
    case MeasurementMode::Bearing: return "bearing";
  }
  return "unknown";
}

MeasurementMode parse_mode(const std::string& s) {
  if (s == "displacement") return MeasurementMode::Displacement;
  if (s == "fov") return MeasurementMode::LimitedFov;
  if (s == "bearing") return MeasurementMode::Bearing;
  throw Error(ErrorKind::InvalidConfig, "unknown measurement mode '" + s + "'");
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::ReachedGoal: return "reached_goal";
    case Termination::TimeLimit: return "time_limit";
    case Termination::OutOfDecomposition: return "out_of_decomposition";
    case Termination::ControllerFailure: return "controller_failure";
  }
  return "unknown";
}

void SimConfig::validate() const {
  if (!(dt > 0)) throw Error(ErrorKind::InvalidConfig, "dt must be positive");
  if (!(t_max > dt)) throw Error(ErrorKind::InvalidConfig, "t_max must exceed dt");
  if (!(stop_tol >= 0)) throw Error(ErrorKind::InvalidConfig, "stop_tol must be nonnegative");
  if (normalize && !(*normalize > 0)) throw Error(ErrorKind::InvalidConfig, "normalized speed must be positive");
  if (!(fov_angle > 0) || !(fov_range > 0)) throw Error(ErrorKind::InvalidConfig, "field of view must be positive");
}

Scenario Scenario::make(LinearSystem sys, CellDecomposition d, ExitPlan plan, std::vector<Point> landmarks,
                        GainSet gains, SynthesisConfig config) {
  Scenario sc{std::move(sys), std::move(d), std::move(plan), std::move(landmarks), std::move(gains), std::move(config), {}};
  sc.specs = build_cell_specs(sc.sys, sc.decomposition, sc.plan, sc.synthesis);
  if (sc.gains.cells.size() != sc.specs.size()) throw Error(ErrorKind::DimensionMismatch, "gain set and decomposition differ");
  return sc;
}

Eigen::VectorXd Scenario::goal_state() const { return sys.lift(plan.goal); }

void check_initial_state(const Scenario& sc, const Eigen::VectorXd& x0) {
  if (x0.size() != sc.sys.n()) throw Error(ErrorKind::BadInitialState, "initial state has the wrong dimension");
  const Point xp = sc.sys.Pp * x0;
  const int cell = sc.decomposition.locate(xp);
  if (cell < 0) throw Error(ErrorKind::BadInitialState, "initial position is outside every cell");
  if (sc.sys.nd() > 0) {
    const Eigen::VectorXd xd = sc.sys.Pd * x0;
    for (int i = 0; i < sc.sys.nd(); ++i) {
      if (xd(i) < sc.sys.dyn_lo(i) - 1e-9 || xd(i) > sc.sys.dyn_hi(i) + 1e-9) {
        throw Error(ErrorKind::BadInitialState, "initial dynamic state is outside its box");
      }
    }
  }
  const Polytope& region = sc.specs[static_cast<std::size_t>(cell)].region;
  for (std::size_t k = 0; k < region.size(); ++k) {
    if (!region.row(k).contains(x0, 1e-9)) {
      throw Error(ErrorKind::BadInitialState,
                  "initial state violates row " + std::to_string(k) + " of the restricted region of cell " +
                      std::to_string(cell));
    }
  }
}

Eigen::VectorXd evaluate_control(const Scenario& sc, int cell, const Eigen::VectorXd& x, const SimConfig& cfg,
                                 const Point& heading, int* visible) {
  const CellGains& g = sc.gains.cells.at(static_cast<std::size_t>(cell));
  const Point xp = sc.sys.Pp * x;
  const Eigen::VectorXd xd = sc.sys.Pd * x;
  Eigen::VectorXd u;
  int seen = static_cast<int>(sc.landmarks.size());
  switch (cfg.mode) {
    case MeasurementMode::Displacement:
      u = control_full(g, measure(xp, sc.landmarks), xd);
      break;
    case MeasurementMode::LimitedFov: {
      const auto mask = sector_visibility(xp, heading, sc.landmarks, cfg.fov_angle, cfg.fov_range);
      const Measurement m = measure(xp, sc.landmarks, mask, false);
      seen = m.visible_count();
      u = control_limited_fov(g, m, sc.landmarks, xd);
      break;
    }
    case MeasurementMode::Bearing: {
      const Measurement m = measure(xp, sc.landmarks, true);
      std::vector<int> order = g.landmarks;
      std::sort(order.begin(), order.end());
      bool done = false;
      for (std::size_t k = 0; k < order.size() && !done; ++k) {
        try {
          u = control_bearing(g, rescale_bearings(m, order[k], sc.landmarks, g.landmarks), xd);
          done = true;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::DegenerateGeometry || k + 1 == order.size()) throw;
        }
      }
      break;
    }
  }
  if (visible) *visible = seen;
  if (cfg.normalize) {
    if (u.norm() > 1e-12) u = normalize_velocity(u, *cfg.normalize);
  }
  return u;
}

namespace {

struct Stepper {
  const Scenario& sc;
  const SimConfig& cfg;
  int cell;
  Point heading;

  Eigen::VectorXd field(const Eigen::VectorXd& x, const Eigen::VectorXd& held) const {
    const Eigen::VectorXd u = cfg.zero_order_hold ? held : evaluate_control(sc, cell, x, cfg, heading);
    return sc.sys.A * x + sc.sys.B * u;
  }

  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
    const double h = cfg.dt;
    if (cfg.integrator == Integrator::Euler) return x + h * field(x, u);
    const Eigen::VectorXd k1 = field(x, u);
    const Eigen::VectorXd k2 = field(x + 0.5 * h * k1, u);
    const Eigen::VectorXd k3 = field(x + 0.5 * h * k2, u);
    const Eigen::VectorXd k4 = field(x + h * k3, u);
    return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
};

}  // namespace

Trajectory integrate(const Scenario& sc, const Eigen::VectorXd& x0, const SimConfig& cfg) {
  cfg.validate();
  check_initial_state(sc, x0);
  Trajectory traj;
  ControllerState state;
  state.active_cell = sc.decomposition.locate(sc.sys.Pp * x0);
  const bool stabilize = sc.plan.kind == Objective::Kind::Stabilize;
  const Eigen::VectorXd goal = stabilize ? sc.goal_state() : Eigen::VectorXd();
  const long steps = static_cast<long>(std::ceil(cfg.t_max / cfg.dt - 1e-9));
  std::vector<long> switch_steps;
  Point heading = Point::Zero();
  Eigen::VectorXd x = x0;

  auto final_sample = [&](double t) {
    Sample s{t, x, Eigen::VectorXd::Zero(sc.sys.m()), state.active_cell, 0};
    try {
      s.u = evaluate_control(sc, state.active_cell, x, cfg, heading, &s.visible);
    } catch (const Error&) {
    }
    traj.samples.push_back(std::move(s));
  };

  for (long step = 0;; ++step) {
    const double t = static_cast<double>(step) * cfg.dt;
    if (stabilize && (x - goal).norm() <= cfg.stop_tol) {
      traj.termination = Termination::ReachedGoal;
      final_sample(t);
      break;
    }
    if (step >= steps) {
      traj.termination = Termination::TimeLimit;
      final_sample(t);
      break;
    }
    Sample s{t, x, Eigen::VectorXd(), state.active_cell, 0};
    Eigen::VectorXd x_next;
    try {
      s.u = evaluate_control(sc, state.active_cell, x, cfg, heading, &s.visible);
      const Stepper stepper{sc, cfg, state.active_cell, heading};
      x_next = stepper.step(x, s.u);
    } catch (const Error& e) {
      traj.termination = Termination::ControllerFailure;
      traj.message = e.what();
      final_sample(t);
      break;
    }
    heading = sc.sys.Pp * (sc.sys.A * x + sc.sys.B * s.u);
    traj.samples.push_back(std::move(s));
    x = std::move(x_next);
    const double t_next = static_cast<double>(step + 1) * cfg.dt;
    const int before = state.active_cell;
    try {
      state = switch_cell(sc.decomposition, sc.plan, sc.sys.Pp * x, state, t_next);
    } catch (const Error& e) {
      traj.termination = Termination::OutOfDecomposition;
      traj.message = e.what();
      traj.samples.push_back({t_next, x, Eigen::VectorXd::Zero(sc.sys.m()), before, 0});
      break;
    }
    if (state.active_cell != before) {
      traj.switches.push_back({t_next, before, state.active_cell, x});
      switch_steps.push_back(step + 1);
      const long recent = std::count_if(switch_steps.begin(), switch_steps.end(), [&](long k) { return k > step + 1 - 100; });
      if (recent > 10) traj.chattering = true;
    }
  }
  return traj;
}

bool PropertyReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return !c.applicable || c.pass; });
}

int PropertyReport::failures() const {
  return static_cast<int>(std::count_if(checks.begin(), checks.end(), [](const CheckResult& c) { return c.applicable && !c.pass; }));
}

namespace {

struct Visit {
  int cell;
  std::size_t begin;
  std::size_t end;  // one past the last sample in the cell
  bool left;        // followed by a different cell
};

std::vector<Visit> visits_of(const Trajectory& traj) {
  std::vector<Visit> out;
  std::size_t k = 0;
  while (k < traj.samples.size()) {
    std::size_t e = k;
    while (e < traj.samples.size() && traj.samples[e].cell == traj.samples[k].cell) ++e;
    out.push_back({traj.samples[k].cell, k, e, e < traj.samples.size()});
    k = e;
  }
  return out;
}

std::string fmt(const char* f, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), f, a, b);
  return buf;
}

}  // namespace

std::vector<CheckResult> check_exit_time(const Trajectory& traj, const Scenario& sc, double dt) {
  std::vector<CheckResult> out;
  for (const Visit& v : visits_of(traj)) {
    CheckResult r;
    r.name = "exit_time.cell" + std::to_string(v.cell);
    const CellSpec& spec = sc.specs[static_cast<std::size_t>(v.cell)];
    const double dl = sc.gains.cells[static_cast<std::size_t>(v.cell)].delta_l;
    if (!v.left || spec.next < 0 || spec.clf_r != 1) {
      r.applicable = false;
      r.detail = v.left ? "cell has no first-order exit certificate" : "visit did not end with an exit";
      out.push_back(r);
      continue;
    }
    if (!(dl < 0)) {
      r.applicable = false;
      r.detail = "delta_l = 0 gives no finite bound";
      out.push_back(r);
      continue;
    }
    double d_max = 0.0;
    for (const auto& vert : vertices_2d(spec.cell)) d_max = std::max(d_max, spec.z.dot(vert - spec.x_e));
    r.value = traj.samples[v.end].t - traj.samples[v.begin].t;
    r.bound = -d_max / dl + dt;
    r.tolerance = dt;
    r.pass = r.value <= r.bound;
    r.detail = fmt("dwell %.6g s, bound %.6g s", r.value, r.bound);
    out.push_back(r);
  }
  return out;
}

std::vector<CheckResult> check_margin(const Trajectory& traj, const Scenario& sc, double dt) {
  double max_speed = 0.0;
  for (const auto& s : traj.samples) max_speed = std::max(max_speed, (sc.sys.A * s.x + sc.sys.B * s.u).norm());
  const double tol = 1e-6 + 2.0 * dt * max_speed;
  std::vector<CheckResult> out;
  for (const Visit& v : visits_of(traj)) {
    const CellSpec& spec = sc.specs[static_cast<std::size_t>(v.cell)];
    const CellGains& g = sc.gains.cells[static_cast<std::size_t>(v.cell)];
    for (std::size_t q = 0; q < spec.barriers.size(); ++q) {
      const Barrier& bar = spec.barriers[q];
      const double c0 = ho_coefficients(sc.synthesis.alphas_for(spec.barrier_r[q]))(0);
      const double threshold = std::abs(g.delta_b(static_cast<Eigen::Index>(q))) / c0;
      CheckResult r;
      r.name = "margin.cell" + std::to_string(v.cell) + ".row" + std::to_string(q);
      r.bound = threshold;
      r.tolerance = tol;
      const double h_entry = bar.a.dot(traj.samples[v.begin].x) + bar.b;
      if (h_entry < threshold) {
        r.applicable = false;
        r.value = h_entry;
        r.detail = "entry below the margin threshold";
        out.push_back(r);
        continue;
      }
      double min_h = h_entry;
      for (std::size_t k = v.begin; k < v.end; ++k) min_h = std::min(min_h, bar.a.dot(traj.samples[k].x) + bar.b);
      r.value = min_h;
      r.pass = min_h >= threshold - tol;
      out.push_back(r);
    }
  }
  return out;
}

std::vector<CheckResult> check_equilibrium(const Scenario& sc, const std::optional<SimConfig>& cfg, int boundary_starts) {
  std::vector<CheckResult> out;
  if (!sc.plan.final_cell) {
    out.push_back({"equilibrium", false, true, 0, 0, 0, "no final cell"});
    return out;
  }
  const int fc = *sc.plan.final_cell;
  const CellSpec& spec = sc.specs[static_cast<std::size_t>(fc)];
  const CellGains& g = sc.gains.cells[static_cast<std::size_t>(fc)];
  const Eigen::VectorXd xe = sc.goal_state();
  const Eigen::VectorXd ue = control_full(g, measure(sc.plan.goal, sc.landmarks), sc.sys.Pd * xe);

  CheckResult res;
  res.name = "equilibrium.residual";
  res.value = (sc.sys.A * xe + sc.sys.B * ue).norm();
  res.bound = 1e-8;
  res.pass = res.value <= res.bound;
  out.push_back(res);

  if (!spec.goal_interior) return out;

  CheckResult mid;
  mid.name = "equilibrium.middle_equalities";
  mid.value = ue.cwiseAbs().maxCoeff();
  mid.bound = 1e-10;
  mid.pass = mid.value <= mid.bound;
  out.push_back(mid);

  const AffineControl u = closed_loop(g, sc.sys, sc.landmarks);
  CheckResult inward;
  inward.name = "equilibrium.inward";
  inward.value = -std::numeric_limits<double>::infinity();
  inward.bound = g.delta_l;
  inward.tolerance = 1e-9;
  for (const auto& v : vertices_2d(spec.cell)) {
    for (const auto& xd : sc.sys.dyn_vertices()) {
      const Eigen::VectorXd x = sc.sys.lift(v, xd);
      const Eigen::VectorXd xdot = sc.sys.A * x + sc.sys.B * u(x);
      for (std::size_t row : active_rows(spec.cell, v)) {
        const Eigen::VectorXd n = spec.cell.unit_row(row).normal;
        inward.value = std::max(inward.value, n.dot(sc.sys.Pp * xdot));
      }
    }
  }
  inward.pass = g.delta_l < 0 && inward.value <= g.delta_l + inward.tolerance;
  inward.detail = fmt("max inward row %.6g vs delta_l %.6g", inward.value, g.delta_l);
  out.push_back(inward);

  if (!cfg) return out;
  const auto verts = vertices_2d(spec.cell);
  double perimeter = 0.0;
  for (std::size_t k = 0; k < verts.size(); ++k) perimeter += (verts[(k + 1) % verts.size()] - verts[k]).norm();
  for (int s = 0; s < boundary_starts; ++s) {
    double target = (s + 0.5) * perimeter / boundary_starts;
    Point p = verts.front();
    for (std::size_t k = 0; k < verts.size(); ++k) {
      const Point a = verts[k];
      const Point b = verts[(k + 1) % verts.size()];
      const double len = (b - a).norm();
      if (target <= len) {
        p = a + target / len * (b - a);
        break;
      }
      target -= len;
    }
    p += 1e-6 * (sc.plan.goal - p);
    CheckResult r;
    r.name = "equilibrium.boundary_start" + std::to_string(s);
    r.bound = cfg->stop_tol;
    const Trajectory traj = integrate(sc, sc.sys.lift(p), *cfg);
    r.value = (traj.samples.back().x - xe).norm();
    r.pass = traj.termination == Termination::ReachedGoal;
    r.detail = fmt("start (%.6g, %.6g)", p.x(), p.y()) + ", " + to_string(traj.termination) +
               fmt(" at t = %.6g", traj.samples.back().t);
    out.push_back(r);
  }
  return out;
}

CheckResult check_loop(const Trajectory& traj, const Scenario& sc, double eps) {
  CheckResult r;
  r.name = "loop";
  r.bound = eps;
  if (sc.plan.kind != Objective::Kind::Patrol) {
    r.applicable = false;
    r.detail = "objective is not patrolling";
    return r;
  }
  const std::size_t L = sc.plan.cycle.size();
  const auto& ev = traj.switches;
  r.pass = false;
  r.value = std::numeric_limits<double>::infinity();
  for (std::size_t k = L; k < ev.size(); ++k) {
    const std::size_t j = k - L;
    if (ev[j].from != ev[k].from || ev[j].to != ev[k].to) continue;
    bool follows_plan = true;
    for (std::size_t s = j; s < k; ++s) follows_plan = follows_plan && ev[s].to == sc.plan.successor(ev[s].from);
    if (!follows_plan) continue;
    const double gap = (ev[k].x - ev[j].x).norm();
    r.value = std::min(r.value, gap);
    if (gap <= eps) {
      r.pass = true;
      r.value = gap;
      r.detail = fmt("recurrence at t = %.6g s, period %.6g s", ev[k].t, ev[k].t - ev[j].t);
      return r;
    }
  }
  r.detail = "no recurrence before the end of the run (" + std::to_string(ev.size()) + " switches)";
  return r;
}

std::vector<Point> resample_path(const Trajectory& traj, const LinearSystem& sys, int samples) {
  std::vector<Point> pts;
  for (const auto& s : traj.samples) pts.emplace_back(sys.Pp * s.x);
  std::vector<double> arc(pts.size(), 0.0);
  for (std::size_t k = 1; k < pts.size(); ++k) arc[k] = arc[k - 1] + (pts[k] - pts[k - 1]).norm();
  std::vector<Point> out;
  if (pts.empty()) return out;
  const double total = arc.back();
  std::size_t seg = 0;
  for (int i = 0; i < samples; ++i) {
    const double s = samples == 1 ? 0.0 : total * i / (samples - 1);
    while (seg + 1 < pts.size() && arc[seg + 1] < s) ++seg;
    if (seg + 1 >= pts.size() || arc[seg + 1] == arc[seg]) {
      out.push_back(pts[std::min(seg + 1, pts.size() - 1)]);
      continue;
    }
    const double w = (s - arc[seg]) / (arc[seg + 1] - arc[seg]);
    out.push_back(pts[seg] + std::clamp(w, 0.0, 1.0) * (pts[seg + 1] - pts[seg]));
  }
  return out;
}

CheckResult check_path_equivalence(const Trajectory& a, const Trajectory& b, const LinearSystem& sys, int samples) {
  if (!sys.driftless()) throw Error(ErrorKind::PreconditionViolated, "path equivalence needs a driftless system");
  const auto pa = resample_path(a, sys, samples);
  const auto pb = resample_path(b, sys, samples);
  auto directed = [](const std::vector<Point>& p, const std::vector<Point>& q) {
    double worst = 0.0;
    for (const auto& x : p) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& y : q) best = std::min(best, (x - y).squaredNorm());
      worst = std::max(worst, best);
    }
    return std::sqrt(worst);
  };
  double length = 0.0;
  for (std::size_t k = 1; k < a.samples.size(); ++k) {
    length += (sys.Pp * (a.samples[k].x - a.samples[k - 1].x)).norm();
  }
  CheckResult r;
  r.name = "path_equivalence";
  r.value = std::max(directed(pa, pb), directed(pb, pa));
  r.bound = 1e-3 * length;
  r.pass = r.value <= r.bound;
  r.detail = fmt("Hausdorff %.6g over path length %.6g", r.value, length);
  return r;
}

}  // namespace cellnav
