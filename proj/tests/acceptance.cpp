#include "cellnav/commands.hpp"
#include "cellnav/environment.hpp"
#include "cellnav/error.hpp"
#include "cellnav/io.hpp"
#include "cellnav/lp.hpp"
#include "cellnav/planner.hpp"
#include "cellnav/runtime.hpp"
#include "cellnav/simulator.hpp"
#include "cellnav/synthesis.hpp"
#include "primal_oracle.hpp"
#include "random_instances.hpp"

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

using namespace cellnav;

namespace {

std::string fixture(const std::string& name) { return std::string(CELLNAV_FIXTURES) + "/" + name; }

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

struct Loaded {
  Environment env;
  CellDecomposition d;
  ExitPlan plan;
  LinearSystem sys;
};

Loaded load(const std::string& name) {
  Loaded l;
  l.env = load_environment(fixture(name));
  l.d = decomposition_from_cells(l.env);
  l.plan = make_plan(build_graph(l.d), l.d, *l.env.objective);
  l.sys = LinearSystem::from_spec(*l.env.system);
  return l;
}

SynthesisConfig config(double alpha = 0.1) {
  SynthesisConfig cfg;
  cfg.alphas = {alpha};
  return cfg;
}

Scenario scenario(const Loaded& l, const SynthesisConfig& cfg) {
  GainSet gs = synthesize(l.sys, l.d, l.plan, l.env.landmarks, cfg);
  return Scenario::make(l.sys, l.d, l.plan, l.env.landmarks, std::move(gs), cfg);
}

// ----------------------------------------------------------------- criteria

Outcome duality_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  const LinearSystem si = LinearSystem::single_integrator(1.0);
  SynthesisConfig cfg = config(0.2);
  int solved = 0;
  int infeasible = 0;
  double worst = 0.0;
  std::string where;
  for (int trial = 0; trial < 200; ++trial) {
    const oracle::TwoCellInstance inst = oracle::random_two_cell(rng);
    const ExitPlan plan = plan_stabilization(build_graph(inst.d), inst.d, inst.goal);
    GainSet gs;
    try {
      gs = synthesize(si, inst.d, plan, inst.landmarks, cfg);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Infeasible) throw;
      ++infeasible;
      continue;
    }
    ++solved;
    const auto specs = build_cell_specs(si, inst.d, plan, cfg);
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto c = oracle::recheck_cell(si, specs[i], gs.cells[i], inst.landmarks, cfg);
      if (c.max_violation > worst) {
        worst = c.max_violation;
        where = fmt("trial %d cell %zu ", trial, i) + c.worst;
      }
    }
  }
  const double elapsed = seconds_since(t0);
  Outcome o;
  o.pass = solved > 0 && worst <= 1e-6 && elapsed < 60.0;
  o.detail = fmt("max primal violation %.3g <= 1e-6 over %d synthesized instances (%d infeasible), %.1f s < 60 s", worst,
                 solved, infeasible, elapsed);
  if (!where.empty() && worst > 1e-6) o.detail += "; worst at " + where;
  return o;
}

// Vertex enumeration over every n-subset of the active-able rows.
double enumerate_lp(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::MatrixXd& E, const Eigen::VectorXd& e,
                    const Eigen::VectorXd& c) {
  const int n = static_cast<int>(c.size());
  const int m = static_cast<int>(A.rows());
  const int k = n - static_cast<int>(E.rows());
  double best = INFINITY;
  std::vector<int> pick(static_cast<std::size_t>(k));
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == k) {
      Eigen::MatrixXd M(n, n);
      Eigen::VectorXd r(n);
      M.topRows(E.rows()) = E;
      r.head(E.rows()) = e;
      for (int i = 0; i < k; ++i) {
        M.row(E.rows() + i) = A.row(pick[static_cast<std::size_t>(i)]);
        r(E.rows() + i) = b(pick[static_cast<std::size_t>(i)]);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
      if (lu.rank() < n) return;
      const Eigen::VectorXd x = lu.solve(r);
      if (((A * x - b).array() > 1e-9).any()) return;
      best = std::min(best, c.dot(x));
      return;
    }
    for (int i = start; i < m; ++i) {
      pick[static_cast<std::size_t>(depth)] = i;
      rec(i + 1, depth + 1);
    }
  };
  rec(0, 0);
  return best;
}

Outcome lp_oracle() {
  std::mt19937_64 rng(2002);
  double worst = 0.0;
  int mismatched_status = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 3;
    const int rows = 3 + static_cast<int>(rng() % 6);
    const int eqs = (n >= 3 && trial % 4 == 0) ? 1 : 0;
    Eigen::VectorXd x0(n);
    for (int j = 0; j < n; ++j) x0(j) = oracle::uniform(rng, -1, 1);

    lp::LinearProgram prog;
    Eigen::VectorXd c(n);
    Eigen::VectorXd lo(n);
    Eigen::VectorXd hi(n);
    for (int j = 0; j < n; ++j) {
      c(j) = oracle::uniform(rng, -1, 1);
      lo(j) = x0(j) - oracle::uniform(rng, 0.5, 3);
      hi(j) = x0(j) + oracle::uniform(rng, 0.5, 3);
      prog.add_variable("x" + std::to_string(j), lo(j), hi(j), c(j));
    }
    Eigen::MatrixXd A(rows + 2 * n, n);
    Eigen::VectorXd b(rows + 2 * n);
    for (int i = 0; i < rows; ++i) {
      lp::AffineExpr expr;
      for (int j = 0; j < n; ++j) {
        A(i, j) = oracle::uniform(rng, -1, 1);
        expr.add_term(j, A(i, j));
      }
      b(i) = A.row(i).dot(x0) + oracle::uniform(rng, 0.1, 1.0);
      prog.add_less_equal(expr - lp::AffineExpr(b(i)));
    }
    for (int j = 0; j < n; ++j) {
      A.row(rows + 2 * j).setZero();
      A(rows + 2 * j, j) = 1;
      b(rows + 2 * j) = hi(j);
      A.row(rows + 2 * j + 1).setZero();
      A(rows + 2 * j + 1, j) = -1;
      b(rows + 2 * j + 1) = -lo(j);
    }
    Eigen::MatrixXd E(eqs, n);
    Eigen::VectorXd e(eqs);
    for (int i = 0; i < eqs; ++i) {
      lp::AffineExpr expr;
      for (int j = 0; j < n; ++j) {
        E(i, j) = oracle::uniform(rng, -1, 1);
        expr.add_term(j, E(i, j));
      }
      e(i) = E.row(i).dot(x0);
      prog.add_equal(expr - lp::AffineExpr(e(i)));
    }
    const lp::Solution sol = lp::solve(prog);
    const double ref = enumerate_lp(A, b, E, e, c);
    if (sol.status != lp::Status::Optimal || !std::isfinite(ref)) {
      ++mismatched_status;
      continue;
    }
    worst = std::max(worst, std::abs(sol.objective - ref));
  }
  Outcome o;
  o.pass = mismatched_status == 0 && worst <= 1e-6;
  o.detail = fmt("max |objective - vertex optimum| %.3g <= 1e-6 over 100 LPs (%d status mismatches)", worst,
                 mismatched_status);
  return o;
}

struct CorridorRuns {
  Scenario sc;
  std::vector<Trajectory> runs;
  double elapsed = 0.0;
};

CorridorRuns& corridor_runs() {
  static CorridorRuns cr = [] {
    const Loaded l = load("corridor_stabilize.json");
    CorridorRuns r{scenario(l, config()), {}, 0.0};
    SimConfig sim;
    sim.t_max = 60;
    const auto t0 = Clock::now();
    for (const auto& x0 : cmd::random_starts(r.sc, l.env, 20, 3003, sim.stop_tol)) r.runs.push_back(integrate(r.sc, x0, sim));
    r.elapsed = seconds_since(t0);
    return r;
  }();
  return cr;
}

Outcome finite_exit_time() {
  const CorridorRuns& cr = corridor_runs();
  const double dt = SimConfig{}.dt;
  int checked = 0;
  int failed = 0;
  int reached = 0;
  double worst_ratio = 0.0;
  for (const auto& t : cr.runs) {
    reached += t.termination == Termination::ReachedGoal ? 1 : 0;
    for (const auto& c : check_exit_time(t, cr.sc, dt)) {
      if (!c.applicable) continue;
      ++checked;
      failed += c.pass ? 0 : 1;
      worst_ratio = std::max(worst_ratio, c.value / c.bound);
    }
  }
  Outcome o;
  o.pass = checked > 0 && failed == 0 && cr.elapsed < 30.0;
  o.detail = fmt("%d/%d cell dwells within -d_max/delta_l + dt (max dwell/bound %.3f), %d/20 runs reached the goal, "
                 "%.1f s < 30 s",
                 checked - failed, checked, worst_ratio, reached, cr.elapsed);
  return o;
}

Outcome barrier_margin() {
  const CorridorRuns& cr = corridor_runs();
  int checked = 0;
  int failed = 0;
  double worst = INFINITY;
  for (const auto& t : cr.runs) {
    for (const auto& c : check_margin(t, cr.sc, SimConfig{}.dt)) {
      if (!c.applicable) continue;
      ++checked;
      failed += c.pass ? 0 : 1;
      worst = std::min(worst, c.value - (c.bound - c.tolerance));
    }
  }
  Outcome o;
  o.pass = checked > 0 && failed == 0;
  o.detail = fmt("%d violations over %d (visit, barrier) pairs, min slack over |delta_b|/c0 - tol %.3g", failed, checked,
                 worst);
  return o;
}

Outcome equilibrium_vertex() {
  const Scenario sc = scenario(load("corridor_vertex.json"), config());
  const auto checks = check_equilibrium(sc, std::nullopt);
  Outcome o;
  o.pass = checks.size() == 1 && checks[0].pass && checks[0].value <= 1e-8;
  o.detail = fmt("residual |x'(x_e)| %.3g <= 1e-8 in final cell %d", checks[0].value, *sc.plan.final_cell);
  return o;
}

Outcome equilibrium_interior() {
  const Scenario sc = scenario(load("corridor_stabilize.json"), config());
  SimConfig sim;
  sim.t_max = 60;
  sim.stop_tol = 1e-2;
  const auto checks = check_equilibrium(sc, sim, 10);
  double middle = NAN;
  double inward = NAN;
  double dl = sc.gains.cells[static_cast<std::size_t>(*sc.plan.final_cell)].delta_l;
  int converged = 0;
  int starts = 0;
  bool ok = true;
  for (const auto& c : checks) {
    ok = ok && c.pass;
    if (c.name == "equilibrium.middle_equalities") middle = c.value;
    if (c.name == "equilibrium.inward") inward = c.value;
    if (c.name.rfind("equilibrium.boundary_start", 0) == 0) {
      ++starts;
      converged += c.pass ? 1 : 0;
    }
  }
  Outcome o;
  o.pass = ok && starts == 10 && middle <= 1e-10 && inward <= dl + 1e-9 && dl < 0;
  o.detail = fmt("middle equalities %.3g <= 1e-10, max inward row %.4g <= delta_l %.4g < 0, ", middle, inward, dl) +
             fmt("%d/%d boundary starts within 1e-2 of x_e before 60 s", converged, starts);
  return o;
}

Outcome fov_identity() {
  const Loaded l = load("corridor_stabilize.json");
  const GainSet gs = synthesize(l.sys, l.d, l.plan, l.env.landmarks, config());
  std::mt19937_64 rng(7007);
  const auto n = l.env.landmarks.size();
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const CellGains& g = gs.cells[rng() % gs.cells.size()];
    const Point x(oracle::uniform(rng, -1, 7), oracle::uniform(rng, -1, 5));
    std::vector<bool> mask(n);
    for (std::size_t k = 0; k < n; ++k) mask[k] = rng() % 2 == 0;
    mask[static_cast<std::size_t>(g.landmarks[rng() % g.landmarks.size()])] = true;
    const Eigen::VectorXd full = control_full(g, measure(x, l.env.landmarks), Eigen::VectorXd::Zero(0));
    const Eigen::VectorXd fov =
        control_limited_fov(g, measure(x, l.env.landmarks, mask, false), l.env.landmarks, Eigen::VectorXd::Zero(0));
    worst = std::max(worst, (full - fov).cwiseAbs().maxCoeff());
  }
  Outcome o;
  o.pass = worst <= 1e-12;
  o.detail = fmt("max |u_fov - u_full|_inf %.3g <= 1e-12 over 1000 states and masks", worst);
  return o;
}

Outcome bearing_path_equivalence() {
  const Loaded l = load("corridor_bearing.json");
  SynthesisConfig cfg = config();
  cfg.zero_bias = true;
  const Scenario sc = scenario(l, cfg);
  SimConfig disp;
  disp.zero_order_hold = false;
  disp.stop_tol = 1e-3;
  disp.t_max = 400;
  SimConfig bear = disp;
  bear.mode = MeasurementMode::Bearing;
  bear.t_max = 4000;
  double worst_ratio = 0.0;
  int failed = 0;
  const auto starts = cmd::random_starts(sc, l.env, 5, 8008, disp.stop_tol);
  std::string note;
  for (const auto& x0 : starts) {
    const Trajectory a = integrate(sc, x0, disp);
    const Trajectory b = integrate(sc, x0, bear);
    const CheckResult r = check_path_equivalence(a, b, sc.sys);
    const bool ended = a.termination == Termination::ReachedGoal && b.termination == Termination::ReachedGoal;
    failed += (r.pass && ended) ? 0 : 1;
    worst_ratio = std::max(worst_ratio, r.value / r.bound * 1e-3);
    if (!ended) note = fmt(" (a run ended by %s/%s)", to_string(a.termination), to_string(b.termination));
  }
  Outcome o;
  o.pass = failed == 0;
  o.detail = fmt("max Hausdorff/path length %.3g <= 1e-3 over %zu starts, zero-bias gains", worst_ratio, starts.size()) +
             note;
  return o;
}

Outcome rescale_identity() {
  std::mt19937_64 rng(9009);
  double worst = 0.0;
  int accepted = 0;
  int degenerate = 0;
  while (accepted < 1000) {
    const int n = 2 + static_cast<int>(rng() % 4);
    std::vector<Point> landmarks;
    for (int i = 0; i < n; ++i) landmarks.emplace_back(oracle::uniform(rng, -5, 5), oracle::uniform(rng, -5, 5));
    const Point x(oracle::uniform(rng, -5, 5), oracle::uniform(rng, -5, 5));
    std::vector<int> cell(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) cell[static_cast<std::size_t>(i)] = i;
    const int f = static_cast<int>(rng() % static_cast<unsigned>(n));
    std::vector<Point> scaled;
    try {
      scaled = rescale_bearings(measure(x, landmarks, true), f, landmarks, cell);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DegenerateGeometry && e.kind() != ErrorKind::CoincidentLandmark) throw;
      ++degenerate;
      continue;
    }
    ++accepted;
    const double d_f = (landmarks[static_cast<std::size_t>(f)] - x).norm();
    for (int i = 0; i < n; ++i) {
      const Point y = landmarks[static_cast<std::size_t>(i)] - x;
      worst = std::max(worst, (y - d_f * scaled[static_cast<std::size_t>(i)]).norm());
    }
  }
  Outcome o;
  o.pass = worst <= 1e-9;
  o.detail = fmt("max |(l_i - x) - d_f (l~_i - x)| %.3g <= 1e-9 over 1000 configurations (%d degenerate skipped)", worst,
                 degenerate);
  return o;
}

Outcome regularization_dominance(std::vector<std::string>& report) {
  const Loaded l = load("corridor_stabilize.json");
  SynthesisConfig reg = config();
  SynthesisConfig plain = reg;
  plain.regularize = false;
  const GainSet a = synthesize(l.sys, l.d, l.plan, l.env.landmarks, reg);
  const GainSet b = synthesize(l.sys, l.d, l.plan, l.env.landmarks, plain);
  const double fa = evaluate_objective(l.sys, l.d, l.plan, l.env.landmarks, a, reg).total();
  const double fb = evaluate_objective(l.sys, l.d, l.plan, l.env.landmarks, b, reg).total();
  for (double eta : {0.0, 0.5, 1.0}) {
    SynthesisConfig cfg = reg;
    cfg.eta = eta;
    const GainSet gs = synthesize(l.sys, l.d, l.plan, l.env.landmarks, cfg);
    const SmoothnessReport s = evaluate_smoothness(l.sys, l.d, l.plan, l.env.landmarks, gs, eta);
    std::string line = fmt("     eta=%.1f phi_t=%.4f phi_p=%.4f per face:", eta, s.phi_t, s.phi_p);
    for (std::size_t k = 0; k < s.transitions.size(); ++k) {
      line += fmt(" %d->%d:%.4f", s.transitions[k].first, s.transitions[k].second, s.phi_t_per_face[k]);
    }
    report.push_back(line);
  }
  Outcome o;
  o.pass = fa <= fb + 1e-9 * (1 + std::abs(fb));
  o.detail = fmt("full objective regularized %.6g <= non-regularized %.6g", fa, fb);
  return o;
}

Outcome patrolling() {
  const Loaded l = load("corridor_patrol.json");
  const Scenario sc = scenario(l, config());
  SimConfig sim;
  sim.t_max = 120;
  int found = 0;
  double worst_gap = 0.0;
  const auto starts = cmd::random_starts(sc, l.env, 10, 11011, sim.stop_tol);
  for (const auto& x0 : starts) {
    const CheckResult r = check_loop(integrate(sc, x0, sim), sc);
    found += r.pass ? 1 : 0;
    worst_gap = std::max(worst_gap, r.value);
  }
  Outcome o;
  o.pass = found == static_cast<int>(starts.size()) && found == 10;
  o.detail = fmt("recurrence found from %d/%zu starts before 120 s (max handover gap %.3g <= 1e-2)", found, starts.size(),
                 worst_gap);
  return o;
}

Outcome determinism() {
  struct Bytes {
    std::string decomposition, gains, csv, svg;
  };
  auto run = [] {
    Bytes out;
    const Environment obstacle = load_environment(fixture("square_with_block.json"));
    cmd::DecomposeOptions dopt;
    dopt.seed = 12012;
    dopt.rrt.n_samples = 60;
    out.decomposition = cmd::decompose(obstacle, dopt);

    const Environment env = load_environment(fixture("corridor_stabilize.json"));
    const CellDecomposition d = decomposition_from_cells(env);
    const cmd::SynthesisOutput syn = cmd::synthesize(env, d, config());
    out.gains = syn.json;
    cmd::SimulateOptions sopt;
    sopt.num_starts = 3;
    sopt.boundary_starts = 0;
    sopt.seed = 12012;
    sopt.sim.t_max = 20;
    const cmd::SimulationOutput sim = cmd::simulate(env, d, syn.file, sopt);
    std::vector<io::TrajectoryTable> tables;
    for (const auto& c : sim.csv) {
      out.csv += c;
      tables.push_back(io::trajectory_from_csv(c));
    }
    out.svg = cmd::plot(env, d, tables);
    return out;
  };
  const Bytes a = run();
  const Bytes b = run();
  const bool same_d = a.decomposition == b.decomposition;
  const bool same_g = a.gains == b.gains;
  const bool same_c = a.csv == b.csv;
  const bool same_s = a.svg == b.svg;
  Outcome o;
  o.pass = same_d && same_g && same_c && same_s && !a.csv.empty();
  o.detail = fmt("identical bytes: decomposition %s (%zu B), gains %s (%zu B), trajectories %s (%zu B), svg %s (%zu B)",
                 same_d ? "yes" : "no", a.decomposition.size(), same_g ? "yes" : "no", a.gains.size(),
                 same_c ? "yes" : "no", a.csv.size(), same_s ? "yes" : "no", a.svg.size());
  return o;
}

}  // namespace

int main() {
  std::vector<std::string> extra;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"duality equivalence", duality_equivalence},
      {"LP solver oracle", lp_oracle},
      {"finite exit time", finite_exit_time},
      {"barrier margin", barrier_margin},
      {"equilibrium, vertex goal", equilibrium_vertex},
      {"equilibrium, interior goal", equilibrium_interior},
      {"limited-FOV identity", fov_identity},
      {"bearing path equivalence", bearing_path_equivalence},
      {"bearing rescale identity", rescale_identity},
      {"regularization dominance", [&] { return regularization_dominance(extra); }},
      {"patrolling", patrolling},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str(),
                seconds_since(t0));
    for (const auto& line : extra) std::printf("%s\n", line.c_str());
    extra.clear();
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
