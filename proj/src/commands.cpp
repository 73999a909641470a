#include "cellnav/commands.hpp"

#include "cellnav/error.hpp"
#include "cellnav/planner.hpp"
#include "cellnav/svg.hpp"

#include <json.hpp>

#include <atomic>
#include <cstdio>
#include <random>
#include <thread>

namespace cellnav::cmd {

using nlohmann::json;

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Infeasible:
    case ErrorKind::Unbounded:
      return 3;
    case ErrorKind::BadInitialState:
      return 4;
    case ErrorKind::NumericalFailure:
      return 5;
    default:
      return 2;
  }
}

LinearSystem system_of(const Environment& env) {
  return env.system ? LinearSystem::from_spec(*env.system) : LinearSystem::single_integrator(1.0);
}

ExitPlan plan_of(const Environment& env, const CellDecomposition& d) {
  if (!env.objective) throw Error(ErrorKind::SchemaError, "environment has no objective");
  return make_plan(build_graph(d), d, *env.objective);
}

std::string decompose(const Environment& env, const DecomposeOptions& opt) {
  CellDecomposition d;
  if (opt.cells_from_file) {
    if (!env.cells) throw Error(ErrorKind::SchemaError, "environment lists no cells");
    d = decomposition_from_cells(env);
    d.seed = opt.seed;
  } else {
    d = decompose_rrt(env, opt.seed, opt.rrt);
  }
  return io::decomposition_to_json(d);
}

SynthesisOutput synthesize(const Environment& env, const CellDecomposition& d, SynthesisConfig config) {
  const LinearSystem sys = system_of(env);
  if (sys.nd() > 0) config.allow_mixed_relative_degree = true;
  config.validate();
  const ExitPlan plan = plan_of(env, d);
  SynthesisOutput out;
  out.file.gains = cellnav::synthesize(sys, d, plan, env.landmarks, config);
  out.file.config = config;
  out.file.decomposition_hash = io::decomposition_hash(d);
  out.json = io::gains_to_json(out.file);

  const ObjectiveBreakdown& o = out.file.gains.objective;
  char buf[256];
  std::snprintf(buf, sizeof(buf), "objective %.9g = phi_t %.9g + phi_p %.9g + margin_b %.9g + margin_l %.9g\n", o.total(),
                o.phi_t, o.phi_p, o.margin_b, o.margin_l);
  out.summary = buf;
  for (std::size_t i = 0; i < out.file.gains.cells.size(); ++i) {
    const CellGains& g = out.file.gains.cells[i];
    std::snprintf(buf, sizeof(buf), "cell %zu: delta_l %.9g, min delta_b %.9g\n", i, g.delta_l,
                  g.delta_b.size() ? g.delta_b.minCoeff() : 0.0);
    out.summary += buf;
  }
  for (const auto& w : out.file.gains.warnings) out.summary += "warning: " + w + "\n";
  return out;
}

Scenario scenario_of(const Environment& env, const CellDecomposition& d, const io::GainsFile& gains) {
  const std::string hash = io::decomposition_hash(d);
  if (gains.decomposition_hash != hash) {
    throw Error(ErrorKind::SchemaError,
                "gains were synthesized for decomposition " + gains.decomposition_hash + ", not " + hash);
  }
  return Scenario::make(system_of(env), d, plan_of(env, d), env.landmarks, gains.gains, gains.config);
}

std::vector<Eigen::VectorXd> random_starts(const Scenario& sc, const Environment& env, int count, std::uint64_t seed,
                                           double stop_tol) {
  std::mt19937_64 rng(seed);
  auto uniform = [&rng]() { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };
  Point lo = env.boundary.front();
  Point hi = env.boundary.front();
  for (const auto& p : env.boundary) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  std::vector<Eigen::VectorXd> out;
  const bool stabilize = sc.plan.kind == Objective::Kind::Stabilize;
  long attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    if (++attempts > 100000L * std::max(count, 1)) {
      throw Error(ErrorKind::BadInitialState, "could not sample compliant starts");
    }
    const Point p(lo.x() + uniform() * (hi.x() - lo.x()), lo.y() + uniform() * (hi.y() - lo.y()));
    if (stabilize && (p - sc.plan.goal).norm() <= stop_tol) continue;
    const Eigen::VectorXd x = sc.sys.lift(p);
    try {
      check_initial_state(sc, x);
    } catch (const Error&) {
      continue;
    }
    out.push_back(x);
  }
  return out;
}

namespace {

json check_json(const CheckResult& c) {
  return {{"name", c.name},      {"applicable", c.applicable}, {"pass", c.pass},    {"value", c.value},
          {"bound", c.bound},    {"tolerance", c.tolerance},   {"detail", c.detail}};
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

SimulationOutput simulate(const Environment& env, const CellDecomposition& d, const io::GainsFile& gains,
                          const SimulateOptions& opt) {
  opt.sim.validate();
  const Scenario sc = scenario_of(env, d, gains);
  SimulationOutput out;
  out.starts = opt.starts.empty() ? random_starts(sc, env, opt.num_starts, opt.seed, opt.sim.stop_tol) : opt.starts;
  for (const auto& x0 : out.starts) check_initial_state(sc, x0);

  const std::size_t n = out.starts.size();
  out.trajectories.resize(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t k = next++; k < n; k = next++) {
      try {
        out.trajectories[k] = integrate(sc, out.starts[k], opt.sim);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  unsigned threads = opt.threads > 0 ? static_cast<unsigned>(opt.threads) : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const io::TrajectoryHeader header{opt.seed, gains.decomposition_hash, gains.config.eta, to_string(opt.sim.mode)};
  json runs = json::array();
  for (std::size_t k = 0; k < n; ++k) {
    const Trajectory& tr = out.trajectories[k];
    out.csv.push_back(io::trajectory_to_csv(tr, header, opt.stride));
    const std::string tag = "run" + std::to_string(k) + ".";
    CheckResult term;
    term.name = tag + "termination";
    if (sc.plan.kind == Objective::Kind::Stabilize) {
      term.pass = tr.termination == Termination::ReachedGoal;
    } else {
      term.pass = tr.termination == Termination::TimeLimit;
    }
    term.detail = std::string(to_string(tr.termination)) + (tr.message.empty() ? "" : ": " + tr.message);
    out.report.add(term);
    const bool retimed = opt.sim.mode == MeasurementMode::Bearing || opt.sim.normalize.has_value();
    for (auto c : check_exit_time(tr, sc, opt.sim.dt)) {
      c.name = tag + c.name;
      if (retimed && c.applicable) {
        c.applicable = false;
        c.detail = "bound holds for the unscaled displacement controller only; " + c.detail;
      }
      out.report.add(c);
    }
    for (auto c : check_margin(tr, sc, opt.sim.dt)) {
      c.name = tag + c.name;
      out.report.add(c);
    }
    if (sc.plan.kind == Objective::Kind::Patrol) {
      auto c = check_loop(tr, sc);
      c.name = tag + c.name;
      out.report.add(c);
    }
    runs.push_back({{"start", vec_json(out.starts[k])},
                    {"termination", to_string(tr.termination)},
                    {"final_time", tr.samples.empty() ? 0.0 : tr.samples.back().t},
                    {"switches", tr.switches.size()},
                    {"chattering", tr.chattering}});
  }
  if (sc.plan.kind == Objective::Kind::Stabilize) {
    for (const auto& c : check_equilibrium(sc, opt.sim, opt.boundary_starts)) out.report.add(c);
  }

  json checks = json::array();
  for (const auto& c : out.report.checks) checks.push_back(check_json(c));
  json report;
  report["seed"] = opt.seed;
  report["decomposition"] = gains.decomposition_hash;
  report["mode"] = to_string(opt.sim.mode);
  report["dt"] = opt.sim.dt;
  report["runs"] = runs;
  report["checks"] = checks;
  report["failures"] = out.report.failures();
  report["all_pass"] = out.report.all_pass();
  report["warnings"] = opt.sim.mode == MeasurementMode::Bearing ? gains.gains.warnings : std::vector<std::string>{};
  out.report_json = report.dump(2) + "\n";
  return out;
}

std::string plot(const Environment& env, const CellDecomposition& d, const std::vector<io::TrajectoryTable>& trajectories) {
  const std::string hash = io::decomposition_hash(d);
  svg::PlotInput in;
  in.env = &env;
  in.decomposition = &d;
  std::optional<ExitPlan> plan;
  if (env.objective) {
    plan = plan_of(env, d);
    in.plan = &*plan;
  }
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const auto& t = trajectories[k];
    if (t.header.decomposition_hash != hash) {
      throw Error(ErrorKind::SchemaError, "trajectory " + std::to_string(k) + " belongs to decomposition " +
                                              t.header.decomposition_hash + ", not " + hash);
    }
    svg::Polyline line;
    char buf[96];
    std::snprintf(buf, sizeof(buf), "eta=%g mode=%s", t.header.eta, t.header.mode.c_str());
    line.label = buf;
    for (const auto& x : t.x) {
      if (x.size() >= 2) line.points.emplace_back(x(0), x(1));
    }
    in.trajectories.push_back(std::move(line));
  }
  return svg::render(in);
}

}  // namespace cellnav::cmd
