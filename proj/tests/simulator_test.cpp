#include "cellnav/environment.hpp"
#include "cellnav/error.hpp"
#include "cellnav/planner.hpp"
#include "cellnav/simulator.hpp"
#include "cellnav/synthesis.hpp"

#include <gtest/gtest.h>

#include <functional>

using namespace cellnav;

namespace {

std::string fixture(const std::string& name) { return std::string(CELLNAV_FIXTURES) + "/" + name; }

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::ParseError;
}

CellDecomposition rects(const std::vector<std::vector<Point>>& cells) {
  Environment env;
  env.boundary = {{-10, -10}, {10, -10}, {10, 10}, {-10, 10}};
  env.landmarks = {{0, 0}};
  env.cells = cells;
  return decomposition_from_cells(env);
}

CellGains bias_only(const Eigen::Vector2d& kb, double delta_l, int barriers) {
  CellGains g;
  g.landmarks = {0};
  g.Kp = Eigen::MatrixXd::Zero(2, 2);
  g.Kd = Eigen::MatrixXd::Zero(2, 0);
  g.Kb = kb;
  g.delta_l = delta_l;
  g.delta_b = Eigen::VectorXd::Zero(barriers);
  return g;
}

// Cell 0 = [0,2]x[0,1] exits into cell 1 = [2,4]x[0,1]; goal (3, 0.5).
Scenario two_rects(const Eigen::Vector2d& kb0, double delta_l) {
  const CellDecomposition d = rects({{{0, 0}, {2, 0}, {2, 1}, {0, 1}}, {{2, 0}, {4, 0}, {4, 1}, {2, 1}}});
  const ExitPlan plan = plan_stabilization(build_graph(d), d, Point(3, 0.5));
  GainSet gs;
  gs.cells = {bias_only(kb0, delta_l, 3), bias_only(Eigen::Vector2d::Zero(), -0.1, 4)};
  return Scenario::make(LinearSystem::single_integrator(1.0), d, plan, {{0, 0}}, gs, SynthesisConfig{});
}

Trajectory straight(double t_exit) {
  Trajectory traj;
  for (int k = 0; k <= 10; ++k) {
    const double t = t_exit * k / 10.0;
    traj.samples.push_back({t, Eigen::Vector2d(0.2 * k / 10.0 * 9 + 0.1, 0.5), Eigen::Vector2d(1, 0), 0, 1});
  }
  traj.samples.push_back({t_exit + 0.01, Eigen::Vector2d(2.05, 0.5), Eigen::Vector2d(1, 0), 1, 1});
  return traj;
}

Scenario corridor_scenario(const std::string& name, double alpha = 0.1) {
  const Environment env = load_environment(fixture(name));
  const CellDecomposition d = decomposition_from_cells(env);
  const ExitPlan plan = make_plan(build_graph(d), d, *env.objective);
  const LinearSystem sys = LinearSystem::from_spec(*env.system);
  SynthesisConfig cfg;
  cfg.alphas = {alpha};
  GainSet gs = synthesize(sys, d, plan, env.landmarks, cfg);
  return Scenario::make(sys, d, plan, env.landmarks, std::move(gs), cfg);
}

}  // namespace

TEST(Integrate, ConstantControlEndpoint) {
  const CellDecomposition d = rects({{{-5, -5}, {5, -5}, {5, 5}, {-5, 5}}});
  const ExitPlan plan = plan_stabilization(build_graph(d), d, Point(4, 4));
  GainSet gs;
  gs.cells = {bias_only(Eigen::Vector2d(1, 0), -0.1, 4)};
  const Scenario sc = Scenario::make(LinearSystem::single_integrator(1.0), d, plan, {{0, 0}}, gs, SynthesisConfig{});
  SimConfig cfg;
  cfg.t_max = 1.0;
  const Trajectory traj = integrate(sc, Eigen::Vector2d(0, 0), cfg);
  EXPECT_EQ(traj.termination, Termination::TimeLimit);
  EXPECT_NEAR(traj.samples.back().t, 1.0, 1e-12);
  EXPECT_LE((traj.samples.back().x - Eigen::Vector2d(1, 0)).norm(), 1e-9);
  EXPECT_NEAR(traj.samples.front().t, 0.0, 0.0);

  cfg.integrator = Integrator::Euler;
  EXPECT_LE((integrate(sc, Eigen::Vector2d(0, 0), cfg).samples.back().x - Eigen::Vector2d(1, 0)).norm(), 1e-9);
}

TEST(Integrate, LeavesDecomposition) {
  const Scenario sc = two_rects(Eigen::Vector2d(0, 1), -0.5);
  SimConfig cfg;
  cfg.t_max = 5.0;
  const Trajectory traj = integrate(sc, Eigen::Vector2d(0.5, 0.5), cfg);
  EXPECT_EQ(traj.termination, Termination::OutOfDecomposition);
  EXPECT_LT(traj.samples.back().t, 1.0);
}

TEST(Integrate, SwitchesAlongPlan) {
  const Scenario sc = two_rects(Eigen::Vector2d(1, 0), -1.0);
  SimConfig cfg;
  cfg.t_max = 5.0;
  const Trajectory traj = integrate(sc, Eigen::Vector2d(0.5, 0.5), cfg);
  ASSERT_FALSE(traj.switches.empty());
  EXPECT_EQ(traj.switches.front().from, 0);
  EXPECT_EQ(traj.switches.front().to, 1);
  EXPECT_NEAR(traj.switches.front().t, 1.5, 2e-3);
}

TEST(CheckInitialState, Rejections) {
  const Scenario sc = two_rects(Eigen::Vector2d(1, 0), -0.5);
  EXPECT_NO_THROW(check_initial_state(sc, Eigen::Vector2d(1, 0.5)));
  EXPECT_EQ(kind_of([&] { check_initial_state(sc, Eigen::Vector2d(7, 0.5)); }), ErrorKind::BadInitialState);
  EXPECT_EQ(kind_of([&] { integrate(sc, Eigen::Vector2d(-1, 0.5), SimConfig{}); }), ErrorKind::BadInitialState);
}

TEST(SimConfig, Validation) {
  SimConfig cfg;
  cfg.dt = 0;
  EXPECT_EQ(kind_of([&] { cfg.validate(); }), ErrorKind::InvalidConfig);
  EXPECT_EQ(kind_of([] { parse_mode("sonar"); }), ErrorKind::InvalidConfig);
  EXPECT_EQ(parse_mode("bearing"), MeasurementMode::Bearing);
  EXPECT_STREQ(to_string(MeasurementMode::LimitedFov), "fov");
}

TEST(CheckExitTime, BoundFromMarginAndDepth) {
  // d_max = 2 (face x = 2, far side x = 0), delta_l = -0.5: bound 4 s + dt
  const Scenario sc = two_rects(Eigen::Vector2d(1, 0), -0.5);
  const double dt = 1e-3;
  const auto ok = check_exit_time(straight(3.9), sc, dt);
  ASSERT_EQ(ok.size(), 2u);
  EXPECT_TRUE(ok[0].applicable);
  EXPECT_NEAR(ok[0].bound, 4.0 + dt, 1e-12);
  EXPECT_TRUE(ok[0].pass);
  EXPECT_FALSE(ok[1].applicable);

  const auto late = check_exit_time(straight(4.2), sc, dt);
  EXPECT_FALSE(late[0].pass);
}

TEST(CheckExitTime, NotApplicableCases) {
  const Scenario zero = two_rects(Eigen::Vector2d(1, 0), 0.0);
  EXPECT_FALSE(check_exit_time(straight(3.0), zero, 1e-3)[0].applicable);
  Trajectory stays = straight(3.0);
  stays.samples.pop_back();
  const Scenario sc = two_rects(Eigen::Vector2d(1, 0), -0.5);
  const auto r = check_exit_time(stays, sc, 1e-3);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_FALSE(r[0].applicable);
}

TEST(CheckMargin, DetectsBarrierViolation) {
  Scenario sc = two_rects(Eigen::Vector2d(1, 0), -0.5);
  sc.gains.cells[0].delta_b.setConstant(-0.1);  // threshold 0.1 / c0 with alpha = 1
  Trajectory traj = straight(3.0);
  for (const auto& r : check_margin(traj, sc, 1e-3)) {
    if (r.applicable) EXPECT_TRUE(r.pass) << r.name;
  }
  traj.samples[5].x(1) = 0.95;  // 0.05 from the top wall
  bool failed = false;
  for (const auto& r : check_margin(traj, sc, 1e-3)) failed = failed || (r.applicable && !r.pass);
  EXPECT_TRUE(failed);
}

TEST(CheckEquilibrium, CorridorInteriorGoal) {
  const Scenario sc = corridor_scenario("corridor_stabilize.json");
  SimConfig cfg;
  cfg.t_max = 200;
  const auto checks = check_equilibrium(sc, cfg, 4);
  ASSERT_EQ(checks.size(), 3u + 4u);
  for (const auto& c : checks) EXPECT_TRUE(c.pass) << c.name << " " << c.value << " " << c.detail;
}

TEST(CheckEquilibrium, PerturbedBiasFails) {
  Scenario sc = corridor_scenario("corridor_stabilize.json");
  sc.gains.cells[static_cast<std::size_t>(*sc.plan.final_cell)].Kb(0) += 1e-3;
  const auto checks = check_equilibrium(sc, std::nullopt);
  EXPECT_FALSE(checks[0].pass);
  EXPECT_FALSE(checks[1].pass);
}

TEST(CheckEquilibrium, VertexGoalResidualOnly) {
  const Scenario sc = corridor_scenario("corridor_vertex.json");
  const auto checks = check_equilibrium(sc, std::nullopt);
  ASSERT_EQ(checks.size(), 1u);
  EXPECT_LE(checks[0].value, 1e-8);
}

TEST(CheckLoop, NotApplicableForStabilization) {
  const Scenario sc = two_rects(Eigen::Vector2d(1, 0), -0.5);
  EXPECT_FALSE(check_loop(straight(1.0), sc).applicable);
}

TEST(CheckLoop, CorridorPatrolRecurs) {
  const Scenario sc = corridor_scenario("corridor_patrol.json");
  SimConfig cfg;
  cfg.t_max = 120;
  const Eigen::VectorXd x0 = sc.sys.lift(polygon_centroid(vertices_2d(sc.decomposition.cells[0])));
  const Trajectory traj = integrate(sc, x0, cfg);
  const CheckResult r = check_loop(traj, sc);
  EXPECT_TRUE(r.pass) << r.detail << " value " << r.value;
}

TEST(PathEquivalence, IdenticalAndShifted) {
  const Trajectory a = straight(2.0);
  const LinearSystem si = LinearSystem::single_integrator(1.0);
  const CheckResult same = check_path_equivalence(a, a, si);
  EXPECT_EQ(same.value, 0.0);
  EXPECT_TRUE(same.pass);
  Trajectory b = a;
  for (auto& s : b.samples) s.x(1) += 0.01;
  const CheckResult shifted = check_path_equivalence(a, b, si);
  EXPECT_NEAR(shifted.value, 0.01, 1e-9);
  EXPECT_FALSE(shifted.pass);
  // same path, different timing: equivalent
  Trajectory slow = a;
  for (auto& s : slow.samples) s.t *= 3.0;
  EXPECT_TRUE(check_path_equivalence(a, slow, si).pass);
}

TEST(PathEquivalence, RejectsDrift) {
  const LinearSystem di = LinearSystem::double_integrator(1.0, 1.0);
  EXPECT_EQ(kind_of([&] { check_path_equivalence(Trajectory{}, Trajectory{}, di); }), ErrorKind::PreconditionViolated);
}

TEST(ResamplePath, EvenArcLength) {
  const LinearSystem si = LinearSystem::single_integrator(1.0);
  Trajectory t;
  t.samples.push_back({0, Eigen::Vector2d(0, 0), Eigen::Vector2d::Zero(), 0, 0});
  t.samples.push_back({1, Eigen::Vector2d(1, 0), Eigen::Vector2d::Zero(), 0, 0});
  t.samples.push_back({2, Eigen::Vector2d(1, 3), Eigen::Vector2d::Zero(), 0, 0});
  const auto p = resample_path(t, si, 5);
  ASSERT_EQ(p.size(), 5u);
  EXPECT_TRUE(p[1].isApprox(Point(1, 0)));
  EXPECT_TRUE(p[2].isApprox(Point(1, 1)));
  EXPECT_TRUE(p[4].isApprox(Point(1, 3)));
}
