#include "cellnav/commands.hpp"
#include "cellnav/environment.hpp"
#include "cellnav/error.hpp"
#include "cellnav/io.hpp"
#include "cellnav/svg.hpp"

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

SynthesisConfig corridor_config() {
  SynthesisConfig cfg;
  cfg.alphas = {0.1};
  return cfg;
}

Trajectory short_trajectory() {
  Trajectory t;
  for (int k = 0; k < 7; ++k) {
    t.samples.push_back({k * 0.1, Eigen::Vector2d(k / 3.0, -k * 1e-7), Eigen::Vector2d(1.0 / 3.0, 0.1), k < 4 ? 0 : 1, 1});
  }
  return t;
}

}  // namespace

TEST(Hash, Fnv1aKnownValues) {
  EXPECT_EQ(io::hex64(io::fnv1a64("")), "cbf29ce484222325");
  EXPECT_EQ(io::hex64(io::fnv1a64("a")), "af63dc4c8601ec8c");
}

TEST(DecompositionJson, RoundTripAndHash) {
  const Environment env = load_environment(fixture("square_with_block.json"));
  RrtParams p;
  p.n_samples = 60;
  const CellDecomposition d = decompose_rrt(env, 7, p);
  const std::string text = io::decomposition_to_json(d);
  const CellDecomposition back = io::decomposition_from_json(text);
  EXPECT_EQ(io::decomposition_to_json(back), text);
  EXPECT_EQ(io::decomposition_hash(back), io::decomposition_hash(d));
  ASSERT_EQ(back.size(), d.size());
  EXPECT_EQ(back.adjacency, d.adjacency);
  const CellDecomposition other = decompose_rrt(env, 8, p);
  EXPECT_NE(io::decomposition_hash(other), io::decomposition_hash(d));
  EXPECT_EQ(kind_of([] { io::decomposition_from_json("{\"cells\": 3}"); }), ErrorKind::SchemaError);
  EXPECT_EQ(kind_of([] { io::decomposition_from_json("{not json"); }), ErrorKind::ParseError);
}

TEST(GainsJson, RoundTrip) {
  const Environment env = load_environment(fixture("corridor_stabilize.json"));
  const CellDecomposition d = decomposition_from_cells(env);
  const cmd::SynthesisOutput out = cmd::synthesize(env, d, corridor_config());
  const io::GainsFile back = io::gains_from_json(out.json);
  EXPECT_EQ(io::gains_to_json(back), out.json);
  EXPECT_EQ(back.decomposition_hash, io::decomposition_hash(d));
  ASSERT_EQ(back.gains.cells.size(), out.file.gains.cells.size());
  for (std::size_t i = 0; i < back.gains.cells.size(); ++i) {
    EXPECT_EQ(back.gains.cells[i].Kp, out.file.gains.cells[i].Kp);
    EXPECT_EQ(back.gains.cells[i].Kb, out.file.gains.cells[i].Kb);
    EXPECT_EQ(back.gains.cells[i].delta_l, out.file.gains.cells[i].delta_l);
  }
  EXPECT_EQ(back.config.alphas, std::vector<double>{0.1});
  EXPECT_NE(out.summary.find("delta_l"), std::string::npos);
}

TEST(TrajectoryCsv, RoundTripAndStride) {
  const Trajectory t = short_trajectory();
  const io::TrajectoryHeader h{42, "00ff00ff00ff00ff", 0.5, "displacement"};
  const std::string csv = io::trajectory_to_csv(t, h);
  EXPECT_EQ(csv.rfind("# seed=42 decomposition=00ff00ff00ff00ff", 0), 0u);
  const io::TrajectoryTable tab = io::trajectory_from_csv(csv);
  EXPECT_EQ(tab.header.seed, 42u);
  EXPECT_EQ(tab.header.mode, "displacement");
  EXPECT_EQ(tab.header.eta, 0.5);
  ASSERT_EQ(tab.t.size(), t.samples.size());
  for (std::size_t k = 0; k < tab.t.size(); ++k) {
    EXPECT_EQ(tab.t[k], t.samples[k].t);
    EXPECT_EQ(tab.x[k], t.samples[k].x);
    EXPECT_EQ(tab.u[k], t.samples[k].u);
    EXPECT_EQ(tab.cell[k], t.samples[k].cell);
  }
  // every third sample plus the last
  EXPECT_EQ(io::trajectory_from_csv(io::trajectory_to_csv(t, h, 3)).t.size(), 3u);
  EXPECT_EQ(io::trajectory_from_csv(io::trajectory_to_csv(t, h, 4)).t.size(), 3u);
  EXPECT_EQ(kind_of([] { io::trajectory_from_csv("t,x1\n1,2,3\n"); }), ErrorKind::ParseError);
}

TEST(Svg, DeterministicAndHandlesEmptyTrajectories) {
  const Environment env = load_environment(fixture("corridor_stabilize.json"));
  const CellDecomposition d = decomposition_from_cells(env);
  svg::PlotInput in;
  in.env = &env;
  in.decomposition = &d;
  in.trajectories.push_back({"empty", {}});
  const std::string a = svg::render(in);
  EXPECT_EQ(a, svg::render(in));
  EXPECT_EQ(a.rfind("<svg", 0), 0u);
  EXPECT_NE(a.find("</svg>"), std::string::npos);
  EXPECT_NE(a.find("empty"), std::string::npos);
}

TEST(Commands, PlotRefusesForeignTrajectory) {
  const Environment env = load_environment(fixture("corridor_stabilize.json"));
  const CellDecomposition d = decomposition_from_cells(env);
  io::TrajectoryTable tab = io::trajectory_from_csv(
      io::trajectory_to_csv(short_trajectory(), {0, io::decomposition_hash(d), 0.5, "displacement"}));
  EXPECT_NO_THROW(cmd::plot(env, d, {tab}));
  tab.header.decomposition_hash = "0000000000000000";
  EXPECT_EQ(kind_of([&] { cmd::plot(env, d, {tab}); }), ErrorKind::SchemaError);
}

TEST(Commands, SimulateRefusesForeignGains) {
  const Environment env = load_environment(fixture("corridor_stabilize.json"));
  const CellDecomposition d = decomposition_from_cells(env);
  io::GainsFile g = cmd::synthesize(env, d, corridor_config()).file;
  g.decomposition_hash = "0123456789abcdef";
  EXPECT_EQ(kind_of([&] { cmd::scenario_of(env, d, g); }), ErrorKind::SchemaError);
}

TEST(Commands, SimulateReport) {
  const Environment env = load_environment(fixture("corridor_stabilize.json"));
  const CellDecomposition d = decomposition_from_cells(env);
  const io::GainsFile g = cmd::synthesize(env, d, corridor_config()).file;
  cmd::SimulateOptions opt;
  opt.num_starts = 2;
  opt.boundary_starts = 2;
  opt.seed = 3;
  opt.sim.t_max = 200;
  const cmd::SimulationOutput out = cmd::simulate(env, d, g, opt);
  ASSERT_EQ(out.trajectories.size(), 2u);
  EXPECT_EQ(out.csv.size(), 2u);
  EXPECT_TRUE(out.report.all_pass());
  EXPECT_NE(out.report_json.find("\"all_pass\": true"), std::string::npos);
  EXPECT_EQ(cmd::simulate(env, d, g, opt).csv, out.csv);
}

TEST(Commands, DecomposeIsDeterministic) {
  const Environment env = load_environment(fixture("square_with_block.json"));
  cmd::DecomposeOptions opt;
  opt.seed = 11;
  opt.rrt.n_samples = 50;
  EXPECT_EQ(cmd::decompose(env, opt), cmd::decompose(env, opt));
  opt.cells_from_file = true;
  EXPECT_EQ(kind_of([&] { cmd::decompose(env, opt); }), ErrorKind::SchemaError);
}

TEST(Commands, ExitCodes) {
  EXPECT_EQ(cmd::exit_code(Error(ErrorKind::ParseError, "")), 2);
  EXPECT_EQ(cmd::exit_code(Error(ErrorKind::Infeasible, "")), 3);
  EXPECT_EQ(cmd::exit_code(Error(ErrorKind::Unbounded, "")), 3);
  EXPECT_EQ(cmd::exit_code(Error(ErrorKind::BadInitialState, "")), 4);
  EXPECT_EQ(cmd::exit_code(Error(ErrorKind::NumericalFailure, "")), 5);
}
