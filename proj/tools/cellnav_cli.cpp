#include "cellnav/commands.hpp"
#include "cellnav/error.hpp"
#include "cellnav/io.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

namespace {

using namespace cellnav;

void emit(const std::string& path, const std::string& bytes) {
  if (path.empty() || path == "-") {
    std::cout << bytes;
  } else {
    io::write_file(path, bytes);
  }
}

std::vector<Eigen::VectorXd> load_starts(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  if (!j.is_array()) throw Error(ErrorKind::SchemaError, "starts file must be a list of states");
  std::vector<Eigen::VectorXd> out;
  for (const auto& s : j) {
    const auto v = s.get<std::vector<double>>();
    out.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cell-based navigation controller synthesis from landmark measurements"};
  app.require_subcommand(1);

  std::string env_path;
  std::string out_path;
  std::uint64_t seed = 0;
  std::string decomposition_path;
  std::string gains_path;

  auto* dec = app.add_subcommand("decompose", "Build a cell decomposition");
  cmd::DecomposeOptions dopt;
  dec->add_option("--env", env_path, "Environment JSON")->required();
  dec->add_option("--seed", seed, "Random seed");
  dec->add_flag("--cells-from-file", dopt.cells_from_file, "Use the environment's cells as given");
  dec->add_option("--samples", dopt.rrt.n_samples, "Tree node budget");
  dec->add_option("--step", dopt.rrt.step, "Tree extension step");
  dec->add_option("--radius", dopt.rrt.radius, "Rewiring radius");
  dec->add_option("--out", out_path, "Output decomposition JSON (default stdout)");

  auto* syn = app.add_subcommand("synthesize", "Synthesize cell controllers");
  SynthesisConfig scfg;
  scfg.alphas = {0.1};
  bool no_regularize = false;
  bool no_delta_min = false;
  double delta_min = -1e3;
  syn->add_option("--env", env_path, "Environment JSON")->required();
  syn->add_option("--decomposition", decomposition_path, "Decomposition JSON")->required();
  syn->add_option("--eta", scfg.eta, "Projection length in [0, 1]");
  syn->add_option("--alpha", scfg.alphas, "Barrier recursion rates")->delimiter(',');
  syn->add_option("--omega-b", scfg.omega_b, "Barrier margin weight");
  syn->add_option("--omega-l", scfg.omega_l, "Exit margin weight");
  syn->add_option("--delta-min", delta_min, "Lower guard on every margin");
  syn->add_flag("--no-delta-min", no_delta_min, "Drop the margin guard");
  syn->add_flag("--no-regularize", no_regularize, "Drop the smoothness terms");
  syn->add_flag("--zero-bias", scfg.zero_bias, "Pin the bias gains to zero");
  syn->add_option("--out", out_path, "Output gains JSON")->required();

  auto* sim = app.add_subcommand("simulate", "Simulate the closed loop and check its properties");
  cmd::SimulateOptions sopt;
  std::string mode = "displacement";
  std::string starts_path;
  double normalize_speed = 0.0;
  double fov_angle_deg = 360.0;
  sim->add_option("--env", env_path, "Environment JSON")->required();
  sim->add_option("--decomposition", decomposition_path, "Decomposition JSON")->required();
  sim->add_option("--gains", gains_path, "Gains JSON")->required();
  sim->add_option("--seed", seed, "Seed for random starts");
  sim->add_option("--starts", starts_path, "JSON list of initial states (overrides random starts)");
  sim->add_option("--num-starts", sopt.num_starts, "Number of random starts");
  sim->add_option("--mode", mode, "displacement, fov or bearing");
  sim->add_option("--fov-angle", fov_angle_deg, "Field of view in degrees");
  sim->add_option("--fov-range", sopt.sim.fov_range, "Sensing range");
  sim->add_option("--dt", sopt.sim.dt, "Integration step");
  sim->add_option("--tmax", sopt.sim.t_max, "Time limit");
  sim->add_option("--normalize-speed", normalize_speed, "Constant speed (0 disables)");
  sim->add_option("--stride", sopt.stride, "Write every k-th sample");
  sim->add_option("--out", out_path, "Output directory")->required();

  auto* plt = app.add_subcommand("plot", "Render an SVG figure");
  std::vector<std::string> traj_paths;
  plt->add_option("--env", env_path, "Environment JSON")->required();
  plt->add_option("--decomposition", decomposition_path, "Decomposition JSON")->required();
  plt->add_option("--traj", traj_paths, "Trajectory CSV files");
  plt->add_option("--out", out_path, "Output SVG (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    const Environment env = load_environment(env_path);
    if (*dec) {
      dopt.seed = seed;
      emit(out_path, cmd::decompose(env, dopt));
      return 0;
    }
    const CellDecomposition d = io::decomposition_from_json(io::read_file(decomposition_path));
    if (*syn) {
      scfg.regularize = !no_regularize;
      scfg.delta_min = no_delta_min ? std::nullopt : std::optional<double>(delta_min);
      const auto out = cmd::synthesize(env, d, scfg);
      io::write_file(out_path, out.json);
      std::cout << out.summary;
      return 0;
    }
    if (*sim) {
      sopt.seed = seed;
      sopt.sim.mode = parse_mode(mode);
      sopt.sim.fov_angle = fov_angle_deg * M_PI / 180.0;
      if (normalize_speed > 0) sopt.sim.normalize = normalize_speed;
      if (!starts_path.empty()) sopt.starts = load_starts(starts_path);
      const io::GainsFile gains = io::gains_from_json(io::read_file(gains_path));
      const auto out = cmd::simulate(env, d, gains, sopt);
      std::filesystem::create_directories(out_path);
      for (std::size_t k = 0; k < out.csv.size(); ++k) {
        char name[32];
        std::snprintf(name, sizeof(name), "traj_%03zu.csv", k);
        io::write_file((std::filesystem::path(out_path) / name).string(), out.csv[k]);
      }
      io::write_file((std::filesystem::path(out_path) / "report.json").string(), out.report_json);
      if (sopt.sim.mode == MeasurementMode::Bearing) {
        for (const auto& w : gains.gains.warnings) std::cerr << "warning: " << w << "\n";
      }
      std::cout << out.csv.size() << " runs, " << out.report.checks.size() << " checks, " << out.report.failures()
                << " failures\n";
      return 0;
    }
    if (*plt) {
      std::vector<io::TrajectoryTable> tables;
      for (const auto& p : traj_paths) tables.push_back(io::trajectory_from_csv(io::read_file(p)));
      emit(out_path, cmd::plot(env, d, tables));
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return cmd::exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 5;
  }
  return 0;
}
