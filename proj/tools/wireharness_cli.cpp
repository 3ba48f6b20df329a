// wireharness: collect, fit, track, plan and run from the command line.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "wireharness/errors.hpp"
#include "wireharness/executive.hpp"
#include "wireharness/io.hpp"
#include "wireharness/koopman.hpp"
#include "wireharness/mpc.hpp"
#include "wireharness/planner.hpp"
#include "wireharness/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace wireharness;

namespace {

struct RunConfig {
  std::string board;
  std::string model;
  std::string controller = "koopman_mpc";
  std::uint64_t seed = 0;
  std::string out = "out";
  sim::SimParams sim;
  mpc::MpcConfig mpc;
};

template <class T>
void maybe(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void apply_config_file(const std::string& path, RunConfig& cfg) {
  json j;
  try {
    j = json::parse(io::read_text(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path, 0, e.what());
  }
  try {
    maybe(j, "board", cfg.board);
    maybe(j, "model", cfg.model);
    maybe(j, "controller", cfg.controller);
    maybe(j, "seed", cfg.seed);
    maybe(j, "out", cfg.out);
    if (j.contains("sim")) {
      const json& s = j["sim"];
      maybe(s, "k_wire", cfg.sim.k_wire);
      maybe(s, "f0", cfg.sim.f0);
      maybe(s, "mu", cfg.sim.mu);
      maybe(s, "noise_sigma", cfg.sim.noise_sigma);
      maybe(s, "wrap_radius", cfg.sim.wrap_radius);
    }
    if (j.contains("mpc")) {
      const json& m = j["mpc"];
      maybe(m, "horizon", cfg.mpc.horizon);
      maybe(m, "state_penalty", cfg.mpc.state_penalty);
      maybe(m, "position_scale", cfg.mpc.position_scale);
      maybe(m, "tolerance", cfg.mpc.tolerance);
      maybe(m, "max_iterations", cfg.mpc.max_iterations);
      if (m.contains("q_diag")) {
        const auto q = m["q_diag"].get<std::vector<double>>();
        cfg.mpc.q_diag = Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
      }
      if (m.contains("r_diag")) {
        const auto r = m["r_diag"].get<std::vector<double>>();
        if (r.size() != 3) throw ConfigError("mpc.r_diag needs 3 entries");
        cfg.mpc.r_diag = {r[0], r[1], r[2]};
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

json config_json(const RunConfig& cfg, const std::string& command, const json& options) {
  json j;
  j["command"] = command;
  j["options"] = options;
  j["controller"] = cfg.controller;
  j["seed"] = cfg.seed;
  j["sim"] = {{"k_wire", cfg.sim.k_wire},
              {"f0", cfg.sim.f0},
              {"mu", cfg.sim.mu},
              {"noise_sigma", cfg.sim.noise_sigma},
              {"wrap_radius", cfg.sim.wrap_radius}};
  j["mpc"] = {{"horizon", cfg.mpc.horizon},
              {"q_diag", std::vector<double>(cfg.mpc.q_diag.data(), cfg.mpc.q_diag.data() + cfg.mpc.q_diag.size())},
              {"r_diag", {cfg.mpc.r_diag[0], cfg.mpc.r_diag[1], cfg.mpc.r_diag[2]}},
              {"state_penalty", cfg.mpc.state_penalty},
              {"position_scale", cfg.mpc.position_scale},
              {"tolerance", cfg.mpc.tolerance},
              {"max_iterations", cfg.mpc.max_iterations}};
  return j;
}

// Input file contents enter the hash, so the same paths with different contents differ.
std::string config_hash(const json& effective, const std::vector<std::string>& inputs) {
  std::string blob = effective.dump();
  for (const auto& p : inputs) blob += "\n" + io::fnv1a_hex(io::read_text(p));
  return io::fnv1a_hex(blob);
}

std::vector<fs::path> csv_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("dataset directory '" + dir.string() + "' does not exist");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") out.push_back(e.path());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw ConfigError("no .csv files in '" + dir.string() + "'");
  return out;
}

std::string indexed(const std::string& stem, std::size_t i, const std::string& ext) {
  std::ostringstream s;
  s << stem << '_';
  s.width(3);
  s.fill('0');
  s << i << ext;
  return s.str();
}

executive::Controller make_controller(const RunConfig& cfg) {
  const auto kind = executive::controller_from_string(cfg.controller);
  koopman::KoopmanModel model;
  if (kind != executive::ControllerKind::PiNoTwist) {
    if (cfg.model.empty()) throw ConfigError(cfg.controller + " needs --model");
    model = io::model_from_json(io::read_text(cfg.model), cfg.model);
  }
  return executive::Controller(kind, std::move(model), cfg.mpc);
}

json waypoints_json(const std::vector<planner::Waypoint>& plan) {
  json arr = json::array();
  for (const auto& w : plan) {
    json tags = json::array();
    for (const auto& t : w.tags) tags.push_back({{"role", planner::to_string(t.role)}, {"clamp", t.clamp_id}});
    arr.push_back({{"position", {w.position.x, w.position.y}}, {"f_d", w.f_d}, {"tags", tags}});
  }
  return arr;
}

std::string failure_summary(const std::map<std::string, int>& counts) {
  std::string s;
  for (const auto& [mode, n] : counts) {
    if (!s.empty()) s += ' ';
    s += mode + "(" + std::to_string(n) + ")";
  }
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Koopman-MPC wire harnessing: data collection, fitting, tension tracking and episodes"};
  app.require_subcommand(1);
  app.fallthrough();

  RunConfig cfg;
  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::string> out_flag;
  app.add_option("--seed", seed_flag, "64-bit random seed");
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", out_flag, "output directory");

  int n_traj = 40, horizon = 60;
  auto* collect = app.add_subcommand("collect", "scripted simulator trajectories to CSV");
  collect->add_option("-n,--trajectories", n_traj, "number of trajectories")->capture_default_str();
  collect->add_option("--horizon", horizon, "steps per trajectory")->capture_default_str();

  std::string data_dir, kind = "koopman";
  bool augment = false;
  auto* fit = app.add_subcommand("fit", "fit a lifted (or raw linear) model from trajectory CSVs");
  fit->add_option("--data", data_dir, "directory of trajectory CSVs")->required();
  fit->add_flag("--augment", augment, "apply the 10x rotation augmentation");
  fit->add_option("--kind", kind, "koopman or linear")->check(CLI::IsMember({"koopman", "linear"}))->capture_default_str();

  double f_d = 10.0, stretch = 250.0;
  int track_steps = 60;
  std::string model_flag, controller_flag;
  auto* track = app.add_subcommand("track", "tension-tracking protocol");
  track->add_option("--fd", f_d, "tension target, N")->capture_default_str();
  track->add_option("--stretch", stretch, "stretch along +Y, mm")->capture_default_str();
  track->add_option("--steps", track_steps, "control steps")->capture_default_str();

  std::string board_flag, route_flag;
  auto* plan = app.add_subcommand("plan", "waypoints for a board route");
  plan->add_option("--board", board_flag, "board layout JSON");
  plan->add_option("--route", route_flag, "route name (default: all)");

  int trials = 1;
  auto* run = app.add_subcommand("run", "closed-loop harnessing episodes");
  run->add_option("--board", board_flag, "board layout JSON");
  run->add_option("--route", route_flag, "route name (default: all)");
  run->add_option("--trials", trials, "episodes per route")->capture_default_str();

  for (auto* sc : {track, run}) {
    sc->add_option("--model", model_flag, "model JSON");
    sc->add_option("--controller", controller_flag, "koopman_mpc, linear_mpc or pi_no_twist");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (!config_path.empty()) apply_config_file(config_path, cfg);
    if (seed_flag) cfg.seed = *seed_flag;
    if (out_flag) cfg.out = *out_flag;
    if (!model_flag.empty()) cfg.model = model_flag;
    if (!controller_flag.empty()) cfg.controller = controller_flag;
    if (!board_flag.empty()) cfg.board = board_flag;
    cfg.sim.validate();
    cfg.mpc.validate();
    const fs::path out = cfg.out;

    if (collect->parsed()) {
      if (n_traj < 1 || horizon < 1) throw ConfigError("collect needs --trajectories >= 1 and --horizon >= 1");
      const json eff = config_json(cfg, "collect", {{"trajectories", n_traj}, {"horizon", horizon}});
      const std::string hash = config_hash(eff, {});
      fs::create_directories(out);
      const auto trajs = sim::scripted_collect(n_traj, horizon, cfg.seed, cfg.sim);
      json files = json::array();
      for (std::size_t i = 0; i < trajs.size(); ++i) {
        const std::string name = indexed("traj", i, ".csv");
        io::write_text(out / name, io::trajectory_to_csv(trajs[i], hash));
        files.push_back(name);
      }
      json manifest = {{"command", "collect"}, {"seed", cfg.seed},    {"trajectories", n_traj},
                       {"horizon", horizon},   {"files", files},      {"config_hash", hash}};
      io::write_text(out / "manifest.json", manifest.dump(2) + "\n");
      std::cout << "wrote " << trajs.size() << " trajectories to " << out.string() << "\n";
      return 0;
    }

    if (fit->parsed()) {
      const auto files = csv_files(data_dir);
      std::vector<std::string> inputs;
      std::vector<Trajectory> trajs;
      for (const auto& f : files) {
        inputs.push_back(f.string());
        trajs.push_back(io::trajectory_from_csv(io::read_text(f), f.string()));
      }
      const json eff = config_json(cfg, "fit", {{"augment", augment}, {"kind", kind}});
      const std::string hash = config_hash(eff, inputs);
      const auto data = augment ? koopman::augment_dataset(trajs) : trajs;
      koopman::KoopmanModel model =
          kind == "linear" ? mpc::fit_linear_baseline(data).as_model() : koopman::fit(data, koopman::LiftKind::Poly2);
      model.provenance.seed = cfg.seed;
      model.provenance.transitions = 0;
      for (const auto& t : data) model.provenance.transitions += t.transitions();
      model.provenance.source_trajectories = trajs.size();
      model.provenance.augmentation_factor = augment ? koopman::augmentation_angles().size() : 1;
      fs::create_directories(out);
      const std::string name = kind == "linear" ? "linear_model.json" : "model.json";
      io::write_text(out / name, io::model_to_json(model, hash));
      std::cout << "fitted " << kind << " model on " << model.provenance.source_trajectories *
                                                            model.provenance.augmentation_factor
                << " effective trajectories (" << model.provenance.transitions << " transitions) -> "
                << (out / name).string() << "\n";
      return 0;
    }

    if (track->parsed()) {
      executive::Controller controller = make_controller(cfg);
      std::vector<std::string> inputs;
      if (!cfg.model.empty() && controller.kind() != executive::ControllerKind::PiNoTwist) inputs.push_back(cfg.model);
      const json eff = config_json(cfg, "track", {{"f_d", f_d}, {"stretch", stretch}, {"steps", track_steps}});
      const std::string hash = config_hash(eff, inputs);
      const auto trace =
          executive::run_tracking(controller, cfg.sim, {f_d, stretch, track_steps, cfg.seed});
      fs::create_directories(out);
      const fs::path file = out / ("track_" + cfg.controller + ".csv");
      io::write_text(file, executive::tracking_csv(trace, hash));
      std::cout << cfg.controller << " f_d=" << f_d << " N: final-window mean "
                << executive::steady_state_mean(trace, 5) << " N, error " << executive::steady_state_error(trace, 5)
                << " N -> " << file.string() << "\n";
      return 0;
    }

    if (cfg.board.empty()) throw ConfigError("--board is required");
    const io::BoardLayout board = io::board_from_json(io::read_text(cfg.board), cfg.board);
    std::vector<std::string> routes;
    if (!route_flag.empty()) routes.push_back(route_flag);
    else
      for (const auto& r : board.routes) routes.push_back(r.name);

    if (plan->parsed()) {
      const json eff = config_json(cfg, "plan", {{"routes", routes}});
      const std::string hash = config_hash(eff, {cfg.board});
      json j = {{"config_hash", hash}, {"routes", json::object()}};
      for (const auto& r : routes) {
        const auto wps = planner::plan(board.route_clamps(r), board.connector);
        j["routes"][r] = waypoints_json(wps);
        std::cout << r << ": " << wps.size() << " waypoints\n";
      }
      fs::create_directories(out);
      io::write_text(out / "plan.json", j.dump(2) + "\n");
      return 0;
    }

    // run
    if (trials < 1) throw ConfigError("--trials must be at least 1");
    executive::Controller controller = make_controller(cfg);
    std::vector<std::string> inputs{cfg.board};
    if (controller.kind() != executive::ControllerKind::PiNoTwist) inputs.push_back(cfg.model);
    const json eff = config_json(cfg, "run", {{"routes", routes}, {"trials", trials}});
    const std::string hash = config_hash(eff, inputs);
    fs::create_directories(out);

    json summary = {{"controller", cfg.controller}, {"config_hash", hash}, {"routes", json::array()}};
    json timing = {{"episodes", json::array()}};
    for (const auto& r : routes) {
      const auto clamps = board.route_clamps(r);
      const auto wps = planner::plan(clamps, board.connector);
      fs::create_directories(out / r);
      int successes = 0;
      std::map<std::string, int> failures;
      for (int t = 0; t < trials; ++t) {
        executive::EpisodeOptions opts;
        opts.seed = cfg.seed + static_cast<std::uint64_t>(t);
        const auto t0 = std::chrono::steady_clock::now();
        const auto report = executive::run_episode(board, clamps, wps, controller, cfg.sim, opts);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const std::string log_name = indexed("trial", static_cast<std::size_t>(t), ".csv");
        io::write_text(out / r / log_name, executive::episode_log_csv(report.log, hash));
        io::write_text(out / r / indexed("trial", static_cast<std::size_t>(t), ".json"),
                       executive::episode_report_json(report, (fs::path(r) / log_name).string(), hash));
        timing["episodes"].push_back({{"route", r},
                                      {"trial", t},
                                      {"wall_seconds", wall},
                                      {"max_solve_seconds", report.max_solve_seconds}});
        if (report.outcome == executive::Outcome::Success) ++successes;
        else if (report.outcome == executive::Outcome::Timeout) ++failures["timeout"];
        else ++failures[executive::to_string(report.failure)];
      }
      const std::string line = std::to_string(successes) + "/" + std::to_string(trials) +
                               (failures.empty() ? "" : ", " + failure_summary(failures));
      std::cout << r << " " << cfg.controller << ": " << line << "\n";
      summary["routes"].push_back({{"route", r}, {"successes", successes}, {"trials", trials},
                                   {"failures", failures}, {"table", line}});
    }
    io::write_text(out / "summary.json", summary.dump(2) + "\n");
    io::write_text(out / "timing.json", timing.dump(2) + "\n");
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const BoundsError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
