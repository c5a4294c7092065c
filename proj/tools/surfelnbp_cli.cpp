// surfelnbp command-line front end: run | metrics | plan-once.
#include <filesystem>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "surfelnbp/config.hpp"
#include "surfelnbp/errors.hpp"
#include "surfelnbp/mission.hpp"
#include "surfelnbp/surfel_model.hpp"

namespace fs = std::filesystem;
using namespace surfelnbp;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

/// Every registry key becomes `--section.key`; values are applied after the
/// config file so the command line wins.
struct MirroredOptions {
  std::vector<std::pair<std::string, CLI::Option*>> options;
  std::map<std::string, std::string> values;

  void attach(CLI::App& app, const ConfigRegistry& reg) {
    for (const auto& e : reg.entries()) {
      auto* opt = app.add_option("--" + e.key, values[e.key], e.help)->group("Config keys");
      options.emplace_back(e.key, opt);
    }
  }
  void apply(ConfigRegistry& reg) const {
    for (const auto& [key, opt] : options) {
      if (opt->count() > 0) reg.set(key, values.at(key));
    }
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active surfel reconstruction with next-best-path planning"};
  app.require_subcommand(1);

  MissionConfig cfg;
  ConfigRegistry reg(cfg);

  // run
  auto* run = app.add_subcommand("run", "run a closed-loop scanning mission");
  std::string config_file, scene, planner, ablation, out;
  int views = 0;
  long long seed = -1;
  bool dump = false, log_losses = false;
  run->add_option("--config", config_file, "key = value config file");
  run->add_option("--scene", scene, "scene manifest");
  run->add_option("--planner", planner, "nbp | nbv | circle | random");
  run->add_option("--views", views, "view budget");
  run->add_option("--seed", seed, "random seed");
  run->add_option("--out", out, "output directory");
  run->add_flag("--dump-buffers", dump, "write render buffers per view");
  run->add_flag("--log-losses", log_losses, "write the refinement loss trace");
  run->add_option("--ablation", ablation,
                  "no-oa | no-bf | no-dyn | opacity-only | confidence-only");
  MirroredOptions run_keys;
  run_keys.attach(*run, reg);

  // metrics
  auto* metrics = app.add_subcommand("metrics", "evaluate a surfel model against a scene");
  std::string model_path, metrics_scene, metrics_config;
  metrics->add_option("--model", model_path, "surfel PLY")->required();
  metrics->add_option("--scene", metrics_scene, "scene manifest")->required();
  metrics->add_option("--config", metrics_config, "key = value config file");
  MirroredOptions metrics_keys;
  metrics_keys.attach(*metrics, reg);

  // plan-once
  auto* once = app.add_subcommand("plan-once", "run one planning cycle on a saved mission");
  std::string state_dir;
  once->add_option("--state", state_dir, "mission output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) {
      if (!config_file.empty()) reg.load_file(config_file);
      if (!scene.empty()) reg.set("mission.scene", scene);
      if (!planner.empty()) reg.set("mission.planner", planner);
      if (views > 0) reg.set("mission.views", std::to_string(views));
      if (run->count("--views") && views <= 0) throw ConfigError("--views must be >= 1");
      if (seed >= 0) reg.set("mission.seed", std::to_string(seed));
      if (run->count("--seed") && seed < 0) throw ConfigError("--seed must be non-negative");
      if (!out.empty()) reg.set("mission.out", out);
      if (dump) reg.set("mission.dump_buffers", "true");
      if (log_losses) reg.set("mission.log_losses", "true");
      if (!ablation.empty()) reg.set("mission.ablation", ablation);
      run_keys.apply(reg);
      validate(cfg);
      const MissionResult r = run_mission(cfg);
      std::cout << "views " << r.trajectory.size() << "  CR " << r.final.completion_ratio
                << "%  CD " << r.final.chamfer << " mm  F " << r.final.fscore << "  MC "
                << r.movement << " m  (" << r.termination << ")\n"
                << "artifacts in " << cfg.out.string() << '\n';
    } else if (metrics->parsed()) {
      if (!metrics_config.empty()) reg.load_file(metrics_config);
      metrics_keys.apply(reg);
      const SurfelModel model = import_ply(model_path);
      const Scene s = load_scene(metrics_scene);
      const GroundTruth gt = make_ground_truth(s, cfg);
      std::cout << view_metrics_json(geometry_metrics(gt, model, cfg)) << '\n';
    } else if (once->parsed()) {
      const fs::path dir = state_dir;
      if (!fs::exists(dir / "state.json")) throw MissionAborted("load", "no saved mission in " + dir.string());
      reg.load_file(dir / "config.txt");
      PlannerState state = read_state(dir / "state.json");
      const SurfelModel model = import_ply(dir / "model.ply");
      if (model.empty()) throw EmptyModel("saved model is empty");
      const int cycle = state.cycle;
      std::cout << plan_record(plan_cycle(model, state, cfg), cycle) << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
