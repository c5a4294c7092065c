#include "surfelnbp/config.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "surfelnbp/errors.hpp"

namespace surfelnbp {

PlannerMode parse_planner_mode(const std::string& s) {
  if (s == "nbp") return PlannerMode::kNbp;
  if (s == "nbv") return PlannerMode::kNbv;
  if (s == "circle") return PlannerMode::kCircle;
  if (s == "random") return PlannerMode::kRandom;
  throw ConfigError("unknown planner '" + s + "' (nbp|nbv|circle|random)");
}

std::string to_string(PlannerMode m) {
  switch (m) {
    case PlannerMode::kNbp: return "nbp";
    case PlannerMode::kNbv: return "nbv";
    case PlannerMode::kCircle: return "circle";
    case PlannerMode::kRandom: return "random";
  }
  return "nbp";
}

EvalRegion parse_eval_region(const std::string& s) {
  if (s == "carved") return EvalRegion::kCarved;
  if (s == "shell") return EvalRegion::kShell;
  throw ConfigError("unknown evaluation region '" + s + "' (carved|shell)");
}

std::string to_string(EvalRegion r) { return r == EvalRegion::kCarved ? "carved" : "shell"; }

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError(key + ": '" + v + "' is not a number");
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConfigError(key + ": '" + v + "' is not an integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": '" + v + "' is not a boolean");
}

class Builder {
 public:
  explicit Builder(std::vector<ConfigRegistry::Entry>& e) : e_(e) {}

  void real(const std::string& key, double* p, double lo, double hi, const std::string& help) {
    e_.push_back({key, help,
                  [=](const std::string& v) {
                    const double x = parse_double(key, v);
                    if (!(x >= lo && x <= hi)) {
                      throw ConfigError(key + " = " + v + " outside [" + format_double(lo) +
                                        ", " + format_double(hi) + "]");
                    }
                    *p = x;
                  },
                  [=] { return format_double(*p); }});
  }

  template <typename Int>
  void integer(const std::string& key, Int* p, long long lo, long long hi,
               const std::string& help) {
    e_.push_back({key, help,
                  [=](const std::string& v) {
                    const long long x = parse_int(key, v);
                    if (x < lo || x > hi) {
                      throw ConfigError(key + " = " + v + " outside [" + std::to_string(lo) +
                                        ", " + std::to_string(hi) + "]");
                    }
                    *p = static_cast<Int>(x);
                  },
                  [=] { return std::to_string(*p); }});
  }

  void flag(const std::string& key, bool* p, const std::string& help) {
    e_.push_back({key, help, [=](const std::string& v) { *p = parse_bool(key, v); },
                  [=] { return std::string(*p ? "true" : "false"); }});
  }

  void path(const std::string& key, std::filesystem::path* p, const std::string& help) {
    e_.push_back({key, help, [=](const std::string& v) { *p = v; },
                  [=] { return p->string(); }});
  }

  void custom(const std::string& key, std::function<void(const std::string&)> set,
              std::function<std::string()> get, const std::string& help) {
    e_.push_back({key, help, std::move(set), std::move(get)});
  }

 private:
  std::vector<ConfigRegistry::Entry>& e_;
};

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr long long kBig = 1LL << 40;

}  // namespace

ConfigRegistry::ConfigRegistry(MissionConfig& c) {
  Builder b(entries_);
  b.path("mission.scene", &c.scene, "scene manifest");
  b.custom(
      "mission.planner", [&c](const std::string& v) { c.planner = parse_planner_mode(v); },
      [&c] { return to_string(c.planner); }, "nbp | nbv | circle | random");
  b.integer("mission.views", &c.views, 1, 10000, "view budget");
  b.custom(
      "mission.seed",
      [&c](const std::string& v) {
        const long long x = parse_int("mission.seed", v);
        if (x < 0) throw ConfigError("mission.seed must be non-negative");
        c.seed = static_cast<std::uint64_t>(x);
      },
      [&c] { return std::to_string(c.seed); }, "random seed");
  b.path("mission.out", &c.out, "output directory");
  b.flag("mission.dump_buffers", &c.dump_buffers, "write per-view render buffers");
  b.flag("mission.log_losses", &c.log_losses, "write the refinement loss trace");
  b.custom(
      "mission.ablation",
      [&c](const std::string& v) {
        try {
          c.ablation = parse_ablation(v);
        } catch (const InvalidArgument& e) {
          throw ConfigError(e.what());
        }
      },
      [&c] { return to_string(c.ablation); },
      "none | no-oa | no-bf | no-dyn | opacity-only | confidence-only");
  b.flag("mission.per_view_metrics", &c.per_view_metrics, "evaluate metrics after every view");

  b.integer("camera.width", &c.width, 8, 4096, "capture width, pixels");
  b.integer("camera.height", &c.height, 8, 4096, "capture height, pixels");
  b.real("camera.vfov", &c.vfov_deg, 1.0, 170.0, "vertical field of view, degrees");
  b.integer("camera.planner_width", &c.planner_width, 8, 4096, "uncertainty map width");
  b.integer("camera.planner_height", &c.planner_height, 8, 4096, "uncertainty map height");

  b.real("sensor.near", &c.sensor.near, 0.0, 100.0, "meters");
  b.real("sensor.far", &c.sensor.far, 0.0, 1000.0, "meters");
  b.real("sensor.noise_sigma0", &c.sensor.noise_sigma0, 0.0, 1.0, "depth noise, meters");
  b.real("sensor.noise_sigma1", &c.sensor.noise_sigma1, 0.0, 1.0, "depth noise per m^2");

  b.real("shell.standoff", &c.standoff, 0.0, 10.0, "meters beyond the bbox half-diagonal");
  b.real("shell.init_elevation", &c.init_elevation, -90.0, 90.0, "degrees");
  b.real("shell.init_azimuth", &c.init_azimuth, -360.0, 360.0, "degrees");

  b.real("fusion.opacity_threshold", &c.update.opacity, 0.0, 1.0, "tau_O");
  b.real("fusion.color_mse", &c.update.color_mse, 0.0, 1.0, "tau_C");
  b.real("fusion.depth_factor", &c.update.depth_factor, 0.0, 100.0, "lambda on MDE");
  b.real("fusion.min_depth_error", &c.update.min_depth_error, 0.0, 1.0, "meters");
  b.integer("fusion.spawn_stride", &c.spawn.stride, 1, 64, "pixel stride of spawning");
  b.integer("fusion.k_nn", &c.spawn.k_nn, 1, 64, "neighbors for the initial scale");
  b.real("fusion.initial_opacity", &c.spawn.initial_opacity, 0.0, 1.0, "o_init");
  b.real("fusion.max_scale_factor", &c.spawn.max_scale_factor, 0.0, 1e3,
         "scale cap in stride footprints");

  b.integer("refine.iterations", &c.refine.iterations, 0, 100000, "per new frame");
  b.custom(
      "refine.gradient",
      [&c](const std::string& v) {
        if (v == "analytic") c.refine.mode = GradientMode::kAnalytic;
        else if (v == "fd") c.refine.mode = GradientMode::kFiniteDifference;
        else throw ConfigError("refine.gradient: analytic | fd");
      },
      [&c] { return std::string(c.refine.mode == GradientMode::kAnalytic ? "analytic" : "fd"); },
      "analytic (opacity, color) | fd (all groups)");
  b.custom(
      "refine.optimizer",
      [&c](const std::string& v) {
        if (v == "adam") c.refine.optimizer = Optimizer::kAdam;
        else if (v == "gd") c.refine.optimizer = Optimizer::kGradientDescent;
        else throw ConfigError("refine.optimizer: adam | gd");
      },
      [&c] { return std::string(c.refine.optimizer == Optimizer::kAdam ? "adam" : "gd"); },
      "adam | gd");
  b.custom(
      "refine.groups",
      [&c](const std::string& v) {
        ParamGroups g{false, false, false, false, false};
        std::istringstream in(v);
        std::string name;
        while (std::getline(in, name, ',')) {
          name = trim(name);
          if (name == "center") g.center = true;
          else if (name == "rotation") g.rotation = true;
          else if (name == "scale") g.scale = true;
          else if (name == "opacity") g.opacity = true;
          else if (name == "color") g.color = true;
          else throw ConfigError("refine.groups: unknown group '" + name + "'");
        }
        c.refine.groups = g;
      },
      [&c] {
        const ParamGroups& g = c.refine.groups;
        std::string out;
        for (auto [on, name] : {std::pair{g.center, "center"}, {g.rotation, "rotation"},
                                {g.scale, "scale"}, {g.opacity, "opacity"}, {g.color, "color"}}) {
          if (!on) continue;
          if (!out.empty()) out += ',';
          out += name;
        }
        return out;
      },
      "comma list of center, rotation, scale, opacity, color");
  b.real("refine.step_center", &c.refine.steps.center, 0.0, 1.0, "meters");
  b.real("refine.step_rotation", &c.refine.steps.rotation, 0.0, 1.0, "");
  b.real("refine.step_scale", &c.refine.steps.scale, 0.0, 1.0, "meters");
  b.real("refine.step_opacity", &c.refine.steps.opacity, 0.0, 1.0, "");
  b.real("refine.step_color", &c.refine.steps.color, 0.0, 1.0, "");
  b.real("refine.fd_step", &c.refine.fd_step, 1e-12, 1.0, "finite-difference step");
  b.real("refine.divergence_factor", &c.refine.divergence_factor, 1.0, kInf, "");
  b.integer("refine.local_views", &c.local_views, 0, 1000, "top-k covisible views");
  b.integer("refine.global_views", &c.global_views, 0, 1000, "sampled global views");

  b.real("loss.l1", &c.refine.weights.l1, 0.0, kInf, "lambda_1");
  b.real("loss.dssim", &c.refine.weights.dssim, 0.0, kInf, "lambda_2");
  b.real("loss.depth", &c.refine.weights.depth, 0.0, kInf, "lambda_d");
  b.real("loss.normal", &c.refine.weights.normal, 0.0, kInf, "lambda_n");
  b.real("loss.mask", &c.refine.weights.mask, 0.0, kInf, "lambda_m");
  b.real("loss.opacity", &c.refine.weights.opacity, 0.0, kInf, "lambda_o");

  b.integer("covis.samples", &c.covis.samples, 1, kBig, "|S_i|");
  b.real("covis.depth_tolerance", &c.covis.depth_tolerance, 0.0, 10.0, "tau_d, meters");

  b.real("confidence.c0", &c.confidence.c0, -1.0, 1.0, "");
  b.real("confidence.tau", &c.confidence.tau, 1e-9, 100.0, "");
  b.real("confidence.kappa_sat", &c.confidence.kappa_sat, 1e-9, kInf, "");
  b.integer("confidence.max_views", &c.confidence.max_views, 1, kBig, "");
  b.real("confidence.d_max_factor", &c.d_max_factor, 1e-9, 1e3, "d_max / shell radius");

  b.real("weights.tolerance", &c.weight_tolerance, 0.0, 1.0, "relative change of mean V");
  b.integer("weights.window", &c.weight_window, 1, 1000, "planning cycles compared");

  b.integer("planner.candidates", &c.plan.candidates, 1, 100000, "Vogel candidates");
  b.integer("planner.k", &c.plan.k, 1, 1000, "k-NN graph degree");
  b.integer("planner.paths", &c.plan.paths, 1, 1000, "M");
  b.real("planner.lambda", &c.plan.lambda, 0.0, 1.0, "reward / length trade-off");
  b.real("planner.alpha", &c.plan.alpha, 1e-12, kInf, "edge weight alpha");
  b.real("planner.beta", &c.plan.beta, 0.0, kInf, "edge weight beta");
  b.real("planner.prune_factor", &c.plan.prune_factor, 0.0, 10.0, "epsilon_prune / radius");
  b.real("planner.tau_stop", &c.plan.tau_stop, 0.0, kInf, "termination threshold");
  b.flag("planner.receding", &c.receding, "execute only the first path step");
  b.real("planner.circle_elevation", &c.circle_elevation, -90.0, 90.0, "degrees");
  b.custom(
      "planner.region", [&c](const std::string& v) { c.region = parse_eval_region(v); },
      [&c] { return to_string(c.region); }, "carved|shell");
  b.integer("planner.carving_resolution", &c.carving_resolution, 4, 512,
            "occupancy cells along the longest scene side");

  b.integer("metrics.gt_samples", &c.gt_samples, 1000, kBig, "ground-truth surface samples");
  b.real("metrics.cr_threshold", &c.cr_threshold, 0.0, 10.0, "meters");
  b.real("metrics.f_threshold", &c.f_threshold, 0.0, 10.0, "meters");
  b.integer("metrics.observable_views", &c.observability.viewpoints, 1, 100000,
            "reference viewpoints for the observable surface");
  b.real("metrics.max_incidence", &c.observability.max_incidence_deg, 0.0, 90.0, "degrees");
}

const ConfigRegistry::Entry& ConfigRegistry::find(const std::string& key) const {
  for (const auto& e : entries_) {
    if (e.key == key) return e;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

bool ConfigRegistry::contains(const std::string& key) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.key == key; });
}

void ConfigRegistry::set(const std::string& key, const std::string& value) {
  find(key).set(trim(value));
}

std::string ConfigRegistry::get(const std::string& key) const { return find(key).get(); }

void ConfigRegistry::load_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(n) + ": expected 'key = value'");
    }
    try {
      set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError("config line " + std::to_string(n) + ": " + e.what());
    }
  }
}

void ConfigRegistry::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  load_text(ss.str());
}

std::string ConfigRegistry::dump() const {
  std::ostringstream os;
  for (const auto& e : entries_) os << e.key << " = " << e.get() << '\n';
  return os.str();
}

void validate(const MissionConfig& c) {
  if (c.scene.empty()) throw ConfigError("mission.scene is required");
  if (!(c.sensor.far > c.sensor.near)) throw ConfigError("sensor.far must exceed sensor.near");
  if (c.plan.k < 1) throw ConfigError("planner.k must be >= 1");
}

}  // namespace surfelnbp
