// Acceptance run: one [PASS]/[FAIL] line per criterion, nonzero exit if any
// criterion fails. Mission criteria take several minutes each.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "surfelnbp/config.hpp"
#include "surfelnbp/k_shortest_paths.hpp"
#include "surfelnbp/mission.hpp"

using namespace surfelnbp;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

const fs::path kOut = fs::temp_directory_path() / "surfelnbp_acceptance";

MissionConfig mission(const std::string& scene, PlannerMode planner, std::uint64_t seed,
                      const std::string& tag) {
  MissionConfig c;
  c.scene = fixtures::scene_path(scene);
  c.planner = planner;
  c.seed = seed;
  c.out = kOut / tag;
  fs::remove_all(c.out);
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome renderer_oracle() {
  const Intrinsics K{60, 60, 31.5, 23.5, 64, 48};
  std::mt19937_64 rng(12);
  double worst = 0, render_s = 0;
  for (int scene = 0; scene < 10; ++scene) {
    SurfelModel m;
    m.insert(oracle::random_surfels(rng, 20));
    const auto t0 = Clock::now();
    const RenderBuffers b = render(m, Pose::identity(), K);
    render_s += seconds_since(t0);
    for (int y = 0; y < K.height; ++y) {
      for (int x = 0; x < K.width; ++x) {
        const oracle::Pixel o = oracle::composite_pixel(m.surfels(), Pose::identity(), K, x, y);
        worst = std::max({worst, oracle::max_abs(b.color(x, y), o.color),
                          std::abs(b.opacity(x, y) - o.opacity), std::abs(b.depth(x, y) - o.depth),
                          oracle::max_abs(b.normal(x, y), o.normal),
                          std::abs(b.confidence(x, y) - o.confidence)});
      }
    }
  }
  return {worst <= 1e-5 && render_s < 1.0,
          fmt("10 scenes, max abs error %.2e, render time %.3f s", worst, render_s)};
}

Outcome covisibility_ground_truth() {
  const auto& fx = fixtures::covis_fixture();
  const Frame src = capture(fx.scene, fx.view(0), fx.K);
  const CovisParams p;
  Outcome o;
  std::string d;
  for (double deg : {0.0, 30.0, 90.0, 180.0}) {
    const double rho = covisibility(fx.model, src, fx.view(deg), fx.K, p).rho;
    const double truth = fixtures::ray_cast_covisibility(fx.scene, src, fx.view(deg), fx.K, p);
    o.pass = o.pass && std::abs(rho - truth) <= 0.05;
    if (deg == 0.0) o.pass = o.pass && rho >= 0.99;
    d += fmt("%g deg rho %.3f / ray %.3f; ", deg, rho, truth);
  }
  const double miss =
      covisibility(fx.model, src, look_at(Vec3(0, 0, -0.45), Vec3(0, 0, -1)), fx.K, p).rho;
  o.pass = o.pass && miss == 0.0;
  o.detail = d + fmt("frustum miss %g", miss);
  return o;
}

Outcome yen_exhaustive() {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(0, 1);
  int agree = 0;
  double yen_s = 0;
  for (int t = 0; t < 20; ++t) {
    const int n = 4 + t % 5;
    WeightedGraph g(n);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (U(rng) < 0.6) g.add_edge(i, j, 0.1 + U(rng));
      }
    }
    const auto all = oracle::all_simple_paths(g, 0, n - 1);
    const auto t0 = Clock::now();
    const auto got = k_shortest_paths(g, 0, n - 1, 5);
    yen_s += seconds_since(t0);
    bool same = got.size() == std::min<std::size_t>(5, all.size());
    for (std::size_t i = 0; same && i < got.size(); ++i) {
      same = got[i].nodes == all[i].nodes && std::abs(got[i].weight - all[i].weight) < 1e-9;
    }
    agree += same;
  }
  return {agree == 20 && yen_s < 1.0,
          fmt("%d/20 graphs match enumeration, Yen time %.4f s", agree, yen_s)};
}

Outcome gradients() {
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto c = fixtures::gradient_config(seed);
    const auto a = analytic_gradient(c.model, c.frames);
    const auto f = finite_difference_gradient(c.model, c.frames, {}, {}, 1e-4,
                                              ParamGroups::appearance());
    worst = std::max(worst, fixtures::appearance_relative_error(a, f));
  }
  const auto frames = fixtures::cube_views();
  SurfelModel m = fixtures::scrambled_cube_model(frames, 7, 3);
  RefineParams p;
  p.iterations = 50;
  p.mode = GradientMode::kFiniteDifference;
  p.groups = ParamGroups{};
  const RefineTrace t = refine(m, frames, p);
  const double drop = 1.0 - t.losses.back().total / t.losses.front().total;
  return {worst <= 1e-2 && drop >= 0.3,
          fmt("max relative gradient error %.2e over 20 configs; FD refine loss %.4f -> %.4f "
              "(%.1f%% lower)",
              worst, t.losses.front().total, t.losses.back().total, 100 * drop)};
}

Outcome update_mask() {
  const Intrinsics K{100, 100, 31.5, 23.5, 64, 48};
  const Frame f = capture(Scene(primitives::icosphere(3, 0.3)), look_at(Vec3(0, 0, -1), Vec3::Zero()), K);
  // a reconstruction whose rendering is the observation itself
  RenderBuffers perfect;
  perfect.color = f.color;
  perfect.depth = f.depth;
  perfect.opacity = ImageD(K.width, K.height, 0.0);
  perfect.normal = ImageVec3(K.width, K.height, Vec3::Zero());
  for (std::size_t i = 0; i < f.depth.size(); ++i) {
    if (!f.mask[i]) continue;
    perfect.opacity[i] = 1.0;
    perfect.normal[i] = Vec3(0, 0, -1);
  }
  perfect.confidence = perfect.opacity;
  const std::size_t spawned = spawn_surfels(f, compute_update_mask(f, perfect)).surfels.size();
  const UpdateMask empty = compute_update_mask(f, render(SurfelModel{}, f.pose, K));
  std::size_t omega = 0, op = 0;
  for (std::size_t i = 0; i < empty.region.size(); ++i) {
    omega += empty.region[i] != 0;
    op += empty.region[i] && empty.op[i];
  }
  const double frac = omega ? double(op) / omega : 0.0;
  return {spawned == 0 && omega > 0 && frac >= 0.99,
          fmt("perfect model spawns %zu; empty model m_op covers %.1f%% of %zu valid pixels",
              spawned, 100 * frac, omega)};
}

Outcome determinism() {
  MissionConfig a = mission("sphere", PlannerMode::kNbp, 7, "det_a");
  a.views = 10;
  MissionConfig b = a;
  b.out = kOut / "det_b";
  fs::remove_all(b.out);
  const MissionResult ra = run_mission(a), rb = run_mission(b);
  const bool metrics = metrics_json(ra, false) == metrics_json(rb, false);
  const bool traj = slurp(a.out / "trajectory.jsonl") == slurp(b.out / "trajectory.jsonl");
  return {metrics && traj, fmt("metrics %s, trajectories %s (%zu views)",
                               metrics ? "identical" : "DIFFER", traj ? "identical" : "DIFFER",
                               ra.trajectory.size())};
}

struct Run {
  MissionResult r;
  double seconds;
};

Run timed(const MissionConfig& c) {
  const auto t0 = Clock::now();
  MissionResult r = run_mission(c);
  return {std::move(r), seconds_since(t0)};
}

const char* kScenes[] = {"sphere", "cube", "torus"};

Outcome nbp_completion() {
  Outcome o;
  for (const char* s : kScenes) {
    const Run run = timed(mission(s, PlannerMode::kNbp, 1, std::string("nbp_") + s));
    int reached = -1;
    for (const auto& v : run.r.per_view) {
      if (v.completion_ratio >= 90.0) {
        reached = v.view + 1;
        break;
      }
    }
    o.pass = o.pass && reached > 0 && reached <= 30 && run.seconds <= 600;
    o.detail += fmt("%s: CR %.1f%% after %zu views (90%% at view %d), %.0f s; ", s,
                    run.r.final.completion_ratio, run.r.trajectory.size(), reached, run.seconds);
  }
  return o;
}

/// Both planners fly the full 30-view budget (uncertainty termination off),
/// so movement is compared at equal view counts.
Outcome nbp_vs_nbv() {
  Outcome o;
  double mc_nbp = 0, mc_nbv = 0;
  for (const char* s : kScenes) {
    MissionConfig a = mission(s, PlannerMode::kNbp, 1, std::string("fixed_nbp_") + s);
    MissionConfig b = mission(s, PlannerMode::kNbv, 1, std::string("fixed_nbv_") + s);
    a.plan.tau_stop = b.plan.tau_stop = 0.0;
    const MissionResult ra = run_mission(a), rb = run_mission(b);
    mc_nbp += ra.movement;
    mc_nbv += rb.movement;
    const bool ok = ra.movement <= 0.5 * rb.movement &&
                    std::abs(ra.final.completion_ratio - rb.final.completion_ratio) <= 3.0;
    o.pass = o.pass && ok;
    o.detail += fmt("%s: MC %.2f vs %.2f m, CR %.1f vs %.1f%%; ", s, ra.movement, rb.movement,
                    ra.final.completion_ratio, rb.final.completion_ratio);
  }
  o.detail += fmt("MC ratio overall %.2f", mc_nbp / mc_nbv);
  return o;
}

Outcome uncertainty_ablation() {
  double full = 0, opacity = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    for (const Ablation ab : {Ablation::kNone, Ablation::kOpacityOnly}) {
      MissionConfig c = mission("torus", PlannerMode::kNbp, seed,
                                "torus_" + to_string(ab) + "_" + std::to_string(seed));
      c.ablation = ab;
      const double cr = run_mission(c).final.completion_ratio / 3.0;
      (ab == Ablation::kNone ? full : opacity) += cr;
    }
  }
  return {full >= opacity, fmt("torus mean CR full %.2f%% vs opacity-only %.2f%%", full, opacity)};
}

Outcome uncertainty_map_timing() {
  // a fused sphere, cut to exactly 5k surfels
  const Scene scene = load_scene(fixtures::scene_path("sphere"));
  const Intrinsics K = Intrinsics::from_vertical_fov(160, 120, 65.0);
  const Vec3 c = scene.bounds().center();
  const double r = 0.5 * scene.bounds().diagonal().norm() + 0.2;
  std::vector<Surfel> all;
  for (int i = 0; all.size() < 5000 && i < 64; ++i) {
    const double az = i * 2.399963, el = 0.9 - 1.6 * (i % 8) / 7.0;
    const Vec3 eye = c + r * Vec3(std::cos(az) * std::cos(el), std::sin(az) * std::cos(el), std::sin(el));
    const Frame f = capture(scene, look_at(eye, c), K, {}, i);
    SurfelModel so_far;
    so_far.insert(all);
    auto s = spawn_surfels(f, compute_update_mask(f, render(so_far, f.pose, K))).surfels;
    all.insert(all.end(), s.begin(), s.end());
  }
  all.resize(std::min<std::size_t>(all.size(), 5000));
  SurfelModel m;
  m.insert(all);
  const Pose cam = look_at(c + r * Vec3(0.6, -0.6, 0.5).normalized(), c);
  std::vector<double> ms;
  for (int rep = 0; rep < 5; ++rep) {
    const auto t0 = Clock::now();
    const ImageD u = uncertainty_map(m, cam, K, UncertaintyWeights{});
    ms.push_back(1e3 * seconds_since(t0));
  }
  std::sort(ms.begin(), ms.end());
  return {m.size() == 5000 && ms[2] <= 200.0,
          fmt("%zu surfels at 160x120: median %.1f ms over 5 runs", m.size(), ms[2])};
}

}  // namespace

int main() {
  fs::create_directories(kOut);
  // ctest hides the output of passing tests; keep a copy next to the binary
  std::ofstream report("acceptance_report.txt");
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"C1 renderer oracle", renderer_oracle},
      {"C2 covisibility", covisibility_ground_truth},
      {"C3 k-shortest paths", yen_exhaustive},
      {"C4 gradients and FD refine", gradients},
      {"C5 update mask", update_mask},
      {"C6 mission determinism", determinism},
      {"C7 NBP completion", nbp_completion},
      {"C8 NBP vs NBV movement", nbp_vs_nbv},
      {"C9 uncertainty ablation", uncertainty_ablation},
      {"C10 uncertainty map timing", uncertainty_map_timing},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    const std::string line =
        std::string("[") + (o.pass ? "PASS" : "FAIL") + "] " + name + ": " + o.detail;
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    report << line << '\n' << std::flush;
  }
  const std::string summary = fmt("%d/%zu criteria passed", static_cast<int>(criteria.size()) - failed,
                                  criteria.size());
  std::printf("%s\n", summary.c_str());
  report << summary << '\n';
  return failed ? 1 : 0;
}
