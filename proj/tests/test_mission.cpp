#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "support/fixtures.hpp"
#include "surfelnbp/config.hpp"
#include "surfelnbp/errors.hpp"
#include "surfelnbp/mission.hpp"

using namespace surfelnbp;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("surfelnbp_test_" + name);
  fs::remove_all(p);
  return p;
}

/// The sphere mission at a resolution small enough for unit tests.
MissionConfig small_mission(const std::string& name, int views) {
  MissionConfig c;
  c.scene = fixtures::scene_path("sphere");
  c.views = views;
  c.seed = 3;
  c.out = scratch(name);
  c.width = c.planner_width = 48;
  c.height = c.planner_height = 36;
  c.gt_samples = 2000;
  c.observability.viewpoints = 32;
  c.plan.candidates = 16;
  c.carving_resolution = 16;
  c.refine.iterations = 2;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(const std::string& args) {
  const std::string cmd = std::string(SURFELNBP_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, Defaults) {
  const MissionConfig c;
  EXPECT_EQ(c.views, 30);
  EXPECT_EQ(c.width, 160);
  EXPECT_EQ(c.height, 120);
  EXPECT_EQ(c.covis.samples, 1600u);
  EXPECT_EQ(c.local_views, 9);
  EXPECT_EQ(c.refine.iterations, 10);
  EXPECT_EQ(c.refine.weights.l1, 0.8);
  EXPECT_EQ(c.refine.weights.dssim, 0.2);
  EXPECT_EQ(c.refine.weights.depth, 0.8);
  EXPECT_EQ(c.refine.weights.normal, 0.1);
  EXPECT_EQ(c.refine.weights.mask, 0.1);
  EXPECT_EQ(c.refine.weights.opacity, 0.01);
  EXPECT_EQ(c.update.opacity, 0.5);
  EXPECT_EQ(c.update.color_mse, 0.25);
  EXPECT_EQ(c.update.depth_factor, 2.0);
  EXPECT_EQ(c.confidence.c0, 0.5);
  EXPECT_EQ(c.confidence.tau, 0.1);
  EXPECT_EQ(c.sensor.near, 0.1);
  EXPECT_EQ(c.sensor.far, 3.0);
  EXPECT_EQ(c.f_threshold, 0.005);
}

TEST(Config, SetGetAndDumpRoundTrip) {
  MissionConfig a;
  ConfigRegistry ra(a);
  ra.set("planner.lambda", "0.25");
  ra.set("mission.planner", "circle");
  ra.set("refine.groups", "center, color");
  ra.set("mission.ablation", "no-bf");
  EXPECT_EQ(a.plan.lambda, 0.25);
  EXPECT_EQ(a.planner, PlannerMode::kCircle);
  EXPECT_TRUE(a.refine.groups.center && a.refine.groups.color);
  EXPECT_FALSE(a.refine.groups.opacity);
  EXPECT_EQ(ra.get("refine.groups"), "center,color");
  MissionConfig b;
  ConfigRegistry rb(b);
  rb.load_text(ra.dump());
  EXPECT_EQ(rb.dump(), ra.dump());
  EXPECT_EQ(b.ablation, Ablation::kNoBackface);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  MissionConfig c;
  ConfigRegistry r(c);
  EXPECT_THROW(r.set("planner.lamda", "0.5"), ConfigError);
  EXPECT_THROW(r.set("planner.lambda", "1.5"), ConfigError);
  EXPECT_THROW(r.set("planner.lambda", "abc"), ConfigError);
  EXPECT_THROW(r.set("mission.views", "0"), ConfigError);
  EXPECT_THROW(r.set("mission.planner", "astar"), ConfigError);
  EXPECT_THROW(r.set("refine.groups", "center,mass"), ConfigError);
  EXPECT_THROW(r.load_text("# comment\nplanner.k 4\n"), ConfigError);
  r.load_text("# comment\n\nplanner.k = 6\n");
  EXPECT_EQ(c.plan.k, 6);
}

TEST(Config, CrossFieldValidation) {
  MissionConfig c;
  EXPECT_THROW(validate(c), ConfigError);  // no scene
  c.scene = "x.scene";
  validate(c);
  c.sensor.far = 0.05;
  EXPECT_THROW(validate(c), ConfigError);
}

TEST(Mission, SingleViewBudget) {
  const MissionConfig c = small_mission("budget1", 1);
  const MissionResult r = run_mission(c);
  EXPECT_EQ(r.trajectory.size(), 1u);
  ASSERT_EQ(r.per_view.size(), 1u);
  EXPECT_GT(r.final.surfels, 0u);
  EXPECT_EQ(r.final.surfels, r.per_view[0].spawned);
  EXPECT_EQ(r.movement, 0.0);
  EXPECT_EQ(r.termination, "budget");
  for (const char* f : {"model.ply", "trajectory.jsonl", "planner_log.jsonl", "metrics.json",
                        "config.txt", "state.json"}) {
    EXPECT_TRUE(fs::exists(c.out / f)) << f;
  }
}

TEST(Mission, DeterministicAndConsistent) {
  const MissionConfig a = small_mission("det_a", 3);
  MissionConfig b = a;
  b.out = scratch("det_b");
  const MissionResult ra = run_mission(a), rb = run_mission(b);
  EXPECT_EQ(metrics_json(ra, false), metrics_json(rb, false));
  EXPECT_EQ(slurp(a.out / "trajectory.jsonl"), slurp(b.out / "trajectory.jsonl"));
  EXPECT_EQ(slurp(a.out / "model.ply"), slurp(b.out / "model.ply"));
  // MC is the chain length of the executed poses; CR never drops
  double mc = 0;
  for (std::size_t i = 1; i < ra.trajectory.size(); ++i) {
    mc += (ra.trajectory[i].translation - ra.trajectory[i - 1].translation).norm();
  }
  EXPECT_NEAR(ra.movement, mc, 1e-12);
  for (std::size_t i = 1; i < ra.per_view.size(); ++i) {
    EXPECT_GE(ra.per_view[i].movement, ra.per_view[i - 1].movement);
  }
}

TEST(Mission, StateRoundTrip) {
  PlannerState s;
  s.current = look_at(Vec3(0.3, 0.1, 0.2), Vec3::Zero());
  s.visited = {{0.1, 0.2, 0.3}, {-0.4, 0.5, 0.6}};
  s.cycle_visibility = {0.9, 0.51234567890123};
  s.views_taken = 4;
  s.cycle = 2;
  Eigen::AlignedBox3d box(Vec3(-0.1, -0.1, -0.1), Vec3(0.1, 0.1, 0.1));
  s.carving = SpaceCarving(box, 8);
  const fs::path p = scratch("state.json");
  write_state(s, p);
  const PlannerState r = read_state(p);
  EXPECT_LT((r.current.translation - s.current.translation).norm(), 1e-12);
  EXPECT_LT(r.current.rotation.angularDistance(s.current.rotation), 1e-9);
  EXPECT_EQ(r.visited, s.visited);
  EXPECT_EQ(r.cycle_visibility, s.cycle_visibility);
  EXPECT_EQ(r.views_taken, 4);
  EXPECT_EQ(r.cycle, 2);
  EXPECT_EQ(r.carving.runs(), s.carving.runs());
  EXPECT_EQ(r.carving.dims(), s.carving.dims());
}

TEST(Cli, ExitCodes) {
  const fs::path out = scratch("cli");
  const std::string small =
      " --camera.width 48 --camera.height 36 --camera.planner_width 48"
      " --camera.planner_height 36 --metrics.gt_samples 2000 --metrics.observable_views 32"
      " --planner.candidates 16 --planner.carving_resolution 16 --refine.iterations 1";
  const std::string scene = fixtures::scene_path("sphere").string();
  EXPECT_EQ(cli("run --scene " + scene + " --views 2 --out " + out.string() + small), 0);
  EXPECT_TRUE(fs::exists(out / "model.ply"));
  EXPECT_EQ(cli("plan-once --state " + out.string()), 0);
  EXPECT_EQ(cli("metrics --model " + (out / "model.ply").string() + " --scene " + scene +
                " --metrics.gt_samples 2000"),
            0);
  // config errors
  EXPECT_EQ(cli("run --scene " + scene + " --planner astar"), 2);
  EXPECT_EQ(cli("run --scene " + scene + " --planner.lambda 2"), 2);
  EXPECT_EQ(cli("run --scene " + scene + " --no-such-flag 1"), 2);
  EXPECT_EQ(cli("run"), 2);
  // runtime aborts
  EXPECT_EQ(cli("run --scene /nonexistent.scene --out " + scratch("cli_bad").string()), 3);
  EXPECT_EQ(cli("plan-once --state /nonexistent"), 3);
}
