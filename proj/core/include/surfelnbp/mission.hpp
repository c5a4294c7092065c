#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "surfelnbp/config.hpp"
#include "surfelnbp/planner.hpp"
#include "surfelnbp/scene.hpp"
#include "surfelnbp/space_carving.hpp"
#include "surfelnbp/surfel_model.hpp"
#include "surfelnbp/view_eval.hpp"

namespace surfelnbp {

struct ViewMetrics {
  int view = -1;
  double completion_ratio = 0.0;  // percent
  double completion = 0.0;        // mm
  double chamfer = 0.0;           // mm
  double fscore = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double movement = 0.0;  // cumulative, meters
  std::size_t surfels = 0;
  std::size_t spawned = 0;
};

struct PhaseTiming {
  double capture = 0.0;
  double fusion = 0.0;
  double refine = 0.0;
  double confidence = 0.0;
  double planning = 0.0;
  double metrics = 0.0;
  double total = 0.0;
};

struct MissionResult {
  std::vector<ViewMetrics> per_view;
  ViewMetrics final;
  std::vector<Pose> trajectory;
  double movement = 0.0;
  std::string termination;
  PhaseTiming timing;
  SurfelModel model;
};

/// Ground truth used by the geometric metrics.
struct GroundTruth {
  std::vector<Vec3> all;         // area-weighted samples of the whole mesh
  std::vector<Vec3> observable;  // the subset seen from the reference hemisphere
  double diagonal = 0.0;
};
GroundTruth make_ground_truth(const Scene& scene, const MissionConfig& cfg);

/// CR/CE against the observable set, CD/F against it as well.
ViewMetrics geometry_metrics(const GroundTruth& gt, const SurfelModel& model,
                             const MissionConfig& cfg);

/// What plan-once needs to reproduce one planning cycle.
struct PlannerState {
  Pose current;
  std::vector<Vec3> visited;
  std::vector<double> cycle_visibility;
  int views_taken = 0;
  int cycle = 0;
  SpaceCarving carving;  // empty unless the carved evaluation region is in use
};

/// Occupancy grid over the scene's known bounds, padded by 5% of the diagonal.
SpaceCarving make_carving(const Scene& scene, const MissionConfig& cfg);

/// Pixels on which a view is scored under cfg.region.
Mask evaluation_region(const SurfelModel& model, const PlannerState& state,
                       const MissionConfig& cfg, const Pose& pose, const Intrinsics& K);

struct CycleResult {
  PathPlan plan;
  std::vector<Viewpoint> candidates;  // pruned and scored
  UncertaintyWeights weights;
  double shell_radius = 0.0;
  double mean_quality = 0.0;
  double mean_visibility = 0.0;
  bool terminate = false;
};

/// One planning cycle (candidates, scoring, termination test, plan). Appends
/// the cycle's mean visibility to the state's history.
CycleResult plan_cycle(const SurfelModel& model, PlannerState& state, const MissionConfig& cfg);
/// Line-delimited planner log record.
std::string plan_record(const CycleResult& r, int cycle);

/// Runs the closed loop and writes model.ply, trajectory.jsonl,
/// planner_log.jsonl, metrics.json, config.txt and state.json into cfg.out.
/// Throws MissionAborted naming the failing phase.
MissionResult run_mission(const MissionConfig& cfg);

void write_state(const PlannerState& s, const std::filesystem::path& path);
PlannerState read_state(const std::filesystem::path& path);

std::string metrics_json(const MissionResult& r, bool include_timing = true);
std::string view_metrics_json(const ViewMetrics& m);

}  // namespace surfelnbp
