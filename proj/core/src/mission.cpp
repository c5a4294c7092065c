#include "surfelnbp/mission.hpp"

#include <chrono>
#include <deque>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "surfelnbp/errors.hpp"
#include "surfelnbp/fusion.hpp"
#include "surfelnbp/image_io.hpp"
#include "surfelnbp/kdtree.hpp"
#include "surfelnbp/metrics.hpp"
#include "surfelnbp/refine.hpp"
#include "surfelnbp/renderer.hpp"
#include "surfelnbp/sensor.hpp"

namespace surfelnbp {

using nlohmann::json;

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

json pose_json(const Pose& p) {
  const auto& q = p.rotation;
  return json::array({p.translation.x(), p.translation.y(), p.translation.z(), q.w(), q.x(),
                      q.y(), q.z()});
}

Pose pose_from_json(const json& j) {
  return Pose(Quat(j.at(3).get<double>(), j.at(4).get<double>(), j.at(5).get<double>(),
                   j.at(6).get<double>()),
              Vec3(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()));
}

json to_json(const ViewMetrics& m) {
  return {{"view", m.view},
          {"completion_ratio", m.completion_ratio},
          {"completion_mm", m.completion},
          {"chamfer_mm", m.chamfer},
          {"fscore", m.fscore},
          {"precision", m.precision},
          {"recall", m.recall},
          {"psnr", m.psnr},
          {"ssim", m.ssim},
          {"movement_m", m.movement},
          {"surfels", m.surfels},
          {"spawned", m.spawned}};
}

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Runs `fn` and rethrows any failure as MissionAborted naming the phase.
template <typename Fn>
auto phase(const char* name, double& clock, Fn&& fn) {
  Stopwatch sw;
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      clock += sw.seconds();
    } else {
      auto r = fn();
      clock += sw.seconds();
      return r;
    }
  } catch (const MissionAborted&) {
    throw;
  } catch (const std::exception& e) {
    throw MissionAborted(name, e.what());
  }
}

std::string view_tag(int view) {
  std::ostringstream os;
  os << "view_" << std::setw(3) << std::setfill('0') << view;
  return os.str();
}

UncertaintyWeights cycle_weights(const PlannerState& s, const MissionConfig& cfg) {
  UncertaintyWeights w;
  if (dynamic_weighting(cfg.ablation)) {
    w = update_weights(s.cycle_visibility, cfg.weight_tolerance,
                       static_cast<std::size_t>(cfg.weight_window));
  }
  return apply_ablation(w, cfg.ablation);
}

Intrinsics planner_intrinsics(const MissionConfig& cfg) {
  return Intrinsics::from_vertical_fov(cfg.planner_width, cfg.planner_height, cfg.vfov_deg);
}

}  // namespace

GroundTruth make_ground_truth(const Scene& scene, const MissionConfig& cfg) {
  GroundTruth gt;
  const SurfaceSamples all =
      sample_surface(scene, static_cast<std::size_t>(cfg.gt_samples), mix_seed(cfg.seed, 77));
  ObservabilityParams op = cfg.observability;
  op.standoff = cfg.standoff;
  op.near = cfg.sensor.near;
  op.far = cfg.sensor.far;
  gt.all = all.points;
  gt.observable = observable_samples(scene, all, op).points;
  gt.diagonal = scene.bounds().diagonal().norm();
  return gt;
}

ViewMetrics geometry_metrics(const GroundTruth& gt, const SurfelModel& model,
                             const MissionConfig& cfg) {
  ViewMetrics m;
  const auto samples = model_samples(model);
  const auto& ref = gt.observable.empty() ? gt.all : gt.observable;
  const Completion c = completion(ref, samples, cfg.cr_threshold, gt.diagonal);
  m.completion_ratio = c.ratio;
  m.completion = c.distance;
  m.surfels = model.size();
  if (!samples.empty()) {
    const ChamferF cf = chamfer_and_fscore(ref, samples, cfg.f_threshold);
    m.chamfer = cf.chamfer;
    m.fscore = cf.fscore;
    m.precision = cf.precision;
    m.recall = cf.recall;
  } else {
    m.chamfer = gt.diagonal * 1e3;
  }
  return m;
}

SpaceCarving make_carving(const Scene& scene, const MissionConfig& cfg) {
  Eigen::AlignedBox3d box = scene.bounds();
  const Vec3 pad = Vec3::Constant(0.05 * box.diagonal().norm());
  box.min() -= pad;
  box.max() += pad;
  return SpaceCarving(box, cfg.carving_resolution);
}

Mask evaluation_region(const SurfelModel& model, const PlannerState& state,
                       const MissionConfig& cfg, const Pose& pose, const Intrinsics& K) {
  if (cfg.region == EvalRegion::kCarved && state.carving.voxel_count() > 0) {
    return state.carving.project(pose, K);
  }
  if (model.empty()) return Mask(K.width, K.height, 1);
  return sphere_region(model.bounding_shell(0.0), pose, K);
}

CycleResult plan_cycle(const SurfelModel& model, PlannerState& state, const MissionConfig& cfg) {
  CycleResult r;
  r.weights = cycle_weights(state, cfg);
  const BoundingShell shell = model.bounding_shell(cfg.standoff);
  r.shell_radius = shell.radius;
  const auto all = generate_candidates(shell.center, shell.radius, cfg.plan.candidates);
  r.candidates = prune_visited(all, state.visited, cfg.plan.prune_factor * shell.radius);
  const Intrinsics Kp = planner_intrinsics(cfg);
  for (auto& c : r.candidates) {
    const ViewEvaluation ev =
        evaluate_view(model, c.pose, Kp, r.weights, evaluation_region(model, state, cfg, c.pose, Kp));
    c.score = ev.score;
    r.mean_quality += ev.quality;
    r.mean_visibility += ev.visibility;
  }
  if (!r.candidates.empty()) {
    r.mean_quality /= static_cast<double>(r.candidates.size());
    r.mean_visibility /= static_cast<double>(r.candidates.size());
    state.cycle_visibility.push_back(r.mean_visibility);
  }
  r.terminate = should_terminate(r.mean_quality, cfg.plan.tau_stop, state.views_taken, cfg.views,
                                 r.candidates.empty());
  switch (cfg.planner) {
    case PlannerMode::kNbp:
      r.plan = plan_nbp(state.current, r.candidates, cfg.plan);
      break;
    case PlannerMode::kNbv:
      r.plan = plan_nbv(state.current, r.candidates);
      break;
    case PlannerMode::kRandom: {
      const auto pick = plan_random(r.candidates, mix_seed(cfg.seed, 1000 + state.cycle));
      r.plan = plan_nbv(state.current, pick ? std::vector<Viewpoint>{*pick}
                                            : std::vector<Viewpoint>{});
      break;
    }
    case PlannerMode::kCircle: {
      const BoundingShell prior = shell;
      const auto ring = plan_circle(prior.center, prior.radius, cfg.views, cfg.circle_elevation,
                                    cfg.init_azimuth);
      const Viewpoint next = ring[static_cast<std::size_t>(state.views_taken) % ring.size()];
      r.plan = plan_nbv(state.current, {next});
      // a fixed ring never runs out of candidates
      r.terminate = state.views_taken >= cfg.views;
      break;
    }
  }
  if (r.plan.exhausted) r.terminate = true;
  ++state.cycle;
  return r;
}

std::string plan_record(const CycleResult& r, int cycle) {
  json j;
  j["cycle"] = cycle;
  j["goal"] = r.plan.goal;
  j["path_scores"] = r.plan.candidate_scores;
  json ids = json::array();
  for (const auto& n : r.plan.nodes) ids.push_back(n.id);
  j["path"] = ids;
  j["path_length"] = r.plan.length;
  j["fallback"] = r.plan.fallback;
  j["weights"] = {r.weights.confidence, r.weights.backface, r.weights.visibility};
  j["phase"] = r.weights.phase == Phase::kExploration ? "exploration" : "exploitation";
  j["mean_quality"] = r.mean_quality;
  j["mean_visibility"] = r.mean_visibility;
  j["terminate"] = r.terminate;
  json scores = json::array();
  for (const auto& c : r.candidates) scores.push_back({c.id, c.score});
  j["candidates"] = scores;
  return j.dump();
}

void write_state(const PlannerState& s, const std::filesystem::path& path) {
  json j;
  j["current"] = pose_json(s.current);
  json visited = json::array();
  for (const auto& v : s.visited) visited.push_back({v.x(), v.y(), v.z()});
  j["visited"] = visited;
  j["cycle_visibility"] = s.cycle_visibility;
  j["views_taken"] = s.views_taken;
  j["cycle"] = s.cycle;
  if (s.carving.voxel_count() > 0) {
    const auto& c = s.carving;
    j["carving"] = {{"origin", {c.origin().x(), c.origin().y(), c.origin().z()}},
                    {"voxel", c.voxel_size()},
                    {"dims", {c.dims().x(), c.dims().y(), c.dims().z()}},
                    {"runs", c.runs()}};
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

PlannerState read_state(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  PlannerState s;
  try {
    const json j = json::parse(in);
    s.current = pose_from_json(j.at("current"));
    for (const auto& v : j.at("visited")) {
      s.visited.emplace_back(v.at(0).get<double>(), v.at(1).get<double>(), v.at(2).get<double>());
    }
    s.cycle_visibility = j.at("cycle_visibility").get<std::vector<double>>();
    s.views_taken = j.at("views_taken").get<int>();
    s.cycle = j.at("cycle").get<int>();
    if (j.contains("carving")) {
      const json& c = j.at("carving");
      const auto& o = c.at("origin");
      const auto& d = c.at("dims");
      s.carving = SpaceCarving::from_runs(
          Vec3(o.at(0).get<double>(), o.at(1).get<double>(), o.at(2).get<double>()),
          c.at("voxel").get<double>(),
          Eigen::Vector3i(d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()),
          c.at("runs").get<std::vector<std::uint32_t>>());
    }
  } catch (const json::exception& e) {
    throw Error("malformed state file " + path.string() + ": " + e.what());
  }
  return s;
}

std::string view_metrics_json(const ViewMetrics& m) { return to_json(m).dump(); }

std::string metrics_json(const MissionResult& r, bool include_timing) {
  json j;
  j["views"] = r.trajectory.size();
  j["movement_cost_m"] = r.movement;
  j["termination"] = r.termination;
  j["final"] = to_json(r.final);
  json per = json::array();
  for (const auto& m : r.per_view) per.push_back(to_json(m));
  j["per_view"] = per;
  if (include_timing) {
    j["timing"] = {{"capture_s", r.timing.capture},       {"fusion_s", r.timing.fusion},
                   {"refine_s", r.timing.refine},         {"confidence_s", r.timing.confidence},
                   {"planning_s", r.timing.planning},     {"metrics_s", r.timing.metrics},
                   {"total_s", r.timing.total}};
  }
  return j.dump(2);
}

MissionResult run_mission(const MissionConfig& cfg_in) {
  MissionConfig cfg = cfg_in;
  validate(cfg);
  if (cfg.ablation == Ablation::kNoOcclusion) {
    cfg.covis.occlusion_aware = false;
    cfg.confidence.occlusion_aware = false;
  }
  const Stopwatch total;
  MissionResult res;
  PhaseTiming& t = res.timing;

  namespace fs = std::filesystem;
  const fs::path out = cfg.out;
  phase("setup", t.capture, [&] {
    fs::create_directories(out);
    if (cfg.dump_buffers) fs::create_directories(out / "buffers");
  });
  {
    MissionConfig dumped = cfg_in;
    std::ofstream(out / "config.txt") << ConfigRegistry(dumped).dump();
  }
  std::ofstream traj(out / "trajectory.jsonl");
  std::ofstream plog(out / "planner_log.jsonl");
  std::ofstream llog;
  if (cfg.log_losses) llog.open(out / "losses.jsonl");

  const Scene scene = phase("load", t.capture, [&] { return load_scene(cfg.scene); });
  const GroundTruth gt = phase("metrics", t.metrics, [&] { return make_ground_truth(scene, cfg); });
  const Intrinsics K = Intrinsics::from_vertical_fov(cfg.width, cfg.height, cfg.vfov_deg);
  SensorSettings sensor = cfg.sensor;
  sensor.seed = cfg.seed;

  const Vec3 prior_center = scene.bounds().center();
  const double prior_radius = 0.5 * scene.bounds().diagonal().norm() + cfg.standoff;

  SurfelModel& model = res.model;
  std::vector<Frame> frames;
  std::map<int, int> opt_counts;
  PlannerState state;
  if (cfg.region == EvalRegion::kCarved) state.carving = make_carving(scene, cfg);
  std::deque<Pose> pending;
  if (cfg.planner == PlannerMode::kCircle) {
    for (const auto& v : plan_circle(prior_center, prior_radius, cfg.views, cfg.circle_elevation,
                                     cfg.init_azimuth)) {
      pending.push_back(v.pose);
    }
  } else {
    pending.push_back(
        shell_pose(prior_center, prior_radius, cfg.init_elevation, cfg.init_azimuth));
  }
  res.termination = "budget";

  auto flush = [&] {
    export_ply(model, out / "model.ply");
    std::ofstream(out / "metrics.json") << metrics_json(res) << '\n';
    write_state(state, out / "state.json");
  };

  try {
    while (state.views_taken < cfg.views) {
      if (pending.empty()) {
        if (model.empty()) {
          res.termination = "empty-model";
          break;
        }
        const CycleResult cycle = phase("planning", t.planning, [&] {
          const int index = state.cycle;
          CycleResult r = plan_cycle(model, state, cfg);
          plog << plan_record(r, index) << '\n';
          return r;
        });
        if (cycle.terminate) {
          res.termination = cycle.plan.exhausted || cycle.candidates.empty()
                                ? "candidates-exhausted"
                                : state.views_taken >= cfg.views ? "budget" : "uncertainty";
          break;
        }
        const auto& nodes = cycle.plan.nodes;
        for (std::size_t i = 1; i < nodes.size(); ++i) {
          pending.push_back(nodes[i].pose);
          if (cfg.receding) break;
        }
        if (pending.empty()) {
          res.termination = "candidates-exhausted";
          break;
        }
      }

      const Pose pose = pending.front();
      pending.pop_front();
      const int id = state.views_taken;
      if (!res.trajectory.empty()) {
        res.movement += (pose.translation - res.trajectory.back().translation).norm();
      }
      res.trajectory.push_back(pose);
      state.current = pose;
      state.visited.push_back(pose.translation);
      ++state.views_taken;

      frames.push_back(phase("capture", t.capture, [&] {
        return capture(scene, pose, K, sensor, id);
      }));
      const Frame& frame = frames.back();
      traj << json{{"view", id}, {"pose", pose_json(pose)}, {"movement_m", res.movement}}.dump()
           << '\n';

      ViewMetrics vm;
      vm.view = id;
      phase("fusion", t.fusion, [&] {
        const RenderBuffers before = render(model, pose, K, cfg.refine.render);
        const NormalMap normals = normals_from_depth(frame.depth, frame.K);
        const UpdateMask mask = compute_update_mask(frame, before, cfg.update);
        SpawnResult spawned = spawn_surfels(frame, mask, cfg.spawn, &normals);
        vm.spawned = spawned.surfels.size();
        if (!spawned.surfels.empty()) model.insert(std::move(spawned.surfels));
        if (state.carving.voxel_count() > 0) state.carving.carve(frame);
      });

      phase("refine", t.refine, [&] {
        if (model.empty() || cfg.refine.iterations == 0) return;
        std::vector<int> history;
        std::vector<ViewRank> ranks;
        for (int j = 0; j < id; ++j) {
          CovisParams cp = cfg.covis;
          cp.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(id) * 4096 + j);
          const CovisRecord rec = covisibility(model, frame, frames[j].pose, K, cp, j);
          history.push_back(j);
          ranks.push_back({j, rec.rho});
        }
        const auto local = select_local_views(ranks, static_cast<std::size_t>(cfg.local_views));
        const auto global =
            select_global_views(history, local, static_cast<std::size_t>(cfg.global_views),
                                opt_counts, mix_seed(cfg.seed, 500000 + id));
        std::vector<Frame> selected{frame};
        std::vector<int> ids{id};
        for (const int j : local) ids.push_back(j);
        for (const int j : global) ids.push_back(j);
        for (std::size_t k = 1; k < ids.size(); ++k) selected.push_back(frames[ids[k]]);
        const RefineTrace trace = refine(model, selected, cfg.refine);
        for (const int j : ids) ++opt_counts[j];
        if (llog) {
          for (std::size_t it = 0; it < trace.losses.size(); ++it) {
            const LossTerms& l = trace.losses[it];
            llog << json{{"view", id},           {"iteration", it},
                         {"photometric", l.photometric}, {"depth", l.depth},
                         {"normal", l.normal},   {"consistency", l.consistency},
                         {"mask", l.mask},       {"opacity", l.opacity},
                         {"total", l.total}}
                        .dump()
                 << '\n';
          }
        }
      });

      const RenderBuffers after = phase("confidence", t.confidence, [&] {
        RenderBuffers b = render(model, pose, K, cfg.refine.render);
        if (!model.empty()) {
          ConfidenceParams cp = cfg.confidence;
          cp.d_max = cfg.d_max_factor * model.bounding_shell(cfg.standoff).radius;
          update_confidence(model, id, pose, K, b, cp);
          b = render(model, pose, K, cfg.refine.render);
        }
        return b;
      });

      if (cfg.dump_buffers) {
        phase("export", t.metrics, [&] {
          const fs::path dir = out / "buffers";
          const std::string tag = view_tag(id);
          write_ppm(after.color, dir / (tag + "_color.ppm"));
          write_pfm(after.depth, dir / (tag + "_depth.pfm"));
          write_pfm(after.normal, dir / (tag + "_normal.pfm"));
          write_pfm(after.opacity, dir / (tag + "_opacity.pfm"));
          write_pfm(after.confidence, dir / (tag + "_confidence.pfm"));
          const Intrinsics Kp = planner_intrinsics(cfg);
          write_pfm(uncertainty_map(model, pose, Kp, cycle_weights(state, cfg),
                                    evaluation_region(model, state, cfg, pose, Kp)),
                    dir / (tag + "_uncertainty.pfm"));
        });
      }

      if (cfg.per_view_metrics || state.views_taken == cfg.views) {
        phase("metrics", t.metrics, [&] {
          ViewMetrics g = geometry_metrics(gt, model, cfg);
          g.view = vm.view;
          g.spawned = vm.spawned;
          const ImageQuality q = psnr_ssim(after.color, frame.color, frame.mask);
          g.psnr = q.psnr;
          g.ssim = q.ssim;
          g.movement = res.movement;
          res.per_view.push_back(g);
        });
      }
    }

    phase("metrics", t.metrics, [&] {
      res.final = geometry_metrics(gt, model, cfg);
      res.final.view = static_cast<int>(res.trajectory.size()) - 1;
      res.final.movement = res.movement;
      double psnr = 0.0, ssim_sum = 0.0;
      for (const Frame& f : frames) {
        const RenderBuffers b = render(model, f.pose, f.K, cfg.refine.render);
        const ImageQuality q = psnr_ssim(b.color, f.color, f.mask);
        psnr += q.psnr;
        ssim_sum += q.ssim;
      }
      if (!frames.empty()) {
        res.final.psnr = psnr / static_cast<double>(frames.size());
        res.final.ssim = ssim_sum / static_cast<double>(frames.size());
      }
    });
  } catch (const MissionAborted&) {
    res.termination = "aborted";
    t.total = total.seconds();
    try {
      flush();
    } catch (const std::exception&) {
      // keep the original failure
    }
    throw;
  }
  t.total = total.seconds();
  phase("export", t.metrics, flush);
  return res;
}

}  // namespace surfelnbp
