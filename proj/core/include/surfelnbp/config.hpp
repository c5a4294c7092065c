#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "surfelnbp/fusion.hpp"
#include "surfelnbp/metrics.hpp"
#include "surfelnbp/planner.hpp"
#include "surfelnbp/refine.hpp"
#include "surfelnbp/sensor.hpp"
#include "surfelnbp/view_eval.hpp"

namespace surfelnbp {

enum class PlannerMode { kNbp, kNbv, kCircle, kRandom };
PlannerMode parse_planner_mode(const std::string& s);
std::string to_string(PlannerMode m);

/// Where candidate views are scored: the projection of the carved occupancy
/// grid, or of the model's bounding sphere.
enum class EvalRegion { kCarved, kShell };
EvalRegion parse_eval_region(const std::string& s);
std::string to_string(EvalRegion r);

struct MissionConfig {
  std::filesystem::path scene;
  PlannerMode planner = PlannerMode::kNbp;
  int views = 30;
  std::uint64_t seed = 0;
  std::filesystem::path out = "mission_out";
  bool dump_buffers = false;
  bool log_losses = false;
  Ablation ablation = Ablation::kNone;

  int width = 160;
  int height = 120;
  double vfov_deg = 65.0;
  int planner_width = 160;
  int planner_height = 120;
  SensorSettings sensor;

  double standoff = 0.2;        // meters beyond the bbox half-diagonal
  double init_elevation = 30.0; // degrees
  double init_azimuth = 0.0;

  UpdateThresholds update;
  SpawnParams spawn;
  RefineParams refine;
  int local_views = 9;
  int global_views = 2;
  CovisParams covis;
  ConfidenceParams confidence;
  double d_max_factor = 2.0;  // d_max = factor * shell radius
  double weight_tolerance = 0.05;
  int weight_window = 3;

  PlannerParams plan;
  bool receding = false;  // execute only the first step of each path
  EvalRegion region = EvalRegion::kCarved;
  int carving_resolution = 48;  // cells along the longest side of the scene bounds
  double circle_elevation = 30.0;

  int gt_samples = 20000;
  double cr_threshold = 0.005;
  double f_threshold = 0.005;
  ObservabilityParams observability;
  bool per_view_metrics = true;
};

/// Flat `section.key = value` view of a MissionConfig. Every setter parses
/// and range-checks its value and throws ConfigError otherwise.
class ConfigRegistry {
 public:
  struct Entry {
    std::string key;
    std::string help;
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
  };

  explicit ConfigRegistry(MissionConfig& cfg);

  const std::vector<Entry>& entries() const { return entries_; }
  bool contains(const std::string& key) const;
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;

  /// Blank lines and lines starting with '#' are ignored.
  void load_text(const std::string& text);
  void load_file(const std::filesystem::path& path);
  /// Every key in registry order, one `key = value` per line.
  std::string dump() const;

 private:
  const Entry& find(const std::string& key) const;
  std::vector<Entry> entries_;
};

/// Cross-field checks; throws ConfigError.
void validate(const MissionConfig& cfg);

}  // namespace surfelnbp
