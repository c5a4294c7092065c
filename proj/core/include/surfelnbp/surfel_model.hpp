#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "surfelnbp/geometry.hpp"

namespace surfelnbp {

using SurfelId = std::uint64_t;

/// One oriented Gaussian disk. The third scale axis is fixed at zero, so the
/// disk normal is the third column of the rotation.
struct Surfel {
  SurfelId id = 0;  // assigned by SurfelModel::insert
  Vec3 center = Vec3::Zero();
  Quat rotation = Quat::Identity();
  Vec2 scale = Vec2::Constant(1e-3);
  double opacity = 1.0;
  Vec3 color = Vec3::Constant(0.5);
  double confidence = 0.0;
  /// Frames that passed the occlusion-aware validity check for this surfel.
  std::vector<int> valid_views;
};

/// Builds a surfel with opacity, confidence and color clamped into [0, 1].
Surfel make_surfel(const Vec3& center, const Quat& rotation, const Vec2& scale, double opacity,
                   const Vec3& color, double confidence = 0.0);

Vec3 surfel_normal(const Surfel& s);

struct BoundingShell {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

/// Insertion-only surfel container with an incrementally maintained
/// axis-aligned bounding box of the centers.
class SurfelModel {
 public:
  /// Validates the whole batch before inserting anything. Returns the id of
  /// the first inserted surfel.
  SurfelId insert(std::vector<Surfel> batch);

  std::size_t size() const { return surfels_.size(); }
  bool empty() const { return surfels_.empty(); }
  const std::vector<Surfel>& surfels() const { return surfels_; }
  /// Mutable access for optimizers. Callers that move centers must call
  /// refresh_bounds() afterwards.
  std::span<Surfel> mutable_surfels() { return surfels_; }
  void refresh_bounds();

  const Eigen::AlignedBox3d& bbox() const { return bbox_; }
  /// Sphere around the bbox: radius = half-diagonal + standoff.
  BoundingShell bounding_shell(double standoff) const;

  /// Camera centers of frames referenced by Surfel::valid_views.
  void register_view(int view_id, const Vec3& camera_center);
  const std::map<int, Vec3>& view_positions() const { return view_positions_; }

  SurfelId next_id() const { return next_id_; }

 private:
  std::vector<Surfel> surfels_;
  Eigen::AlignedBox3d bbox_;
  std::map<int, Vec3> view_positions_;
  SurfelId next_id_ = 0;
};

/// Checks the Surfel invariants; returns an empty string when valid.
std::string validate_surfel(const Surfel& s);

/// ASCII PLY with vertex properties
/// x y z qw qx qy qz sx sy opacity red green blue confidence.
void export_ply(const SurfelModel& model, const std::filesystem::path& path);
SurfelModel import_ply(const std::filesystem::path& path);

}  // namespace surfelnbp
