#pragma once

#include <cstdint>
#include <vector>

#include "surfelnbp/geometry.hpp"
#include "surfelnbp/image.hpp"
#include "surfelnbp/sensor.hpp"

namespace surfelnbp {

/// Occupancy grid of space not yet observed to be empty. Starts full over a
/// prior box; every capture carves voxels seen as background or lying in
/// front of the measured surface. What remains is the object plus whatever
/// no camera has looked at, so its projection is the region a candidate view
/// should be judged on.
class SpaceCarving {
 public:
  SpaceCarving() = default;
  /// Cubic voxels; the longest box side is split into `resolution` cells.
  SpaceCarving(const Eigen::AlignedBox3d& bounds, int resolution);

  /// Carves with the 3x3 pixel neighborhood of each voxel's projection, so a
  /// voxel survives if any nearby pixel sees geometry at or behind it.
  void carve(const Frame& frame);

  /// Pixels covered by the projected footprints of occupied voxels.
  Mask project(const Pose& cam_pose, const Intrinsics& K) const;

  bool empty() const { return occupied_count_ == 0; }
  std::size_t occupied_count() const { return occupied_count_; }
  std::size_t voxel_count() const { return occupied_.size(); }
  double voxel_size() const { return voxel_; }
  const Eigen::Vector3i& dims() const { return dims_; }
  const Vec3& origin() const { return origin_; }
  Vec3 voxel_center(int i, int j, int k) const;
  bool occupied(int i, int j, int k) const { return occupied_[index(i, j, k)] != 0; }

  /// Run-length encoding of the occupancy in index order, starting with a run
  /// of free voxels.
  std::vector<std::uint32_t> runs() const;
  static SpaceCarving from_runs(const Vec3& origin, double voxel, const Eigen::Vector3i& dims,
                                const std::vector<std::uint32_t>& runs);

 private:
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims_.y() + j) * dims_.x() + i;
  }
  void recount();

  Vec3 origin_ = Vec3::Zero();  // min corner
  double voxel_ = 0.0;
  Eigen::Vector3i dims_ = Eigen::Vector3i::Zero();
  std::vector<std::uint8_t> occupied_;
  std::size_t occupied_count_ = 0;
};

}  // namespace surfelnbp
