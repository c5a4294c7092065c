#include "surfelnbp/space_carving.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "surfelnbp/errors.hpp"

namespace surfelnbp {

SpaceCarving::SpaceCarving(const Eigen::AlignedBox3d& bounds, int resolution) {
  if (bounds.isEmpty()) throw InvalidArgument("carving: empty bounds");
  if (resolution < 1) throw InvalidArgument("carving: resolution must be >= 1");
  const Vec3 size = bounds.sizes();
  voxel_ = size.maxCoeff() / resolution;
  if (!(voxel_ > 0)) throw InvalidArgument("carving: degenerate bounds");
  for (int a = 0; a < 3; ++a) dims_[a] = std::max(1, static_cast<int>(std::ceil(size[a] / voxel_ - 1e-9)));
  // center the (slightly larger) grid on the box
  origin_ = bounds.center() - 0.5 * voxel_ * dims_.cast<double>();
  occupied_.assign(static_cast<std::size_t>(dims_.prod()), 1);
  occupied_count_ = occupied_.size();
}

Vec3 SpaceCarving::voxel_center(int i, int j, int k) const {
  return origin_ + voxel_ * Vec3(i + 0.5, j + 0.5, k + 0.5);
}

void SpaceCarving::carve(const Frame& frame) {
  const Intrinsics& K = frame.K;
  const double inf = std::numeric_limits<double>::infinity();
  // nearest surface among the 3x3 neighbors; background counts as infinitely far
  ImageD near_depth(K.width, K.height, inf);
  for (int y = 0; y < K.height; ++y) {
    for (int x = 0; x < K.width; ++x) {
      double d = inf;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int xx = std::clamp(x + dx, 0, K.width - 1);
          const int yy = std::clamp(y + dy, 0, K.height - 1);
          if (frame.mask(xx, yy)) d = std::min(d, frame.depth(xx, yy));
        }
      }
      near_depth(x, y) = d;
    }
  }
  const double margin = 0.5 * std::sqrt(3.0) * voxel_;
  for (int k = 0; k < dims_.z(); ++k) {
    for (int j = 0; j < dims_.y(); ++j) {
      for (int i = 0; i < dims_.x(); ++i) {
        const std::size_t idx = index(i, j, k);
        if (!occupied_[idx]) continue;
        const Vec3 pc = frame.pose.apply_inverse(voxel_center(i, j, k));
        if (pc.z() <= 0) continue;
        int x, y;
        if (!K.pixel_of(surfelnbp::project(K, pc), x, y)) continue;
        if (pc.z() + margin < near_depth(x, y)) {
          occupied_[idx] = 0;
          --occupied_count_;
        }
      }
    }
  }
}

Mask SpaceCarving::project(const Pose& cam_pose, const Intrinsics& K) const {
  Mask m(K.width, K.height, 0);
  const auto occ = [&](int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= dims_.x() || j >= dims_.y() || k >= dims_.z()) return false;
    return occupied_[index(i, j, k)] != 0;
  };
  for (int k = 0; k < dims_.z(); ++k) {
    for (int j = 0; j < dims_.y(); ++j) {
      for (int i = 0; i < dims_.x(); ++i) {
        if (!occ(i, j, k)) continue;
        // interior voxels never reach the silhouette
        if (occ(i - 1, j, k) && occ(i + 1, j, k) && occ(i, j - 1, k) && occ(i, j + 1, k) &&
            occ(i, j, k - 1) && occ(i, j, k + 1)) {
          continue;
        }
        const Vec3 pc = cam_pose.apply_inverse(voxel_center(i, j, k));
        if (pc.z() <= 1e-6) continue;
        const Vec2 uv = surfelnbp::project(K, pc);
        const double hx = 0.5 * voxel_ * K.fx / pc.z(), hy = 0.5 * voxel_ * K.fy / pc.z();
        const int x0 = std::max(0, static_cast<int>(std::ceil(uv.x() - hx)));
        const int x1 = std::min(K.width - 1, static_cast<int>(std::floor(uv.x() + hx)));
        const int y0 = std::max(0, static_cast<int>(std::ceil(uv.y() - hy)));
        const int y1 = std::min(K.height - 1, static_cast<int>(std::floor(uv.y() + hy)));
        for (int y = y0; y <= y1; ++y)
          for (int x = x0; x <= x1; ++x) m(x, y) = 1;
        int px, py;
        if (K.pixel_of(uv, px, py)) m(px, py) = 1;
      }
    }
  }
  return m;
}

std::vector<std::uint32_t> SpaceCarving::runs() const {
  std::vector<std::uint32_t> out;
  std::uint8_t current = 0;
  std::uint32_t length = 0;
  for (const auto v : occupied_) {
    if (v != current) {
      out.push_back(length);
      current = v;
      length = 0;
    }
    ++length;
  }
  out.push_back(length);
  return out;
}

SpaceCarving SpaceCarving::from_runs(const Vec3& origin, double voxel, const Eigen::Vector3i& dims,
                                     const std::vector<std::uint32_t>& runs) {
  if (!(voxel > 0) || (dims.array() < 1).any()) throw InvalidArgument("carving: bad grid");
  SpaceCarving c;
  c.origin_ = origin;
  c.voxel_ = voxel;
  c.dims_ = dims;
  c.occupied_.reserve(static_cast<std::size_t>(dims.prod()));
  std::uint8_t value = 0;
  for (const auto r : runs) {
    c.occupied_.insert(c.occupied_.end(), r, value);
    value ^= 1;
  }
  if (c.occupied_.size() != static_cast<std::size_t>(dims.prod())) {
    throw InvalidArgument("carving: run lengths do not match the grid");
  }
  c.recount();
  return c;
}

void SpaceCarving::recount() {
  occupied_count_ = static_cast<std::size_t>(std::count(occupied_.begin(), occupied_.end(), 1));
}

}  // namespace surfelnbp
