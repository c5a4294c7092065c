#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "surfelnbp/geometry.hpp"

namespace surfelnbp {

/// Static 3D kd-tree over a point set for exact nearest / k-nearest queries.
class KdTree {
 public:
  struct Neighbor {
    std::uint32_t index;
    double distance;
  };

  KdTree() = default;
  explicit KdTree(std::span<const Vec3> points);

  bool empty() const { return points_.empty(); }
  std::size_t size() const { return points_.size(); }

  /// Nearest point; undefined on an empty tree.
  Neighbor nearest(const Vec3& q) const;
  /// Up to k nearest points sorted by distance, ties by index. `skip`
  /// excludes one point index (the query itself).
  std::vector<Neighbor> knn(const Vec3& q, std::size_t k,
                            std::int64_t skip = -1) const;

 private:
  struct Node {
    std::uint32_t first = 0, count = 0;  // leaf range into order_
    std::int32_t left = -1, right = -1;
    int axis = 0;
    double split = 0.0;
  };
  std::int32_t build(std::uint32_t first, std::uint32_t count);

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace surfelnbp
