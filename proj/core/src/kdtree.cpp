#include "surfelnbp/kdtree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <queue>

namespace surfelnbp {

namespace {
constexpr std::uint32_t kLeaf = 8;

bool closer(const KdTree::Neighbor& a, const KdTree::Neighbor& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  return a.index < b.index;
}
}  // namespace

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  if (!points_.empty()) build(0, static_cast<std::uint32_t>(points_.size()));
}

std::int32_t KdTree::build(std::uint32_t first, std::uint32_t count) {
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  if (count <= kLeaf) {
    nodes_[id].first = first;
    nodes_[id].count = count;
    return id;
  }
  Eigen::AlignedBox3d box;
  for (std::uint32_t i = first; i < first + count; ++i) box.extend(points_[order_[i]]);
  int axis = 0;
  box.diagonal().maxCoeff(&axis);
  const std::uint32_t mid = first + count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count,
                   [&](std::uint32_t a, std::uint32_t b) {
                     return points_[a][axis] < points_[b][axis];
                   });
  const double split = points_[order_[mid]][axis];
  const auto left = build(first, mid - first);
  const auto right = build(mid, first + count - mid);
  nodes_[id].axis = axis;
  nodes_[id].split = split;
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

KdTree::Neighbor KdTree::nearest(const Vec3& q) const {
  auto r = knn(q, 1);
  return r.front();
}

std::vector<KdTree::Neighbor> KdTree::knn(const Vec3& q, std::size_t k, std::int64_t skip) const {
  std::vector<Neighbor> best;  // max-heap by `closer`
  if (points_.empty() || k == 0) return best;
  auto worst = [&]() {
    return best.size() < k ? std::numeric_limits<double>::infinity() : best.front().distance;
  };
  auto visit = [&](auto&& self, std::int32_t id) -> void {
    const Node& n = nodes_[id];
    if (n.left < 0) {
      for (std::uint32_t i = n.first; i < n.first + n.count; ++i) {
        const std::uint32_t idx = order_[i];
        if (static_cast<std::int64_t>(idx) == skip) continue;
        const Neighbor cand{idx, (points_[idx] - q).norm()};
        if (best.size() < k) {
          best.push_back(cand);
          std::push_heap(best.begin(), best.end(), closer);
        } else if (closer(cand, best.front())) {
          std::pop_heap(best.begin(), best.end(), closer);
          best.back() = cand;
          std::push_heap(best.begin(), best.end(), closer);
        }
      }
      return;
    }
    const double diff = q[n.axis] - n.split;
    const std::int32_t near = diff < 0 ? n.left : n.right;
    const std::int32_t far = diff < 0 ? n.right : n.left;
    self(self, near);
    if (std::abs(diff) <= worst()) self(self, far);
  };
  visit(visit, 0);
  std::sort_heap(best.begin(), best.end(), closer);
  return best;
}

}  // namespace surfelnbp
