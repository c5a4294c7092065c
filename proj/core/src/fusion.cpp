#include "surfelnbp/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "surfelnbp/errors.hpp"
#include "surfelnbp/kdtree.hpp"
#include "surfelnbp/losses.hpp"

namespace surfelnbp {

std::size_t UpdateMask::count() const {
  return static_cast<std::size_t>(std::count_if(any.data().begin(), any.data().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

UpdateMask compute_update_mask(const Frame& frame, const RenderBuffers& buffers,
                               const UpdateThresholds& t) {
  if (!frame.depth.same_shape(buffers.opacity) || !frame.color.same_shape(buffers.color)) {
    throw InvalidArgument("update mask: frame and buffers differ in resolution");
  }
  const int W = frame.depth.width(), H = frame.depth.height();
  UpdateMask m;
  m.region = valid_region(frame);
  m.op = m.tex = m.geo = m.back = m.any = Mask(W, H, 0);
  m.mde = mean_depth_error(buffers.depth, frame.depth, m.region, buffers.opacity);
  const double geo_limit = std::max(t.depth_factor * m.mde, t.min_depth_error);
  for (std::size_t i = 0; i < m.region.size(); ++i) {
    if (!m.region[i]) continue;
    m.op[i] = buffers.opacity[i] < t.opacity;
    m.tex[i] = (buffers.color[i] - frame.color[i]).squaredNorm() / 3.0 > t.color_mse;
    m.geo[i] = buffers.depth[i] - frame.depth[i] > geo_limit;
    m.back[i] = buffers.normal[i].z() > 0.0;
    m.any[i] = m.op[i] || m.tex[i] || m.geo[i] || m.back[i];
  }
  return m;
}

SpawnResult spawn_surfels(const Frame& frame, const UpdateMask& mask, const SpawnParams& p,
                          const NormalMap* normals) {
  if (p.stride < 1 || p.k_nn < 1) throw InvalidArgument("spawn: stride and k_nn must be >= 1");
  if (!mask.any.same_shape(frame.depth)) throw InvalidArgument("spawn: mask resolution mismatch");
  NormalMap local;
  if (!normals) {
    local = normals_from_depth(frame.depth, frame.K);
    normals = &local;
  }
  SpawnResult out;
  std::vector<Vec3> points;
  std::vector<double> footprints;
  const Mat3 R = frame.pose.rotation_matrix();
  for (int y = 0; y < frame.depth.height(); y += p.stride) {
    for (int x = 0; x < frame.depth.width(); x += p.stride) {
      if (!mask.any(x, y)) continue;
      if (!normals->valid(x, y)) {
        ++out.skipped_invalid_normal;
        continue;
      }
      const double d = frame.depth(x, y);
      const Vec3 p_world = frame.pose.apply(backproject(frame.K, Vec2(x, y), d));
      const Vec3 n_world = R * normals->normals(x, y);
      Surfel s = make_surfel(p_world, quat_from_normal(n_world), Vec2::Constant(1.0),
                             p.initial_opacity, frame.color(x, y));
      out.surfels.push_back(std::move(s));
      points.push_back(p_world);
      footprints.push_back(p.stride * d / frame.K.fx);
    }
  }
  if (points.empty()) return out;
  const KdTree tree(points);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto nn = tree.knn(points[i], static_cast<std::size_t>(p.k_nn),
                             static_cast<std::int64_t>(i));
    double scale = footprints[i];
    if (!nn.empty()) {
      double sum = 0;
      for (const auto& n : nn) sum += n.distance;
      scale = std::min(sum / nn.size(), p.max_scale_factor * footprints[i]);
    }
    scale = std::max(scale, 1e-6);
    out.surfels[i].scale = Vec2::Constant(scale);
  }
  return out;
}

}  // namespace surfelnbp
