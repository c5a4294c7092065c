#pragma once

// Scenes and models shared by the unit and acceptance tests.

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "surfelnbp/fusion.hpp"
#include "surfelnbp/refine.hpp"
#include "surfelnbp/renderer.hpp"
#include "surfelnbp/scene.hpp"
#include "surfelnbp/sensor.hpp"
#include "surfelnbp/view_eval.hpp"

namespace fixtures {

using namespace surfelnbp;

inline std::filesystem::path scene_path(const std::string& name) {
  return std::filesystem::path(SURFELNBP_SCENES_DIR) / (name + ".scene");
}

inline const Scene& cube_scene() {
  static const Scene s = load_scene(scene_path("cube"));
  return s;
}

inline Intrinsics small_K(int w = 32, int h = 24) {
  return Intrinsics::from_vertical_fov(w, h, 65.0);
}

/// Cube seen from three views 120 degrees apart.
inline std::vector<Frame> cube_views(int w = 32, int h = 24) {
  std::vector<Frame> frames;
  for (int i = 0; i < 3; ++i) {
    const double az = i * 2.0 * std::numbers::pi / 3.0 + 0.3;
    const Vec3 eye(0.26 * std::cos(az), 0.26 * std::sin(az), 0.14);
    frames.push_back(capture(cube_scene(), look_at(eye, Vec3::Zero()), small_K(w, h), {}, i));
  }
  return frames;
}

/// Surfels spawned from every view, with colors and opacities scrambled so
/// that appearance has to be recovered.
inline SurfelModel scrambled_cube_model(const std::vector<Frame>& frames, std::uint64_t seed,
                                        int stride = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0, 1);
  SurfelModel model;
  for (const Frame& f : frames) {
    const RenderBuffers b = render(model, f.pose, f.K);
    SpawnParams p;
    p.stride = stride;
    auto s = spawn_surfels(f, compute_update_mask(f, b), p).surfels;
    for (auto& x : s) {
      x.color = Vec3(U(rng), U(rng), U(rng));
      x.opacity = 0.3 + 0.4 * U(rng);
    }
    model.insert(std::move(s));
  }
  return model;
}

struct GradientConfig {
  SurfelModel model;
  std::vector<Frame> frames;
};

/// Up to five surfels on the visible cube surface, one 32x24 view.
inline GradientConfig gradient_config(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0, 1);
  const double az = 2 * std::numbers::pi * U(rng), el = 0.2 + 0.8 * U(rng);
  const Vec3 eye = 0.3 * Vec3(std::cos(az) * std::cos(el), std::sin(az) * std::cos(el), std::sin(el));
  GradientConfig c;
  c.frames.push_back(capture(cube_scene(), look_at(eye, Vec3::Zero()), small_K(), {}, 0));
  const Frame& f = c.frames[0];
  const int n = 1 + static_cast<int>(seed % 5);
  std::vector<Surfel> batch;
  std::uniform_int_distribution<int> X(4, f.K.width - 5), Y(4, f.K.height - 5);
  while (static_cast<int>(batch.size()) < n) {
    const int x = X(rng), y = Y(rng);
    if (!f.mask(x, y)) continue;
    const Vec3 p = f.pose.apply(backproject(f.K, Vec2(x, y), f.depth(x, y) * (0.97 + 0.04 * U(rng))));
    const Vec3 view = (f.pose.translation - p).normalized();
    const Vec3 tilt(U(rng) - 0.5, U(rng) - 0.5, U(rng) - 0.5);
    const Vec3 normal = (view + 0.6 * tilt).normalized();
    const double footprint = f.depth(x, y) / f.K.fx;
    batch.push_back(make_surfel(p, quat_from_normal(normal),
                                Vec2((1.5 + 2 * U(rng)) * footprint, (1.5 + 2 * U(rng)) * footprint),
                                0.2 + 0.6 * U(rng), Vec3(U(rng), U(rng), U(rng))));
  }
  c.model.insert(std::move(batch));
  return c;
}

/// ||a - b|| / ||b|| over the opacity and color entries of every surfel.
inline double appearance_relative_error(const std::vector<SurfelGradient>& a,
                                        const std::vector<SurfelGradient>& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::pow(a[i].opacity - b[i].opacity, 2) + (a[i].color - b[i].color).squaredNorm();
    den += std::pow(b[i].opacity, 2) + b[i].color.squaredNorm();
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

/// Opaque icosphere fused from six axis views, seen by cameras circling it in
/// the xz plane.
struct CovisFixture {
  Scene scene;
  SurfelModel model;
  Intrinsics K = Intrinsics::from_vertical_fov(320, 240, 65.0);
  double distance = 0.3;

  Pose view(double degrees) const {
    const double a = degrees * std::numbers::pi / 180.0;
    return look_at(distance * Vec3(std::sin(a), 0.0, -std::cos(a)), Vec3::Zero());
  }
};

inline const CovisFixture& covis_fixture() {
  static const CovisFixture f = [] {
    CovisFixture c{Scene(primitives::icosphere(5, 0.12)), {}};
    const Vec3 axes[] = {{0, 0, -1}, {1, 0, 0}, {0, 0, 1}, {-1, 0, 0}, {0, 1, 0.01}, {0, -1, 0.01}};
    for (const Vec3& a : axes) {
      const Pose pose = look_at(c.distance * a.normalized(), Vec3::Zero());
      const Frame f = capture(c.scene, pose, c.K);
      c.model.insert(spawn_surfels(f, compute_update_mask(f, render(c.model, pose, c.K))).surfels);
    }
    return c;
  }();
  return f;
}

/// Fraction of the sampled source pixels whose surface point is inside the
/// target frustum and unoccluded by the mesh.
inline double ray_cast_covisibility(const Scene& scene, const Frame& source, const Pose& target,
                                    const Intrinsics& K, const CovisParams& p) {
  const auto samples = sample_valid_pixels(source, p.samples, p.seed);
  if (samples.empty()) return 0.0;
  std::size_t seen = 0;
  for (const auto& px : samples) {
    const Vec3 w = source.pose.apply(backproject(source.K, Vec2(px.x, px.y), source.depth(px.x, px.y)));
    const Vec3 c = target.apply_inverse(w);
    int x = 0, y = 0;
    if (c.z() > 0 && K.pixel_of(project(K, c), x, y) && ray_visibility(scene, w, target, 1e-3)) ++seen;
  }
  return static_cast<double>(seen) / static_cast<double>(samples.size());
}

}  // namespace fixtures
