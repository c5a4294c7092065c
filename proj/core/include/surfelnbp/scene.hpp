#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "surfelnbp/geometry.hpp"

namespace surfelnbp {

struct Triangle {
  Vec3 v0, v1, v2;
  Vec3 color = Vec3::Constant(0.7);

  double area() const { return 0.5 * (v1 - v0).cross(v2 - v0).norm(); }
  Vec3 normal() const { return (v1 - v0).cross(v2 - v0).normalized(); }
  Vec3 centroid() const { return (v0 + v1 + v2) / 3.0; }
};

struct RayHit {
  double t = 0.0;
  std::uint32_t triangle = 0;
};

/// Immutable triangle scene with a bounding volume hierarchy.
class Scene {
 public:
  Scene() = default;
  /// Drops degenerate triangles (area <= 1e-12), recording a warning for each.
  explicit Scene(std::vector<Triangle> triangles);

  const std::vector<Triangle>& triangles() const { return triangles_; }
  const Eigen::AlignedBox3d& bounds() const { return bounds_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// Nearest hit with t in (t_min, t_max) along origin + t * dir.
  std::optional<RayHit> intersect(const Vec3& origin, const Vec3& dir, double t_min,
                                  double t_max) const;
  bool occluded(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const;

  /// Uniformly rescales about the bbox center so the diagonal equals `diagonal`,
  /// and moves the bbox center to the origin.
  Scene normalized(double diagonal) const;

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    std::uint32_t left = 0, right = 0;  // children when count == 0
    std::uint32_t first = 0, count = 0;  // leaf triangle range
  };
  std::uint32_t build(std::uint32_t first, std::uint32_t count);

  std::vector<Triangle> triangles_;
  std::vector<Node> nodes_;
  Eigen::AlignedBox3d bounds_;
  std::vector<std::string> warnings_;
};

/// Möller-Trumbore; returns t of the hit when positive-area intersection.
std::optional<double> intersect_triangle(const Triangle& tri, const Vec3& origin,
                                         const Vec3& dir);

enum class TextureScheme { kObj, kChecker, kGradient };

TextureScheme parse_texture_scheme(const std::string& name);

/// Recolors faces: checker alternates two colors by face index, gradient maps
/// the face centroid inside the bounds to RGB.
Scene apply_texture(const Scene& scene, TextureScheme scheme);

/// ASCII OBJ: `v x y z [r g b]`, `f` with any index syntax (fan-triangulated),
/// and the `fc r g b` extension that colors subsequent faces.
Scene load_obj(const std::filesystem::path& path);
void write_obj(const std::vector<Triangle>& triangles, const std::filesystem::path& path);

/// Key-value manifest naming the mesh, the bbox-diagonal normalization target
/// and the texture scheme.
struct SceneManifest {
  std::filesystem::path mesh;
  double scale_diagonal = 0.3;
  TextureScheme texture = TextureScheme::kObj;
  std::string name;
};

SceneManifest read_manifest(const std::filesystem::path& path);
/// Loads the manifest's mesh, normalizes it and applies the texture scheme.
Scene load_scene(const std::filesystem::path& manifest_path);

namespace primitives {
std::vector<Triangle> icosphere(int subdivisions, double radius);
std::vector<Triangle> cube(double side);
std::vector<Triangle> torus(double major, double minor, int segments_major, int segments_minor);
/// Square of the given half-extent in the plane z = height, normal toward -z.
std::vector<Triangle> plane(double half_extent, double height);
}  // namespace primitives

struct SurfaceSamples {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;
};

/// Area-weighted uniform samples of the scene surface.
SurfaceSamples sample_surface(const Scene& scene, std::size_t n, std::uint64_t seed);

}  // namespace surfelnbp
