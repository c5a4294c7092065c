#include "surfelnbp/scene.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "surfelnbp/errors.hpp"

namespace surfelnbp {

namespace {

constexpr std::uint32_t kLeafSize = 4;

bool ray_box(const Eigen::AlignedBox3d& box, const Vec3& o, const Vec3& inv_d, double t0,
             double t1) {
  for (int a = 0; a < 3; ++a) {
    if (std::isinf(inv_d[a])) {
      // ray parallel to the slab: inside it or never (avoids 0 * inf)
      if (o[a] < box.min()[a] || o[a] > box.max()[a]) return false;
      continue;
    }
    double ta = (box.min()[a] - o[a]) * inv_d[a];
    double tb = (box.max()[a] - o[a]) * inv_d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::optional<double> intersect_triangle(const Triangle& tri, const Vec3& origin,
                                         const Vec3& dir) {
  const Vec3 e1 = tri.v1 - tri.v0;
  const Vec3 e2 = tri.v2 - tri.v0;
  const Vec3 p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-18) return std::nullopt;
  const double inv = 1.0 / det;
  const Vec3 s = origin - tri.v0;
  const double u = s.dot(p) * inv;
  constexpr double eps = 1e-12;
  if (u < -eps || u > 1.0 + eps) return std::nullopt;
  const Vec3 q = s.cross(e1);
  const double v = dir.dot(q) * inv;
  if (v < -eps || u + v > 1.0 + eps) return std::nullopt;
  return e2.dot(q) * inv;
}

Scene::Scene(std::vector<Triangle> triangles) {
  triangles_.reserve(triangles.size());
  for (std::size_t i = 0; i < triangles.size(); ++i) {
    const auto& t = triangles[i];
    if (!(t.area() > 1e-12) || !t.v0.allFinite() || !t.v1.allFinite() || !t.v2.allFinite()) {
      warnings_.push_back("degenerate triangle " + std::to_string(i) + " dropped");
      continue;
    }
    triangles_.push_back(t);
  }
  for (const auto& t : triangles_) {
    bounds_.extend(t.v0);
    bounds_.extend(t.v1);
    bounds_.extend(t.v2);
  }
  if (!triangles_.empty()) {
    nodes_.reserve(2 * triangles_.size() / kLeafSize + 1);
    build(0, static_cast<std::uint32_t>(triangles_.size()));
  }
}

std::uint32_t Scene::build(std::uint32_t first, std::uint32_t count) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.emplace_back();
  Eigen::AlignedBox3d box, cbox;
  for (std::uint32_t i = first; i < first + count; ++i) {
    const auto& t = triangles_[i];
    box.extend(t.v0);
    box.extend(t.v1);
    box.extend(t.v2);
    cbox.extend(t.centroid());
  }
  nodes_[id].box = box;
  if (count <= kLeafSize) {
    nodes_[id].first = first;
    nodes_[id].count = count;
    return id;
  }
  int axis = 0;
  cbox.diagonal().maxCoeff(&axis);
  const std::uint32_t mid = first + count / 2;
  std::nth_element(triangles_.begin() + first, triangles_.begin() + mid,
                   triangles_.begin() + first + count,
                   [axis](const Triangle& a, const Triangle& b) {
                     return a.centroid()[axis] < b.centroid()[axis];
                   });
  const std::uint32_t left = build(first, mid - first);
  const std::uint32_t right = build(mid, first + count - mid);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

std::optional<RayHit> Scene::intersect(const Vec3& origin, const Vec3& dir, double t_min,
                                       double t_max) const {
  if (nodes_.empty()) return std::nullopt;
  const Vec3 inv_d = dir.cwiseInverse();
  std::optional<RayHit> best;
  double best_t = t_max;
  std::array<std::uint32_t, 64> stack;
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& n = nodes_[stack[--top]];
    if (!ray_box(n.box, origin, inv_d, t_min, best_t)) continue;
    if (n.count > 0) {
      for (std::uint32_t i = n.first; i < n.first + n.count; ++i) {
        const auto t = intersect_triangle(triangles_[i], origin, dir);
        if (t && *t > t_min && *t < best_t) {
          best_t = *t;
          best = RayHit{*t, i};
        }
      }
    } else {
      stack[top++] = n.left;
      stack[top++] = n.right;
    }
  }
  return best;
}

bool Scene::occluded(const Vec3& origin, const Vec3& dir, double t_min, double t_max) const {
  if (nodes_.empty()) return false;
  const Vec3 inv_d = dir.cwiseInverse();
  std::array<std::uint32_t, 64> stack;
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& n = nodes_[stack[--top]];
    if (!ray_box(n.box, origin, inv_d, t_min, t_max)) continue;
    if (n.count > 0) {
      for (std::uint32_t i = n.first; i < n.first + n.count; ++i) {
        const auto t = intersect_triangle(triangles_[i], origin, dir);
        if (t && *t > t_min && *t < t_max) return true;
      }
    } else {
      stack[top++] = n.left;
      stack[top++] = n.right;
    }
  }
  return false;
}

Scene Scene::normalized(double diagonal) const {
  if (triangles_.empty()) throw InvalidArgument("cannot normalize an empty scene");
  const Vec3 c = bounds_.center();
  const double s = diagonal / bounds_.diagonal().norm();
  std::vector<Triangle> out = triangles_;
  for (auto& t : out) {
    t.v0 = (t.v0 - c) * s;
    t.v1 = (t.v1 - c) * s;
    t.v2 = (t.v2 - c) * s;
  }
  return Scene(std::move(out));
}

TextureScheme parse_texture_scheme(const std::string& name) {
  if (name == "obj" || name == "none") return TextureScheme::kObj;
  if (name == "checker") return TextureScheme::kChecker;
  if (name == "gradient") return TextureScheme::kGradient;
  throw ConfigError("unknown texture scheme '" + name + "'");
}

Scene apply_texture(const Scene& scene, TextureScheme scheme) {
  if (scheme == TextureScheme::kObj) return scene;
  std::vector<Triangle> tris = scene.triangles();
  const auto& b = scene.bounds();
  const Vec3 extent = b.diagonal().cwiseMax(1e-12);
  for (std::size_t i = 0; i < tris.size(); ++i) {
    if (scheme == TextureScheme::kChecker) {
      tris[i].color = (i % 2 == 0) ? Vec3(0.85, 0.35, 0.2) : Vec3(0.2, 0.45, 0.8);
    } else {
      const Vec3 rel = (tris[i].centroid() - b.min()).cwiseQuotient(extent);
      tris[i].color = (0.1 + 0.8 * rel.array()).matrix().cwiseMax(0.0).cwiseMin(1.0);
    }
  }
  return Scene(std::move(tris));
}

Scene load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<Vec3> verts;
  std::vector<std::optional<Vec3>> vcolors;
  std::vector<Triangle> tris;
  std::optional<Vec3> face_color;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw ParseError("malformed vertex", lineno);
      verts.emplace_back(x, y, z);
      double r, g, bl;
      if (ls >> r >> g >> bl) {
        vcolors.emplace_back(Vec3(r, g, bl));
      } else {
        vcolors.emplace_back(std::nullopt);
      }
    } else if (tok == "fc") {
      double r, g, bl;
      if (!(ls >> r >> g >> bl)) throw ParseError("malformed face color", lineno);
      face_color = Vec3(r, g, bl);
    } else if (tok == "f") {
      std::vector<std::size_t> idx;
      std::string ref;
      while (ls >> ref) {
        const std::string head = ref.substr(0, ref.find('/'));
        long long k = 0;
        try {
          std::size_t used = 0;
          k = std::stoll(head, &used);
          if (used != head.size()) throw std::invalid_argument(head);
        } catch (const std::exception&) {
          throw ParseError("malformed face index '" + ref + "'", lineno);
        }
        const long long n = static_cast<long long>(verts.size());
        const long long resolved = k < 0 ? n + k : k - 1;
        if (k == 0 || resolved < 0 || resolved >= n) {
          throw ParseError("face index " + std::to_string(k) + " out of range", lineno);
        }
        idx.push_back(static_cast<std::size_t>(resolved));
      }
      if (idx.size() < 3) throw ParseError("face with fewer than 3 vertices", lineno);
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        Triangle t{verts[idx[0]], verts[idx[k]], verts[idx[k + 1]]};
        if (face_color) {
          t.color = *face_color;
        } else if (vcolors[idx[0]] && vcolors[idx[k]] && vcolors[idx[k + 1]]) {
          t.color = (*vcolors[idx[0]] + *vcolors[idx[k]] + *vcolors[idx[k + 1]]) / 3.0;
        }
        t.color = t.color.cwiseMax(0.0).cwiseMin(1.0);
        tris.push_back(t);
      }
    }
    // other statements (vn, vt, o, g, s, usemtl, mtllib) are ignored
  }
  return Scene(std::move(tris));
}

void write_obj(const std::vector<Triangle>& triangles, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << std::setprecision(12);
  std::map<std::array<double, 3>, std::size_t> index;
  std::vector<std::array<std::size_t, 3>> faces;
  std::vector<Vec3> colors;
  for (const auto& t : triangles) {
    std::array<std::size_t, 3> f{};
    const Vec3* vs[3] = {&t.v0, &t.v1, &t.v2};
    for (int k = 0; k < 3; ++k) {
      const std::array<double, 3> key{vs[k]->x(), vs[k]->y(), vs[k]->z()};
      auto [it, inserted] = index.emplace(key, index.size() + 1);
      if (inserted) out << "v " << key[0] << ' ' << key[1] << ' ' << key[2] << '\n';
      f[k] = it->second;
    }
    faces.push_back(f);
    colors.push_back(t.color);
  }
  for (std::size_t i = 0; i < faces.size(); ++i) {
    if (i == 0 || colors[i] != colors[i - 1]) {
      out << "fc " << colors[i].x() << ' ' << colors[i].y() << ' ' << colors[i].z() << '\n';
    }
    out << "f " << faces[i][0] << ' ' << faces[i][1] << ' ' << faces[i][2] << '\n';
  }
}

SceneManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene manifest " + path.string());
  SceneManifest m;
  m.name = path.stem().string();
  std::string line;
  std::size_t lineno = 0;
  bool have_mesh = false;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "mesh") {
      m.mesh = path.parent_path() / value;
      have_mesh = true;
    } else if (key == "scale_diagonal") {
      try {
        m.scale_diagonal = std::stod(value);
      } catch (const std::exception&) {
        throw ParseError("bad scale_diagonal", lineno);
      }
      if (!(m.scale_diagonal > 0)) throw ParseError("scale_diagonal must be positive", lineno);
    } else if (key == "texture") {
      m.texture = parse_texture_scheme(value);
    } else if (key == "name") {
      m.name = value;
    } else {
      throw ParseError("unknown manifest key '" + key + "'", lineno);
    }
  }
  if (!have_mesh) throw ConfigError("manifest " + path.string() + " names no mesh");
  return m;
}

Scene load_scene(const std::filesystem::path& manifest_path) {
  const SceneManifest m = read_manifest(manifest_path);
  const Scene raw = load_obj(m.mesh);
  return apply_texture(raw.normalized(m.scale_diagonal), m.texture);
}

namespace primitives {

std::vector<Triangle> icosphere(int subdivisions, double radius) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
                         {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
                         {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<std::array<int, 3>> f = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
      {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
      {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const int a = midpoint(tri[0], tri[1]);
      const int b = midpoint(tri[1], tri[2]);
      const int c = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], a, c});
      next.push_back({tri[1], b, a});
      next.push_back({tri[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  std::vector<Triangle> out;
  out.reserve(f.size());
  for (const auto& tri : f) {
    out.push_back({v[tri[0]] * radius, v[tri[1]] * radius, v[tri[2]] * radius});
  }
  return out;
}

std::vector<Triangle> cube(double side) {
  const double h = side / 2.0;
  const Vec3 c[8] = {{-h, -h, -h}, {h, -h, -h}, {h, h, -h}, {-h, h, -h},
                     {-h, -h, h},  {h, -h, h},  {h, h, h},  {-h, h, h}};
  // outward-facing quads, counter-clockwise seen from outside
  const int quads[6][4] = {{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4},
                           {2, 3, 7, 6}, {1, 2, 6, 5}, {0, 4, 7, 3}};
  std::vector<Triangle> out;
  for (const auto& q : quads) {
    out.push_back({c[q[0]], c[q[1]], c[q[2]]});
    out.push_back({c[q[0]], c[q[2]], c[q[3]]});
  }
  return out;
}

std::vector<Triangle> torus(double major, double minor, int segments_major, int segments_minor) {
  auto point = [&](int i, int j) {
    const double u = 2.0 * M_PI * (i % segments_major) / segments_major;
    const double w = 2.0 * M_PI * (j % segments_minor) / segments_minor;
    return Vec3((major + minor * std::cos(w)) * std::cos(u),
                (major + minor * std::cos(w)) * std::sin(u), minor * std::sin(w));
  };
  std::vector<Triangle> out;
  for (int i = 0; i < segments_major; ++i) {
    for (int j = 0; j < segments_minor; ++j) {
      const Vec3 a = point(i, j), b = point(i + 1, j), c = point(i + 1, j + 1),
                 d = point(i, j + 1);
      out.push_back({a, b, c});
      out.push_back({a, c, d});
    }
  }
  return out;
}

std::vector<Triangle> plane(double half_extent, double height) {
  const double h = half_extent;
  const Vec3 a(-h, -h, height), b(h, -h, height), c(h, h, height), d(-h, h, height);
  // wound so the geometric normal points toward -z
  return {{a, c, b}, {a, d, c}};
}

}  // namespace primitives

SurfaceSamples sample_surface(const Scene& scene, std::size_t n, std::uint64_t seed) {
  const auto& tris = scene.triangles();
  if (tris.empty()) throw InvalidArgument("cannot sample an empty scene");
  std::vector<double> cdf(tris.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < tris.size(); ++i) {
    acc += tris[i].area();
    cdf[i] = acc;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  SurfaceSamples s;
  s.points.reserve(n);
  s.normals.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double r = uni(rng) * acc;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), r);
    const auto& t = tris[std::min<std::size_t>(it - cdf.begin(), tris.size() - 1)];
    double a = uni(rng), b = uni(rng);
    if (a + b > 1.0) {
      a = 1.0 - a;
      b = 1.0 - b;
    }
    s.points.push_back(t.v0 + a * (t.v1 - t.v0) + b * (t.v2 - t.v0));
    s.normals.push_back(t.normal());
  }
  return s;
}

}  // namespace surfelnbp
