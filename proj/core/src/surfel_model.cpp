#include "surfelnbp/surfel_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

#include "surfelnbp/errors.hpp"

namespace surfelnbp {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

bool in01(double v) { return v >= 0.0 && v <= 1.0; }

}  // namespace

Surfel make_surfel(const Vec3& center, const Quat& rotation, const Vec2& scale, double opacity,
                   const Vec3& color, double confidence) {
  Surfel s;
  s.center = center;
  s.rotation = rotation.normalized();
  s.scale = scale;
  s.opacity = clamp01(opacity);
  s.color = color.cwiseMax(0.0).cwiseMin(1.0);
  s.confidence = clamp01(confidence);
  return s;
}

Vec3 surfel_normal(const Surfel& s) { return quat_to_rotation(s.rotation).col(2); }

std::string validate_surfel(const Surfel& s) {
  if (!s.center.allFinite()) return "non-finite center";
  if (!s.rotation.coeffs().allFinite() || std::abs(s.rotation.norm() - 1.0) > 1e-6) {
    return "rotation is not a unit quaternion";
  }
  if (!(s.scale.x() > 0) || !(s.scale.y() > 0)) return "non-positive scale";
  if (!in01(s.opacity)) return "opacity outside [0,1]";
  if (!in01(s.confidence)) return "confidence outside [0,1]";
  for (int c = 0; c < 3; ++c) {
    if (!in01(s.color[c])) return "color outside [0,1]";
  }
  return {};
}

SurfelId SurfelModel::insert(std::vector<Surfel> batch) {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (auto why = validate_surfel(batch[i]); !why.empty()) throw InvalidSurfel(why, i);
  }
  const SurfelId first = next_id_;
  surfels_.reserve(surfels_.size() + batch.size());
  for (auto& s : batch) {
    s.id = next_id_++;
    bbox_.extend(s.center);
    surfels_.push_back(std::move(s));
  }
  return first;
}

void SurfelModel::refresh_bounds() {
  bbox_.setEmpty();
  for (const auto& s : surfels_) bbox_.extend(s.center);
}

BoundingShell SurfelModel::bounding_shell(double standoff) const {
  if (surfels_.empty()) throw EmptyModel("bounding shell of an empty model");
  return {bbox_.center(), 0.5 * bbox_.diagonal().norm() + standoff};
}

void SurfelModel::register_view(int view_id, const Vec3& camera_center) {
  view_positions_[view_id] = camera_center;
}

void export_ply(const SurfelModel& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << model.size() << "\n";
  for (const char* p : {"x", "y", "z", "qw", "qx", "qy", "qz", "sx", "sy", "opacity", "red",
                        "green", "blue", "confidence"}) {
    out << "property float " << p << "\n";
  }
  out << "end_header\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& s : model.surfels()) {
    out << s.center.x() << ' ' << s.center.y() << ' ' << s.center.z() << ' ' << s.rotation.w()
        << ' ' << s.rotation.x() << ' ' << s.rotation.y() << ' ' << s.rotation.z() << ' '
        << s.scale.x() << ' ' << s.scale.y() << ' ' << s.opacity << ' ' << s.color.x() << ' '
        << s.color.y() << ' ' << s.color.z() << ' ' << s.confidence << '\n';
  }
  if (!out) throw Error("write failed: " + path.string());
}

SurfelModel import_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  static const std::vector<std::string> expected = {
      "x", "y", "z", "qw", "qx", "qy", "qz", "sx", "sy", "opacity", "red", "green", "blue",
      "confidence"};
  std::string line;
  std::size_t lineno = 0;
  std::size_t count = 0;
  std::vector<std::string> props;
  bool header_done = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (lineno == 1) {
      if (tok != "ply") throw ParseError("missing ply magic", lineno);
      continue;
    }
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw ParseError("only ascii PLY is supported", lineno);
    } else if (tok == "element") {
      std::string name;
      ls >> name >> count;
      if (name != "vertex") throw ParseError("unexpected element " + name, lineno);
    } else if (tok == "property") {
      std::string type, name;
      ls >> type >> name;
      props.push_back(name);
    } else if (tok == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw ParseError("missing end_header", lineno);
  if (props != expected) throw ParseError("unexpected vertex properties", lineno);

  std::vector<Surfel> batch;
  batch.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw ParseError("truncated vertex list", lineno);
    ++lineno;
    std::istringstream ls(line);
    double v[14];
    for (double& x : v) {
      if (!(ls >> x)) throw ParseError("malformed vertex", lineno);
    }
    Surfel s;
    s.center = {v[0], v[1], v[2]};
    // keep stored unit quaternions bit-exact so re-export is idempotent
    s.rotation = Quat(v[3], v[4], v[5], v[6]);
    if (std::abs(s.rotation.norm() - 1.0) > 1e-9) s.rotation.normalize();
    s.scale = {v[7], v[8]};
    s.opacity = v[9];
    s.color = {v[10], v[11], v[12]};
    s.confidence = v[13];
    batch.push_back(std::move(s));
  }
  SurfelModel model;
  try {
    model.insert(std::move(batch));
  } catch (const InvalidSurfel& e) {
    throw ParseError(e.what(), e.index() + 1);
  }
  return model;
}

}  // namespace surfelnbp
