#include "surfelnbp/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <set>

#include "surfelnbp/errors.hpp"
#include "surfelnbp/kdtree.hpp"

namespace surfelnbp {

std::vector<Viewpoint> generate_candidates(const Vec3& center, double radius, int n,
                                           const Vec3& up) {
  if (!(radius > 0)) throw InvalidArgument("candidates: radius must be positive");
  if (n < 1) throw InvalidArgument("candidates: n must be >= 1");
  const Vec3 z = up.normalized();
  const Vec3 helper = std::abs(z.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  const Vec3 x = (helper - z * z.dot(helper)).normalized();
  const Vec3 y = z.cross(x);
  std::vector<Viewpoint> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double h = n == 1 ? 1.0 : 1.0 - static_cast<double>(i) / (n - 1);
    const double ring = std::sqrt(std::max(0.0, 1.0 - h * h));
    const double phi = i * kGoldenAngle;
    Viewpoint v;
    v.id = i;
    v.position = center + radius * (ring * std::cos(phi) * x + ring * std::sin(phi) * y + h * z);
    v.pose = look_at(v.position, center, z);
    out.push_back(v);
  }
  return out;
}

std::vector<Viewpoint> prune_visited(const std::vector<Viewpoint>& candidates,
                                     std::span<const Vec3> visited, double epsilon) {
  std::vector<Viewpoint> out;
  for (const auto& c : candidates) {
    const bool near = std::any_of(visited.begin(), visited.end(), [&](const Vec3& p) {
      return (p - c.position).norm() <= epsilon;
    });
    if (!near) out.push_back(c);
  }
  return out;
}

namespace {

struct DisjointSet {
  std::vector<int> parent;
  explicit DisjointSet(int n) : parent(static_cast<std::size_t>(n)) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[std::max(a, b)] = std::min(a, b);
    return true;
  }
};

}  // namespace

ViewGraph build_graph(std::span<const Vec3> candidates, const Vec3& current, int k) {
  if (k < 1) throw InvalidArgument("graph: k must be >= 1");
  ViewGraph g;
  g.positions.assign(candidates.begin(), candidates.end());
  g.positions.push_back(current);
  g.current = static_cast<int>(candidates.size());
  const int n = static_cast<int>(g.positions.size());
  if (n < 2) return g;

  std::set<std::pair<int, int>> edges;
  const KdTree tree(g.positions);
  for (int i = 0; i < n; ++i) {
    for (const auto& nb : tree.knn(g.positions[i], static_cast<std::size_t>(k), i)) {
      const int j = static_cast<int>(nb.index);
      edges.insert({std::min(i, j), std::max(i, j)});
    }
  }
  DisjointSet ds(n);
  for (const auto& [u, v] : edges) ds.unite(u, v);
  // bridge components by their closest pair until connected
  for (;;) {
    double best = std::numeric_limits<double>::infinity();
    int bu = -1, bv = -1;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (ds.find(i) == ds.find(j)) continue;
        const double d = (g.positions[i] - g.positions[j]).norm();
        if (d < best) {
          best = d;
          bu = i;
          bv = j;
        }
      }
    }
    if (bu < 0) break;
    edges.insert({bu, bv});
    ds.unite(bu, bv);
  }
  for (const auto& [u, v] : edges) {
    g.edges.push_back({u, v, (g.positions[u] - g.positions[v]).norm()});
  }
  return g;
}

double edge_weight(double d, double u_i, double u_j, double alpha, double beta) {
  if (!(alpha > 0)) throw ConfigError("edge weight: alpha must be positive");
  if (beta < 0) throw ConfigError("edge weight: beta must be non-negative");
  return d / (alpha + beta * (u_i + u_j));
}

WeightedGraph weighted_graph(const ViewGraph& g, std::span<const double> node_scores,
                             double alpha, double beta) {
  if (node_scores.size() != g.positions.size()) {
    throw InvalidArgument("weighted graph: one score per node required");
  }
  WeightedGraph wg(static_cast<int>(g.positions.size()));
  for (const auto& e : g.edges) {
    const double w = edge_weight(std::max(e.length, 1e-12), node_scores[e.u], node_scores[e.v],
                                 alpha, beta);
    wg.add_edge(e.u, e.v, std::max(w, 1e-15));
  }
  return wg;
}

std::vector<double> path_scores(const std::vector<std::vector<int>>& paths,
                                std::span<const double> node_scores,
                                std::span<const Vec3> positions, double lambda) {
  if (lambda < 0 || lambda > 1) throw InvalidArgument("path score: lambda outside [0, 1]");
  double u_lo = std::numeric_limits<double>::infinity(), u_hi = -u_lo;
  double d_lo = u_lo, d_hi = -u_lo;
  for (const auto& p : paths) {
    for (std::size_t i = 1; i < p.size(); ++i) {
      const double u = node_scores[p[i]];
      const double d = (positions[p[i]] - positions[p[i - 1]]).norm();
      u_lo = std::min(u_lo, u);
      u_hi = std::max(u_hi, u);
      d_lo = std::min(d_lo, d);
      d_hi = std::max(d_hi, d);
    }
  }
  auto bar = [](double x, double lo, double hi) { return hi > lo ? (x - lo) / (hi - lo) : 1.0; };
  std::vector<double> out;
  for (const auto& p : paths) {
    double su = 0.0, sd = 0.0;
    for (std::size_t i = 1; i < p.size(); ++i) {
      su += bar(node_scores[p[i]], u_lo, u_hi);
      sd += bar((positions[p[i]] - positions[p[i - 1]]).norm(), d_lo, d_hi);
    }
    out.push_back(lambda * su - (1.0 - lambda) * sd);
  }
  return out;
}

namespace {

std::size_t argmax_score(const std::vector<Viewpoint>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i].score > v[best].score || (v[i].score == v[best].score && v[i].id < v[best].id)) {
      best = i;
    }
  }
  return best;
}

Viewpoint current_node(const Pose& current) {
  Viewpoint v;
  v.id = -1;
  v.position = current.translation;
  v.pose = current;
  v.visited = true;
  return v;
}

double chain_length(const std::vector<Viewpoint>& nodes) {
  double len = 0.0;
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    len += (nodes[i].position - nodes[i - 1].position).norm();
  }
  return len;
}

}  // namespace

PathPlan plan_nbp(const Pose& current, const std::vector<Viewpoint>& scored,
                  const PlannerParams& p) {
  PathPlan plan;
  if (scored.empty()) {
    plan.exhausted = true;
    return plan;
  }
  const std::size_t goal = argmax_score(scored);
  plan.goal = scored[goal].id;

  std::vector<Vec3> pos;
  std::vector<double> scores;
  for (const auto& v : scored) {
    pos.push_back(v.position);
    scores.push_back(v.score);
  }
  const ViewGraph g = build_graph(pos, current.translation, p.k);
  scores.push_back(0.0);  // the current view is already observed
  const WeightedGraph wg = weighted_graph(g, scores, p.alpha, p.beta);
  const auto found = k_shortest_paths(wg, g.current, static_cast<int>(goal), p.paths);

  plan.nodes.push_back(current_node(current));
  if (found.empty()) {
    plan.fallback = true;
    plan.nodes.push_back(scored[goal]);
    plan.score = 0.0;
    plan.length = chain_length(plan.nodes);
    return plan;
  }
  std::vector<std::vector<int>> paths;
  for (const auto& f : found) paths.push_back(f.nodes);
  plan.candidate_scores = path_scores(paths, scores, g.positions, p.lambda);
  std::size_t best = 0;
  for (std::size_t i = 1; i < paths.size(); ++i) {
    if (plan.candidate_scores[i] > plan.candidate_scores[best]) best = i;
  }
  for (const auto& path : paths) {
    std::vector<int> ids;
    for (const int n : path) ids.push_back(n == g.current ? -1 : scored[n].id);
    plan.candidate_paths.push_back(std::move(ids));
  }
  for (std::size_t i = 1; i < paths[best].size(); ++i) plan.nodes.push_back(scored[paths[best][i]]);
  plan.score = plan.candidate_scores[best];
  plan.length = chain_length(plan.nodes);
  return plan;
}

PathPlan plan_nbv(const Pose& current, const std::vector<Viewpoint>& scored) {
  PathPlan plan;
  if (scored.empty()) {
    plan.exhausted = true;
    return plan;
  }
  const std::size_t goal = argmax_score(scored);
  plan.goal = scored[goal].id;
  plan.nodes = {current_node(current), scored[goal]};
  plan.score = scored[goal].score;
  plan.length = chain_length(plan.nodes);
  return plan;
}

Pose shell_pose(const Vec3& center, double radius, double elevation_deg, double azimuth_deg) {
  const double el = elevation_deg * std::numbers::pi / 180.0;
  const double az = azimuth_deg * std::numbers::pi / 180.0;
  const Vec3 eye = center + radius * Vec3(std::cos(el) * std::cos(az),
                                          std::cos(el) * std::sin(az), std::sin(el));
  return look_at(eye, center);
}

std::vector<Viewpoint> plan_circle(const Vec3& center, double radius, int n,
                                   double elevation_deg, double azimuth0_deg) {
  if (n < 1) throw InvalidArgument("circle: n must be >= 1");
  std::vector<Viewpoint> out;
  for (int i = 0; i < n; ++i) {
    Viewpoint v;
    v.id = i;
    v.pose = shell_pose(center, radius, elevation_deg, azimuth0_deg + 360.0 * i / n);
    v.position = v.pose.translation;
    out.push_back(v);
  }
  return out;
}

std::optional<Viewpoint> plan_random(const std::vector<Viewpoint>& candidates,
                                     std::uint64_t seed) {
  if (candidates.empty()) return std::nullopt;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  return candidates[pick(rng)];
}

bool should_terminate(double mean_quality, double tau_stop, int views_taken, int budget,
                      bool candidates_exhausted) {
  return candidates_exhausted || views_taken >= budget || mean_quality < tau_stop;
}

}  // namespace surfelnbp
