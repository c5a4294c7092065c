#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surfelnbp/geometry.hpp"
#include "surfelnbp/k_shortest_paths.hpp"

namespace surfelnbp {

struct Viewpoint {
  int id = 0;
  Vec3 position = Vec3::Zero();
  Pose pose;
  double score = 0.0;
  bool visited = false;
};

inline constexpr double kGoldenAngle = 2.399963229728653;

/// Vogel spiral on the hemisphere around `up`: height i / (n - 1) measured
/// from the pole down to the equator, azimuth i * golden angle. Every pose
/// looks at the center.
std::vector<Viewpoint> generate_candidates(const Vec3& center, double radius, int n,
                                           const Vec3& up = Vec3::UnitZ());

/// Drops candidates within `epsilon` (chord distance) of a visited position.
std::vector<Viewpoint> prune_visited(const std::vector<Viewpoint>& candidates,
                                     std::span<const Vec3> visited, double epsilon);

struct GraphEdge {
  int u = 0;
  int v = 0;  // u < v
  double length = 0.0;
};

/// Candidate nodes 0..n-1 plus the current view as node n.
struct ViewGraph {
  std::vector<Vec3> positions;
  std::vector<GraphEdge> edges;
  int current = 0;
};

/// Undirected k-NN graph (ties by index), bridged by closest node pairs until
/// connected.
ViewGraph build_graph(std::span<const Vec3> candidates, const Vec3& current, int k);

/// d / (alpha + beta (U_i + U_j)).
double edge_weight(double d, double u_i, double u_j, double alpha, double beta);

/// Edge lengths coinciding with zero distance are floored so weights stay positive.
WeightedGraph weighted_graph(const ViewGraph& g, std::span<const double> node_scores,
                             double alpha, double beta);

/// Scores of a set of paths: lambda * sum U_bar - (1 - lambda) * sum d_bar,
/// where node scores (start node excluded) and edge lengths are min-max
/// normalized over all elements appearing in the set, and x_bar = 1 when
/// max == min.
std::vector<double> path_scores(const std::vector<std::vector<int>>& paths,
                                std::span<const double> node_scores,
                                std::span<const Vec3> positions, double lambda);

struct PlannerParams {
  int candidates = 64;
  int k = 4;
  std::size_t paths = 5;
  double lambda = 0.5;
  double alpha = 1.0;
  double beta = 1.0;
  double prune_factor = 0.15;  // epsilon_prune = prune_factor * radius
  double tau_stop = 0.05;
};

struct PathPlan {
  std::vector<Viewpoint> nodes;  // nodes[0] is the current view
  int goal = -1;
  double score = 0.0;
  double length = 0.0;
  std::vector<double> candidate_scores;  // J of each searched path
  std::vector<std::vector<int>> candidate_paths;  // candidate ids, start = -1
  bool exhausted = false;
  bool fallback = false;  // goal unreachable, direct two-node plan
};

/// One cycle of next-best-path planning over already scored candidates.
PathPlan plan_nbp(const Pose& current, const std::vector<Viewpoint>& scored,
                  const PlannerParams& p);
/// Greedy baseline: the argmax candidate (ties by lowest id).
PathPlan plan_nbv(const Pose& current, const std::vector<Viewpoint>& scored);

/// n poses at fixed elevation with equal azimuth spacing, looking at the center.
std::vector<Viewpoint> plan_circle(const Vec3& center, double radius, int n,
                                   double elevation_deg, double azimuth0_deg = 0.0);
/// Uniform draw of one candidate; nullopt for an empty set.
std::optional<Viewpoint> plan_random(const std::vector<Viewpoint>& candidates,
                                     std::uint64_t seed);

/// Mean candidate quality below tau_stop, or out of budget, or out of candidates.
bool should_terminate(double mean_quality, double tau_stop, int views_taken, int budget,
                      bool candidates_exhausted);

/// Camera on the sphere around center at the given elevation/azimuth.
Pose shell_pose(const Vec3& center, double radius, double elevation_deg, double azimuth_deg);

}  // namespace surfelnbp
