#include "surfelnbp/k_shortest_paths.hpp"

#include <algorithm>
#include <optional>
#include <queue>
#include <set>

#include "surfelnbp/errors.hpp"

namespace surfelnbp {

WeightedGraph::WeightedGraph(int nodes) {
  if (nodes < 0) throw InvalidArgument("graph: negative node count");
  adj_.resize(static_cast<std::size_t>(nodes));
}

void WeightedGraph::add_edge(int u, int v, double weight) {
  if (u < 0 || v < 0 || u >= size() || v >= size()) throw InvalidArgument("graph: bad node id");
  if (u == v) throw InvalidArgument("graph: self-loop");
  if (!(weight > 0)) throw InvalidArgument("graph: edge weight must be positive");
  auto set = [&](int a, int b) {
    for (auto& arc : adj_[a]) {
      if (arc.to == b) {
        arc.weight = weight;
        return;
      }
    }
    adj_[a].push_back({b, weight});
  };
  set(u, v);
  set(v, u);
}

bool WeightedGraph::has_edge(int u, int v) const {
  if (u < 0 || u >= size()) return false;
  return std::any_of(adj_[u].begin(), adj_[u].end(), [v](const Arc& a) { return a.to == v; });
}

double WeightedGraph::weight(int u, int v) const {
  for (const auto& a : adj_.at(u)) {
    if (a.to == v) return a.weight;
  }
  throw InvalidArgument("graph: no edge " + std::to_string(u) + "-" + std::to_string(v));
}

double path_weight(const WeightedGraph& g, const std::vector<int>& nodes) {
  double w = 0.0;
  for (std::size_t i = 1; i < nodes.size(); ++i) w += g.weight(nodes[i - 1], nodes[i]);
  return w;
}

bool path_less(const WeightedPath& a, const WeightedPath& b) {
  if (a.weight != b.weight) return a.weight < b.weight;
  return a.nodes < b.nodes;
}

namespace {

/// Dijkstra over (distance, path) labels so that ties resolve to the
/// lexicographically smallest path. Distances start at `offset`, which keeps
/// spur sums identical to summing the full path front to back.
std::optional<WeightedPath> shortest(const WeightedGraph& g, const std::vector<int>& prefix,
                                     double offset, int target,
                                     const std::vector<char>& blocked_nodes,
                                     const std::set<std::pair<int, int>>& blocked_edges) {
  struct Label {
    double dist;
    std::vector<int> path;
    bool operator>(const Label& o) const {
      if (dist != o.dist) return dist > o.dist;
      return path > o.path;
    }
  };
  std::priority_queue<Label, std::vector<Label>, std::greater<>> pq;
  std::vector<char> done(static_cast<std::size_t>(g.size()), 0);
  pq.push({offset, prefix});
  while (!pq.empty()) {
    Label cur = pq.top();
    pq.pop();
    const int u = cur.path.back();
    if (done[u]) continue;
    done[u] = 1;
    if (u == target) return WeightedPath{std::move(cur.path), cur.dist};
    for (const auto& arc : g.neighbors(u)) {
      if (done[arc.to] || blocked_nodes[arc.to]) continue;
      if (blocked_edges.count({u, arc.to})) continue;
      Label next{cur.dist + arc.weight, cur.path};
      next.path.push_back(arc.to);
      pq.push(std::move(next));
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<WeightedPath> k_shortest_paths(const WeightedGraph& g, int source, int target,
                                           std::size_t m) {
  if (source < 0 || target < 0 || source >= g.size() || target >= g.size()) {
    throw InvalidArgument("k_shortest_paths: node out of range");
  }
  std::vector<WeightedPath> found;
  if (m == 0) return found;
  const std::vector<char> none(static_cast<std::size_t>(g.size()), 0);
  if (source == target) {
    found.push_back({{source}, 0.0});
    return found;
  }
  auto first = shortest(g, {source}, 0.0, target, none, {});
  if (!first) return found;
  found.push_back(std::move(*first));

  auto cmp = [](const WeightedPath& a, const WeightedPath& b) { return path_less(a, b); };
  std::set<WeightedPath, decltype(cmp)> candidates(cmp);
  while (found.size() < m) {
    const std::vector<int>& last = found.back().nodes;
    for (std::size_t i = 0; i + 1 < last.size(); ++i) {
      const std::vector<int> root(last.begin(), last.begin() + static_cast<std::ptrdiff_t>(i + 1));
      std::set<std::pair<int, int>> blocked_edges;
      for (const auto& p : found) {
        if (p.nodes.size() > i + 1 && std::equal(root.begin(), root.end(), p.nodes.begin())) {
          blocked_edges.insert({p.nodes[i], p.nodes[i + 1]});
        }
      }
      std::vector<char> blocked_nodes = none;
      for (std::size_t r = 0; r < i; ++r) blocked_nodes[root[r]] = 1;
      const double offset = path_weight(g, root);
      auto spur = shortest(g, root, offset, target, blocked_nodes, blocked_edges);
      if (spur) candidates.insert(std::move(*spur));
    }
    if (candidates.empty()) break;
    found.push_back(*candidates.begin());
    candidates.erase(candidates.begin());
  }
  return found;
}

}  // namespace surfelnbp
