#pragma once

#include <cstddef>
#include <vector>

namespace surfelnbp {

/// Undirected graph with strictly positive edge weights and no multi-edges.
class WeightedGraph {
 public:
  struct Arc {
    int to;
    double weight;
  };

  explicit WeightedGraph(int nodes = 0);

  int size() const { return static_cast<int>(adj_.size()); }
  /// Replaces the weight when the edge exists. Throws on self-loops and
  /// non-positive weights.
  void add_edge(int u, int v, double weight);
  bool has_edge(int u, int v) const;
  double weight(int u, int v) const;
  const std::vector<Arc>& neighbors(int u) const { return adj_.at(u); }

 private:
  std::vector<std::vector<Arc>> adj_;
};

struct WeightedPath {
  std::vector<int> nodes;
  double weight = 0.0;  // edge weights summed front to back
};

/// Sum of the edge weights along the path, in path order.
double path_weight(const WeightedGraph& g, const std::vector<int>& nodes);

/// Strict order used everywhere: weight, then lexicographic node sequence.
bool path_less(const WeightedPath& a, const WeightedPath& b);

/// Up to m loopless paths from source to target in increasing path_less
/// order (Yen). Empty when the target is unreachable.
std::vector<WeightedPath> k_shortest_paths(const WeightedGraph& g, int source, int target,
                                           std::size_t m);

}  // namespace surfelnbp
