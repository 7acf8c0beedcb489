#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "fragsched/workload.hpp"

namespace fragsched {

struct GroupingConfig {
  int group_size = 5;
  /// Weights on (start layer, budget, rate) in the similarity distance.
  std::array<double, 3> factor_weights{1.0, 1.0, 1.0};
  std::uint64_t seed = 0;

  void validate() const;
};

/// Complete graph over fragments. Each property is min-max normalized across
/// the fragments; edge weight is the weighted Euclidean distance.
class SimilarityGraph {
 public:
  SimilarityGraph() = default;
  explicit SimilarityGraph(std::size_t n) : n_(n), w_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double weight(std::size_t i, std::size_t j) const { return w_[i * n_ + j]; }
  void set_weight(std::size_t i, std::size_t j, double w) {
    w_[i * n_ + j] = w;
    w_[j * n_ + i] = w;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> w_;
};

using Groups = std::vector<std::vector<std::size_t>>;

SimilarityGraph build_graph(std::span<const Fragment> frags, const GroupingConfig& cfg);

/// Sum over groups of the internal edge-weight variance plus the weight of
/// every edge leaving the group. A cross edge therefore counts once for each
/// of its two groups. Throws unless `groups` is a disjoint cover of the nodes.
double grouping_cost(const SimilarityGraph& graph, const Groups& groups);

/// Greedy balanced grouping: ceil(n / M) random seeds, then the remaining
/// fragments in descending rate order, each joining the open group whose cost
/// rises least. Groups hold at most M members and all but at most one hold at
/// least M - 1.
Groups group_fragments(const SimilarityGraph& graph, std::span<const Fragment> frags, const GroupingConfig& cfg);

}  // namespace fragsched
