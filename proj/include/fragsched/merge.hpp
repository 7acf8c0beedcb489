#pragma once

#include <span>
#include <vector>

#include "fragsched/frontier.hpp"
#include "fragsched/workload.hpp"

namespace fragsched {

struct MergeConfig {
  /// Close a merged fragment once its resource margin is at or below this.
  double threshold = 0.2;
  /// Budgets within this many ms of a class's tightest budget count as equal.
  double budget_tolerance_ms = 1.0;
};

/// (achievable - demanded) / demanded.
double resource_margin(double achievable_rps, double demanded_rps);

/// Indices of fragments sharing model and start layer whose budgets lie
/// within `tolerance_ms` of the class's smallest budget. Classes are ordered
/// by (model, start layer, smallest budget).
std::vector<std::vector<std::size_t>> uniformity_classes(std::span<const Fragment> frags, double tolerance_ms);

/// Union of `members`: summed rate, tightest budget, joined ids and clients.
Fragment combine(std::span<const Fragment* const> members);

/// Greedy incremental merging of uniform fragments. Members of a class are
/// added in descending rate order; after each addition the cheapest
/// allocation for the merged suffix at half its budget is found and the
/// merged fragment is closed once its margin drops to the threshold.
/// Output keeps the position of each merged fragment's first member.
std::vector<Fragment> merge_fragments(std::span<const Fragment> frags, const MergeConfig& cfg,
                                      const ModelRegistry& models, const Allocator& alloc);

/// Collapses every uniformity class into one fragment.
std::vector<Fragment> merge_uniform(std::span<const Fragment> frags, double tolerance_ms = 1.0);

}  // namespace fragsched
