#pragma once

#include <span>
#include <string>
#include <vector>

#include "fragsched/frontier.hpp"
#include "fragsched/workload.hpp"

namespace fragsched {

/// One server stage: `alloc` runs `span` for the member fragments within `budget_ms`.
struct StagePlan {
  std::string model_id;
  Span span;
  double demand_rps = 0.0;
  double budget_ms = 0.0;
  AllocConfig alloc;
  /// Service time of a full batch under `alloc`; 0 for empty spans.
  double latency_ms = 0.0;
  std::vector<std::string> members;
  /// GPU index of each instance, filled in by placement.
  std::vector<int> gpus;

  int resource() const { return alloc.cost(); }
};

/// Fragments re-partitioned at `repartition_point`: each runs its own
/// alignment stage [p_i, point) and then the common shared stage [point, N).
struct Level {
  int repartition_point = 0;
  std::vector<StagePlan> alignment;
  StagePlan shared;

  int resource() const;
};

struct GroupPlan {
  std::string model_id;
  std::vector<Level> levels;

  int resource() const;
};

struct RealignConfig {
  /// Step of the shared-stage budget grid.
  double budget_grid_ms = 1.0;
  /// Scan every layer as a re-partition point instead of the restricted set.
  bool all_layers = false;
  /// Bound each member by its own half budget instead of the group's tightest.
  bool per_fragment_budget = false;

  void validate() const;
};

/// Re-partition points tried for a group: every start layer in the group,
/// every payload-minimizing boundary, and the output boundary. With
/// `all_layers`, every boundary from the smallest start layer on.
std::vector<int> candidate_points(const ModelSpec& model, std::span<const Fragment> group, const RealignConfig& cfg);

/// Shared-stage budgets tried for a half budget of `half_budget_ms`:
/// step, 2*step, ... below the bound, then the bound itself.
std::vector<double> budget_grid(double half_budget_ms, double step_ms);

/// Minimum-resource re-alignment of one group of same-model fragments.
///
/// Fragments are sorted by start layer. For a suffix of that order and a
/// candidate point p, the members starting at or before p form one level; the
/// shared budget is searched on the grid and each member's alignment stage
/// gets the rest of the half budget. The remaining suffix is solved
/// recursively (memoized), and the cheapest total wins; ties keep the
/// smaller point and the larger shared budget.
///
/// Throws InfeasibleError naming the group's fragments when no candidate works.
GroupPlan realign(std::span<const Fragment> group, const ModelSpec& model, const Allocator& alloc,
                  const RealignConfig& cfg);

}  // namespace fragsched
