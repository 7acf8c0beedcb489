#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fragsched/frontier.hpp"
#include "fragsched/grouping.hpp"
#include "fragsched/merge.hpp"
#include "fragsched/placement.hpp"
#include "fragsched/realign.hpp"
#include "fragsched/workload.hpp"

namespace fragsched {

enum class Planner { graft, gslice, gslice_plus, static_alloc, static_plus, optimal };

std::string planner_name(Planner p);
Planner parse_planner(const std::string& name);
/// Static planners partition once at average bandwidth and never re-plan.
bool is_static(Planner p);

struct PlannerConfig {
  MergeConfig merge;
  GroupingConfig group;
  RealignConfig realign;
  int max_batch = kDefaultMaxBatch;
  std::optional<int> instance_cap;
  /// Concurrent group re-alignments.
  int workers = 2;
  /// 0 places on as many GPUs as needed.
  int gpus = 0;
  int gpu_capacity = kDefaultGpuCapacity;
  /// Largest merged fragment count the exhaustive planner accepts.
  int optimal_cap = 8;

  void validate() const;
};

/// Which stages serve a client's requests: alignment stage `alignment` of
/// level `level` in group `group`, then that level's shared stage.
struct ClientRoute {
  std::size_t group = 0;
  std::size_t level = 0;
  std::size_t alignment = 0;

  friend bool operator==(const ClientRoute&, const ClientRoute&) = default;
};

struct ExecutionPlan {
  std::string planner;
  /// Fragments after merging, as the groups see them.
  std::vector<Fragment> fragments;
  std::vector<GroupPlan> groups;
  int total_resource = 0;
  int gpus_used = 0;
  std::map<std::string, ClientRoute> routes;

  /// Sum of share * instances over every stage.
  int recompute_total() const;
};

/// Everything a planner reads besides the fragments.
struct PlanningContext {
  const ModelRegistry& models;
  const Allocator& alloc;
  PlannerConfig cfg;
};

/// Merge, group per model, re-align each group on a worker pool, then place.
ExecutionPlan plan_graft(std::span<const Fragment> frags, const PlanningContext& ctx);

/// Independent allocation per fragment at half its budget, no merging.
ExecutionPlan plan_gslice(std::span<const Fragment> frags, const PlanningContext& ctx);

/// Every uniformity class merged, then independent allocation.
ExecutionPlan plan_gslice_plus(std::span<const Fragment> frags, const PlanningContext& ctx);

/// Partitions each client at its trace's mean bandwidth over [0, horizon_s),
/// then allocates like plan_gslice (or plan_gslice_plus when `plus`).
/// Clients with no feasible partition are listed in `infeasible_clients`.
ExecutionPlan plan_static(std::span<const ClientSpec> clients, double horizon_s, bool plus,
                          const PlanningContext& ctx, std::vector<std::string>* infeasible_clients = nullptr);

/// Exhaustive oracle: merging as plan_graft, then the cheapest partition of the
/// merged fragments into same-model groups of at most M, each re-aligned.
ExecutionPlan plan_optimal(std::span<const Fragment> frags, const PlanningContext& ctx);

/// Runs a non-static planner on already partitioned fragments.
ExecutionPlan run_planner(Planner planner, std::span<const Fragment> frags, const PlanningContext& ctx);

/// Fills per-instance GPU indices; throws InfeasibleError when GPUs run out.
void place(ExecutionPlan& plan, int gpus, int capacity);

nlohmann::json plan_to_json(const ExecutionPlan& plan);

}  // namespace fragsched
