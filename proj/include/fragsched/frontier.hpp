#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fragsched/cost_model.hpp"

namespace fragsched {

inline constexpr int kDefaultMaxBatch = 32;

struct OperatingPoint {
  int share = 0;
  int batch = 0;
  double latency_ms = 0.0;

  friend bool operator==(const OperatingPoint&, const OperatingPoint&) = default;
};

/// Efficient (share, batch, latency) points of one span, sorted by share then batch.
struct ParetoFrontier {
  std::vector<OperatingPoint> points;
};

/// Enumerates shares 1..100 and batches 1..max_batch and drops every point for
/// which a strictly smaller share offers at least the batch at no more latency.
/// Points with unbounded latency are never kept.
ParetoFrontier pareto_frontier(const CostModel& cost, std::string_view model, Span span,
                               int max_batch = kDefaultMaxBatch);

/// Per-stage allocation: `instances` copies, each with `share` percent of a GPU,
/// running batches of `batch`. The all-zero value is the null allocation of an empty span.
struct AllocConfig {
  int share = 0;
  int batch = 0;
  int instances = 0;

  int cost() const { return share * instances; }
  bool is_null() const { return instances == 0; }

  friend bool operator==(const AllocConfig&, const AllocConfig&) = default;
};

/// Instances needed so that instances * per_instance_rps covers demand_rps.
int instances_for(double demand_rps, double per_instance_rps);

/// Cheapest allocation on `frontier` with latency <= budget_ms and enough
/// instances for demand_rps. Minimizes share * instances, then instances,
/// then share, then batch. nullopt when nothing fits the budget or the cap.
std::optional<AllocConfig> min_resource(const ParetoFrontier& frontier, double demand_rps, double budget_ms,
                                        std::optional<int> instance_cap = std::nullopt);

/// Thread-safe memo of frontiers over a cost model; answers min_resource for
/// (model, span) queries. Empty spans return the null allocation.
class Allocator {
 public:
  explicit Allocator(const CostModel& cost, int max_batch = kDefaultMaxBatch,
                     std::optional<int> instance_cap = std::nullopt);
  ~Allocator();
  Allocator(const Allocator&) = delete;
  Allocator& operator=(const Allocator&) = delete;

  std::optional<AllocConfig> min_resource(std::string_view model, Span span, double demand_rps,
                                          double budget_ms) const;

  const ParetoFrontier& frontier(std::string_view model, Span span) const;

  const CostModel& cost() const { return cost_; }
  int max_batch() const { return max_batch_; }
  std::optional<int> instance_cap() const { return instance_cap_; }

 private:
  struct Indexed;
  const Indexed& indexed(std::string_view model, Span span) const;

  const CostModel& cost_;
  int max_batch_;
  std::optional<int> instance_cap_;
  mutable std::mutex mutex_;
  mutable std::map<std::tuple<std::string, int, int>, std::unique_ptr<Indexed>, std::less<>> cache_;
};

}  // namespace fragsched
