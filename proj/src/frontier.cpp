#include "fragsched/frontier.hpp"

#include <algorithm>
#include <cmath>

#include "fragsched/error.hpp"

namespace fragsched {

ParetoFrontier pareto_frontier(const CostModel& cost, std::string_view model, Span span, int max_batch) {
  if (max_batch < 1) throw DomainError("max batch must be >= 1");
  ParetoFrontier f;
  if (span.empty()) return f;

  // best_from[b] = lowest latency seen at any smaller share with batch >= b + 1.
  std::vector<double> best_from(static_cast<std::size_t>(max_batch) + 1, kUnbounded);
  std::vector<double> row(static_cast<std::size_t>(max_batch));
  for (int share = kMinShare; share <= kMaxShare; ++share) {
    for (int b = 1; b <= max_batch; ++b) row[static_cast<std::size_t>(b - 1)] = cost.latency_ms(model, span, b, share);
    for (int b = 1; b <= max_batch; ++b) {
      double lat = row[static_cast<std::size_t>(b - 1)];
      if (std::isinf(lat)) continue;
      if (best_from[static_cast<std::size_t>(b - 1)] <= lat) continue;
      f.points.push_back({share, b, lat});
    }
    for (int b = max_batch; b >= 1; --b) {
      auto i = static_cast<std::size_t>(b - 1);
      best_from[i] = std::min({best_from[i], best_from[i + 1], row[i]});
    }
  }
  return f;
}

int instances_for(double demand_rps, double per_instance_rps) {
  if (std::isinf(per_instance_rps)) return 1;
  if (per_instance_rps <= 0.0) return std::numeric_limits<int>::max();
  double c = std::ceil(demand_rps / per_instance_rps - 1e-9);
  if (c > static_cast<double>(std::numeric_limits<int>::max())) return std::numeric_limits<int>::max();
  return std::max(1, static_cast<int>(c));
}

namespace {

bool better(const AllocConfig& a, const AllocConfig& b) {
  return std::tuple(a.cost(), a.instances, a.share, a.batch) < std::tuple(b.cost(), b.instances, b.share, b.batch);
}

double point_throughput(const OperatingPoint& p) {
  return p.latency_ms <= 0.0 ? kUnbounded : 1000.0 * p.batch / p.latency_ms;
}

}  // namespace

std::optional<AllocConfig> min_resource(const ParetoFrontier& frontier, double demand_rps, double budget_ms,
                                        std::optional<int> instance_cap) {
  if (!(demand_rps > 0.0)) throw DomainError("min_resource needs demand > 0");
  std::optional<AllocConfig> best;
  for (const auto& p : frontier.points) {
    if (p.latency_ms > budget_ms) continue;
    int c = instances_for(demand_rps, point_throughput(p));
    if (instance_cap && c > *instance_cap) continue;
    AllocConfig cand{p.share, p.batch, c};
    if (!best || better(cand, *best)) best = cand;
  }
  return best;
}

// Frontier points bucketed by share, each bucket sorted by batch. Latency is
// non-decreasing in batch for monotone models; `monotone` records whether the
// binary search over a bucket is valid.
struct Allocator::Indexed {
  struct Bucket {
    int share = 0;
    std::vector<OperatingPoint> points;
    std::vector<double> throughput;
    std::vector<double> prefix_max_throughput;
    bool monotone = true;
  };
  ParetoFrontier frontier;
  std::vector<Bucket> buckets;
};

Allocator::Allocator(const CostModel& cost, int max_batch, std::optional<int> instance_cap)
    : cost_(cost), max_batch_(max_batch), instance_cap_(instance_cap) {
  if (max_batch < 1) throw DomainError("max batch must be >= 1");
  if (instance_cap && *instance_cap < 1) throw DomainError("instance cap must be >= 1");
}

Allocator::~Allocator() = default;

const Allocator::Indexed& Allocator::indexed(std::string_view model, Span span) const {
  std::lock_guard lock(mutex_);
  auto key = std::tuple(std::string(model), span.start, span.end);
  auto it = cache_.find(key);
  if (it != cache_.end()) return *it->second;

  auto idx = std::make_unique<Indexed>();
  idx->frontier = pareto_frontier(cost_, model, span, max_batch_);
  for (const auto& p : idx->frontier.points) {
    if (idx->buckets.empty() || idx->buckets.back().share != p.share) idx->buckets.push_back({p.share, {}, {}, {}, true});
    auto& b = idx->buckets.back();
    if (!b.points.empty() && p.latency_ms < b.points.back().latency_ms) b.monotone = false;
    b.points.push_back(p);
    b.throughput.push_back(point_throughput(p));
    double prev = b.prefix_max_throughput.empty() ? 0.0 : b.prefix_max_throughput.back();
    b.prefix_max_throughput.push_back(std::max(prev, b.throughput.back()));
  }
  auto& ref = *idx;
  cache_.emplace(std::move(key), std::move(idx));
  return ref;
}

const ParetoFrontier& Allocator::frontier(std::string_view model, Span span) const {
  return indexed(model, span).frontier;
}

std::optional<AllocConfig> Allocator::min_resource(std::string_view model, Span span, double demand_rps,
                                                   double budget_ms) const {
  if (span.empty()) return AllocConfig{};
  if (!(demand_rps > 0.0)) throw DomainError("min_resource needs demand > 0");
  if (!(budget_ms > 0.0)) return std::nullopt;

  const Indexed& idx = indexed(model, span);
  std::optional<AllocConfig> best;
  for (const auto& bucket : idx.buckets) {
    // Every allocation at this share costs at least `share`.
    if (best && bucket.share > best->cost()) break;
    if (!bucket.monotone) {
      for (std::size_t i = 0; i < bucket.points.size(); ++i) {
        const auto& p = bucket.points[i];
        if (p.latency_ms > budget_ms) continue;
        int c = instances_for(demand_rps, bucket.throughput[i]);
        if (instance_cap_ && c > *instance_cap_) continue;
        AllocConfig cand{p.share, p.batch, c};
        if (!best || better(cand, *best)) best = cand;
      }
      continue;
    }
    auto end = std::upper_bound(bucket.points.begin(), bucket.points.end(), budget_ms,
                                [](double d, const OperatingPoint& p) { return d < p.latency_ms; });
    auto k = static_cast<std::size_t>(end - bucket.points.begin());
    if (k == 0) continue;
    int c = instances_for(demand_rps, bucket.prefix_max_throughput[k - 1]);
    if (instance_cap_ && c > *instance_cap_) continue;
    if (best && std::tuple(bucket.share * c, c, bucket.share) >
                    std::tuple(best->cost(), best->instances, best->share)) {
      continue;
    }
    for (std::size_t i = 0; i < k; ++i) {
      if (instances_for(demand_rps, bucket.throughput[i]) == c) {
        AllocConfig cand{bucket.share, bucket.points[i].batch, c};
        if (!best || better(cand, *best)) best = cand;
        break;
      }
    }
  }
  return best;
}

}  // namespace fragsched
