#include "fragsched/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "fragsched/error.hpp"

namespace fragsched {

void GroupingConfig::validate() const {
  if (group_size < 1) throw ValidationError("group size must be >= 1");
  bool any = false;
  for (double w : factor_weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("factor weights must be finite and >= 0");
    any = any || w > 0.0;
  }
  if (!any) throw ValidationError("factor weights must not all be zero");
}

SimilarityGraph build_graph(std::span<const Fragment> frags, const GroupingConfig& cfg) {
  cfg.validate();
  const std::size_t n = frags.size();
  SimilarityGraph g(n);
  if (n == 0) return g;

  std::vector<std::array<double, 3>> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = {static_cast<double>(frags[i].start_layer), frags[i].budget_ms, frags[i].rate_rps};
  }
  for (std::size_t k = 0; k < 3; ++k) {
    double lo = v[0][k];
    double hi = v[0][k];
    for (const auto& x : v) {
      lo = std::min(lo, x[k]);
      hi = std::max(hi, x[k]);
    }
    for (auto& x : v) x[k] = hi > lo ? (x[k] - lo) / (hi - lo) : 0.0;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        double d = v[i][k] - v[j][k];
        s += cfg.factor_weights[k] * d * d;
      }
      g.set_weight(i, j, std::sqrt(s));
    }
  }
  return g;
}

namespace {

// Variance term of one group from its internal edge count, sum and sum of squares.
double variance_term(double count, double sum, double sum_sq) {
  if (count <= 0.0) return 0.0;
  return std::max(0.0, (sum_sq - sum * sum / count) / count);
}

}  // namespace

double grouping_cost(const SimilarityGraph& graph, const Groups& groups) {
  const std::size_t n = graph.size();
  std::vector<int> owner(n, -1);
  for (std::size_t k = 0; k < groups.size(); ++k) {
    for (std::size_t v : groups[k]) {
      if (v >= n) throw ValidationError("group member " + std::to_string(v) + " is not a graph node");
      if (owner[v] != -1) throw ValidationError("node " + std::to_string(v) + " appears in more than one group");
      owner[v] = static_cast<int>(k);
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    if (owner[v] == -1) throw ValidationError("node " + std::to_string(v) + " is not in any group");
  }

  double total = 0.0;
  for (const auto& members : groups) {
    double cnt = 0.0, sum = 0.0, sq = 0.0;
    for (std::size_t a = 0; a < members.size(); ++a) {
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        double w = graph.weight(members[a], members[b]);
        cnt += 1.0;
        sum += w;
        sq += w * w;
      }
    }
    total += variance_term(cnt, sum, sq);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (owner[i] != owner[j]) total += 2.0 * graph.weight(i, j);
    }
  }
  return total;
}

Groups group_fragments(const SimilarityGraph& graph, std::span<const Fragment> frags, const GroupingConfig& cfg) {
  cfg.validate();
  const std::size_t n = graph.size();
  if (frags.size() != n) throw ValidationError("graph and fragment list differ in size");
  if (n == 0) return {};
  const auto m = static_cast<std::size_t>(cfg.group_size);
  if (n <= m) {
    Groups one(1);
    one[0].resize(n);
    std::iota(one[0].begin(), one[0].end(), 0);
    return one;
  }

  const std::size_t k = (n + m - 1) / m;
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> seeds;
  std::sample(all.begin(), all.end(), std::back_inserter(seeds), static_cast<std::ptrdiff_t>(k), rng);
  std::shuffle(seeds.begin(), seeds.end(), rng);

  Groups groups(k);
  std::vector<bool> assigned(n, false);
  // Running per-group internal edge statistics for the variance term.
  std::vector<double> cnt(k, 0.0), sum(k, 0.0), sq(k, 0.0);
  for (std::size_t g = 0; g < k; ++g) {
    groups[g].push_back(seeds[g]);
    assigned[seeds[g]] = true;
  }

  std::vector<std::size_t> rest;
  for (std::size_t v = 0; v < n; ++v) {
    if (!assigned[v]) rest.push_back(v);
  }
  std::stable_sort(rest.begin(), rest.end(),
                   [&](std::size_t a, std::size_t b) { return frags[a].rate_rps > frags[b].rate_rps; });

  // Sizes must stay reachable: every group except the smallest ends with at least M - 1.
  auto reachable = [&](std::size_t remaining) {
    std::size_t smallest = 0;
    for (std::size_t g = 1; g < k; ++g) {
      if (groups[g].size() < groups[smallest].size()) smallest = g;
    }
    std::size_t need = 0;
    for (std::size_t g = 0; g < k; ++g) {
      if (g != smallest && groups[g].size() + 1 < m) need += m - 1 - groups[g].size();
    }
    return need <= remaining;
  };

  std::vector<double> to_group(k);
  std::vector<double> to_group_sq(k);
  for (std::size_t r = 0; r < rest.size(); ++r) {
    const std::size_t v = rest[r];
    std::fill(to_group.begin(), to_group.end(), 0.0);
    std::fill(to_group_sq.begin(), to_group_sq.end(), 0.0);
    double to_assigned = 0.0;
    for (std::size_t g = 0; g < k; ++g) {
      for (std::size_t u : groups[g]) {
        double w = graph.weight(v, u);
        to_group[g] += w;
        to_group_sq[g] += w * w;
      }
      to_assigned += to_group[g];
    }

    std::size_t best = k;
    double best_delta = 0.0;
    const std::size_t remaining_after = rest.size() - r - 1;
    for (std::size_t g = 0; g < k; ++g) {
      if (groups[g].size() >= m) continue;
      groups[g].push_back(v);
      bool ok = reachable(remaining_after);
      groups[g].pop_back();
      if (!ok) continue;
      double before = variance_term(cnt[g], sum[g], sq[g]);
      double after = variance_term(cnt[g] + static_cast<double>(groups[g].size()), sum[g] + to_group[g],
                                   sq[g] + to_group_sq[g]);
      double delta = (after - before) + 2.0 * (to_assigned - to_group[g]);
      if (best == k || delta < best_delta) {
        best = g;
        best_delta = delta;
      }
    }
    if (best == k) throw Error("grouping ran out of capacity");  // unreachable: k * M >= n
    cnt[best] += static_cast<double>(groups[best].size());
    sum[best] += to_group[best];
    sq[best] += to_group_sq[best];
    groups[best].push_back(v);
  }
  for (auto& g : groups) std::sort(g.begin(), g.end());
  return groups;
}

}  // namespace fragsched
