#include "fragsched/realign.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "fragsched/error.hpp"

namespace fragsched {

int Level::resource() const {
  int r = shared.resource();
  for (const auto& s : alignment) r += s.resource();
  return r;
}

int GroupPlan::resource() const {
  int r = 0;
  for (const auto& l : levels) r += l.resource();
  return r;
}

void RealignConfig::validate() const {
  if (!(budget_grid_ms > 0.0) || !std::isfinite(budget_grid_ms)) throw ValidationError("budget grid step must be > 0");
}

std::vector<int> candidate_points(const ModelSpec& model, std::span<const Fragment> group, const RealignConfig& cfg) {
  const int n = model.layer_count();
  if (group.empty()) return {};
  int lowest = n;
  for (const auto& f : group) lowest = std::min(lowest, f.start_layer);

  std::vector<int> out;
  if (cfg.all_layers) {
    for (int p = lowest; p <= n; ++p) out.push_back(p);
    return out;
  }
  for (const auto& f : group) out.push_back(f.start_layer);
  for (int p : model.payload_minima()) {
    if (p >= lowest) out.push_back(p);
  }
  out.push_back(n);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<double> budget_grid(double half_budget_ms, double step_ms) {
  std::vector<double> out;
  if (!(half_budget_ms > 0.0)) return out;
  for (int k = 1;; ++k) {
    double d = k * step_ms;
    if (d >= half_budget_ms - 1e-12) break;
    out.push_back(d);
  }
  out.push_back(half_budget_ms);
  return out;
}

namespace {

struct Choice {
  int cost = 0;
  int point = 0;
  std::size_t next = 0;  // first index of the remaining suffix
  double shared_budget = 0.0;
  AllocConfig shared;
  std::vector<AllocConfig> alignment;
  std::vector<double> alignment_budget;
};

StagePlan make_stage(const ModelSpec& model, const Allocator& alloc, Span span, double demand, double budget,
                     const AllocConfig& a, std::vector<std::string> members) {
  StagePlan s;
  s.model_id = model.model_id;
  s.span = span;
  s.demand_rps = demand;
  s.budget_ms = span.empty() ? 0.0 : budget;
  s.alloc = a;
  s.latency_ms = a.is_null() ? 0.0 : alloc.cost().latency_ms(model.model_id, span, a.batch, a.share);
  s.members = std::move(members);
  return s;
}

}  // namespace

GroupPlan realign(std::span<const Fragment> group, const ModelSpec& model, const Allocator& alloc,
                  const RealignConfig& cfg) {
  cfg.validate();
  if (group.empty()) throw DomainError("realign needs a non-empty group");
  for (const auto& f : group) {
    if (f.model_id != model.model_id) throw ValidationError("realign group mixes models");
    if (f.start_layer < 0 || f.start_layer > model.layer_count()) throw DomainError("fragment start layer out of range");
  }

  std::vector<const Fragment*> sorted;
  for (const auto& f : group) sorted.push_back(&f);
  std::sort(sorted.begin(), sorted.end(), [](const Fragment* a, const Fragment* b) {
    return std::tie(a->start_layer, a->budget_ms, a->fragment_id) < std::tie(b->start_layer, b->budget_ms, b->fragment_id);
  });

  const std::size_t n = sorted.size();
  const int out_layer = model.layer_count();
  const std::vector<int> points = candidate_points(model, group, cfg);

  // best[i]: cheapest plan for the suffix sorted[i..n); best[n] is the empty plan.
  std::vector<std::optional<Choice>> best(n + 1);
  best[n] = Choice{};

  for (std::size_t i = n; i-- > 0;) {
    std::optional<Choice> winner;
    for (int p : points) {
      if (p < sorted[i]->start_layer) continue;
      std::size_t k = i;
      while (k < n && sorted[k]->start_layer <= p) ++k;
      if (!best[k]) continue;

      double demand = 0.0;
      double tightest = kUnbounded;
      for (std::size_t j = i; j < k; ++j) {
        demand += sorted[j]->rate_rps;
        tightest = std::min(tightest, sorted[j]->budget_ms / 2.0);
      }
      const Span shared_span{p, out_layer};

      std::vector<double> shared_budgets =
          shared_span.empty() ? std::vector<double>{0.0} : budget_grid(tightest, cfg.budget_grid_ms);
      // Largest shared budget first so that equal-cost ties leave slack in the shared stage.
      for (auto it = shared_budgets.rbegin(); it != shared_budgets.rend(); ++it) {
        const double d_shared = *it;
        auto shared = alloc.min_resource(model.model_id, shared_span, demand, d_shared);
        if (!shared) continue;
        int cost = shared->cost() + best[k]->cost;
        if (winner && cost > winner->cost) continue;

        std::vector<AllocConfig> aligns;
        std::vector<double> align_budgets;
        bool feasible = true;
        for (std::size_t j = i; j < k && feasible; ++j) {
          const Fragment& f = *sorted[j];
          double half = cfg.per_fragment_budget ? f.budget_ms / 2.0 : tightest;
          double d = half - d_shared;
          auto a = alloc.min_resource(model.model_id, {f.start_layer, p}, f.rate_rps, d);
          if (!a) {
            feasible = false;
            break;
          }
          cost += a->cost();
          aligns.push_back(*a);
          align_budgets.push_back(d);
        }
        if (!feasible) continue;
        if (!winner || cost < winner->cost) {
          winner = Choice{cost, p, k, d_shared, *shared, std::move(aligns), std::move(align_budgets)};
        }
      }
    }
    best[i] = std::move(winner);
  }

  if (!best[0]) {
    std::vector<std::string> ids;
    for (const auto* f : sorted) ids.push_back(f->fragment_id);
    std::string msg = "no feasible re-alignment for group {";
    for (std::size_t j = 0; j < ids.size(); ++j) msg += (j ? "," : "") + ids[j];
    throw InfeasibleError(msg + "}", ids);
  }

  GroupPlan plan;
  plan.model_id = model.model_id;
  for (std::size_t i = 0; i < n;) {
    const Choice& c = *best[i];
    Level level;
    level.repartition_point = c.point;
    double demand = 0.0;
    std::vector<std::string> members;
    for (std::size_t j = i; j < c.next; ++j) {
      const Fragment& f = *sorted[j];
      demand += f.rate_rps;
      members.push_back(f.fragment_id);
      level.alignment.push_back(make_stage(model, alloc, {f.start_layer, c.point}, f.rate_rps,
                                           c.alignment_budget[j - i], c.alignment[j - i], {f.fragment_id}));
    }
    level.shared =
        make_stage(model, alloc, {c.point, out_layer}, demand, c.shared_budget, c.shared, std::move(members));
    plan.levels.push_back(std::move(level));
    i = c.next;
  }
  return plan;
}

}  // namespace fragsched
