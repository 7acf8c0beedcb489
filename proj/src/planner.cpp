#include "fragsched/planner.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <exception>
#include <thread>

#include "fragsched/error.hpp"

namespace fragsched {

std::string planner_name(Planner p) {
  switch (p) {
    case Planner::graft: return "graft";
    case Planner::gslice: return "gslice";
    case Planner::gslice_plus: return "gslice+";
    case Planner::static_alloc: return "static";
    case Planner::static_plus: return "static+";
    case Planner::optimal: return "optimal";
  }
  return "?";
}

Planner parse_planner(const std::string& name) {
  for (Planner p : {Planner::graft, Planner::gslice, Planner::gslice_plus, Planner::static_alloc,
                    Planner::static_plus, Planner::optimal}) {
    if (planner_name(p) == name) return p;
  }
  throw ValidationError("unknown planner '" + name + "' (expected graft, gslice, gslice+, static, static+, optimal)");
}

bool is_static(Planner p) { return p == Planner::static_alloc || p == Planner::static_plus; }

void PlannerConfig::validate() const {
  if (merge.threshold < 0.0) throw ValidationError("merge threshold must be >= 0");
  if (merge.budget_tolerance_ms < 0.0) throw ValidationError("budget tolerance must be >= 0");
  group.validate();
  realign.validate();
  if (max_batch < 1) throw ValidationError("max batch must be >= 1");
  if (instance_cap && *instance_cap < 1) throw ValidationError("instance cap must be >= 1");
  if (workers < 1) throw ValidationError("workers must be >= 1");
  if (gpus < 0) throw ValidationError("gpus must be >= 0");
  if (gpu_capacity < 1 || gpu_capacity > 100) throw ValidationError("gpu capacity must be in 1..100");
  if (optimal_cap < 1) throw ValidationError("optimal cap must be >= 1");
}

int ExecutionPlan::recompute_total() const {
  int total = 0;
  for (const auto& g : groups) total += g.resource();
  return total;
}

namespace {

const ModelSpec& model_of(const ModelRegistry& models, const std::string& id) {
  auto it = models.find(id);
  if (it == models.end()) throw ValidationError("unknown model " + id);
  return *it->second;
}

std::string stage_key(std::size_t g, std::size_t l, std::optional<std::size_t> alignment) {
  std::string key = "g" + std::to_string(g) + "/l" + std::to_string(l);
  return alignment ? key + "/a" + std::to_string(*alignment) : key + "/s";
}

// Collects the fragment ids named by every InfeasibleError and rethrows as one error.
[[noreturn]] void rethrow_combined(const std::vector<std::exception_ptr>& errors) {
  std::vector<std::string> ids;
  for (const auto& e : errors) {
    try {
      std::rethrow_exception(e);
    } catch (const InfeasibleError& ie) {
      ids.insert(ids.end(), ie.fragments().begin(), ie.fragments().end());
    }
  }
  std::sort(ids.begin(), ids.end());
  std::string msg = "infeasible fragments:";
  for (const auto& id : ids) msg += " " + id;
  throw InfeasibleError(msg, ids);
}

void finalize(ExecutionPlan& plan, const PlanningContext& ctx) {
  std::map<std::string, const Fragment*> by_id;
  for (const auto& f : plan.fragments) by_id.emplace(f.fragment_id, &f);
  for (std::size_t g = 0; g < plan.groups.size(); ++g) {
    for (std::size_t l = 0; l < plan.groups[g].levels.size(); ++l) {
      const auto& level = plan.groups[g].levels[l];
      for (std::size_t a = 0; a < level.alignment.size(); ++a) {
        const Fragment* f = by_id.at(level.alignment[a].members.front());
        for (const auto& client : f->clients) plan.routes[client] = {g, l, a};
      }
    }
  }
  plan.total_resource = plan.recompute_total();
  place(plan, ctx.cfg.gpus, ctx.cfg.gpu_capacity);
}

// Single level at the fragment's own start layer: empty alignment, whole suffix shared.
GroupPlan independent_group(const Fragment& f, const ModelSpec& model, const Allocator& alloc) {
  const Span span{f.start_layer, model.layer_count()};
  auto a = alloc.min_resource(f.model_id, span, f.rate_rps, f.budget_ms / 2.0);
  if (!a) throw InfeasibleError("fragment " + f.fragment_id + " has no feasible allocation", {f.fragment_id});

  Level level;
  level.repartition_point = f.start_layer;
  StagePlan align;
  align.model_id = f.model_id;
  align.span = {f.start_layer, f.start_layer};
  align.demand_rps = f.rate_rps;
  align.members = {f.fragment_id};
  level.alignment.push_back(std::move(align));

  StagePlan& s = level.shared;
  s.model_id = f.model_id;
  s.span = span;
  s.demand_rps = f.rate_rps;
  s.budget_ms = span.empty() ? 0.0 : f.budget_ms / 2.0;
  s.alloc = *a;
  s.latency_ms = a->is_null() ? 0.0 : alloc.cost().latency_ms(f.model_id, span, a->batch, a->share);
  s.members = {f.fragment_id};

  GroupPlan g;
  g.model_id = f.model_id;
  g.levels.push_back(std::move(level));
  return g;
}

ExecutionPlan independent_plan(std::string name, std::vector<Fragment> frags, const PlanningContext& ctx) {
  ExecutionPlan plan;
  plan.planner = std::move(name);
  std::vector<std::exception_ptr> errors;
  for (const auto& f : frags) {
    try {
      plan.groups.push_back(independent_group(f, model_of(ctx.models, f.model_id), ctx.alloc));
    } catch (const InfeasibleError&) {
      errors.push_back(std::current_exception());
    }
  }
  if (!errors.empty()) rethrow_combined(errors);
  plan.fragments = std::move(frags);
  finalize(plan, ctx);
  return plan;
}

// Fragment indices per model, in model-id order.
std::map<std::string, std::vector<std::size_t>> by_model(std::span<const Fragment> frags) {
  std::map<std::string, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < frags.size(); ++i) out[frags[i].model_id].push_back(i);
  return out;
}

}  // namespace

ExecutionPlan plan_gslice(std::span<const Fragment> frags, const PlanningContext& ctx) {
  ctx.cfg.validate();
  return independent_plan("gslice", {frags.begin(), frags.end()}, ctx);
}

ExecutionPlan plan_gslice_plus(std::span<const Fragment> frags, const PlanningContext& ctx) {
  ctx.cfg.validate();
  return independent_plan("gslice+", merge_uniform(frags, ctx.cfg.merge.budget_tolerance_ms), ctx);
}

ExecutionPlan plan_graft(std::span<const Fragment> frags, const PlanningContext& ctx) {
  ctx.cfg.validate();
  ExecutionPlan plan;
  plan.planner = "graft";
  plan.fragments = merge_fragments(frags, ctx.cfg.merge, ctx.models, ctx.alloc);

  std::vector<std::vector<Fragment>> jobs;
  for (const auto& [model, idx] : by_model(plan.fragments)) {
    std::vector<Fragment> subset;
    for (std::size_t i : idx) subset.push_back(plan.fragments[i]);
    SimilarityGraph graph = build_graph(subset, ctx.cfg.group);
    for (const auto& members : group_fragments(graph, subset, ctx.cfg.group)) {
      std::vector<Fragment> job;
      for (std::size_t m : members) job.push_back(subset[m]);
      jobs.push_back(std::move(job));
    }
  }

  std::vector<GroupPlan> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      try {
        results[j] = realign(jobs[j], model_of(ctx.models, jobs[j].front().model_id), ctx.alloc, ctx.cfg.realign);
      } catch (...) {
        errors[j] = std::current_exception();
      }
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(ctx.cfg.workers), jobs.size());
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(work);
  }

  std::vector<std::exception_ptr> failed;
  for (const auto& e : errors) {
    if (!e) continue;
    try {
      std::rethrow_exception(e);
    } catch (const InfeasibleError&) {
      failed.push_back(e);
    }
  }
  if (!failed.empty()) rethrow_combined(failed);

  plan.groups = std::move(results);
  finalize(plan, ctx);
  return plan;
}

ExecutionPlan plan_optimal(std::span<const Fragment> frags, const PlanningContext& ctx) {
  ctx.cfg.validate();
  ExecutionPlan plan;
  plan.planner = "optimal";
  plan.fragments = merge_fragments(frags, ctx.cfg.merge, ctx.models, ctx.alloc);
  if (plan.fragments.size() > static_cast<std::size_t>(ctx.cfg.optimal_cap)) {
    throw ValidationError("optimal planner refuses " + std::to_string(plan.fragments.size()) +
                          " fragments after merging (cap " + std::to_string(ctx.cfg.optimal_cap) + ")");
  }
  const auto max_group = static_cast<int>(ctx.cfg.group.group_size);

  for (const auto& [model_id, idx] : by_model(plan.fragments)) {
    const ModelSpec& model = model_of(ctx.models, model_id);
    const std::size_t n = idx.size();
    const std::size_t full = (std::size_t{1} << n) - 1;

    std::vector<std::optional<GroupPlan>> single(full + 1);
    for (std::size_t mask = 1; mask <= full; ++mask) {
      if (std::popcount(mask) > max_group) continue;
      std::vector<Fragment> subset;
      for (std::size_t b = 0; b < n; ++b) {
        if (mask >> b & 1U) subset.push_back(plan.fragments[idx[b]]);
      }
      try {
        single[mask] = realign(subset, model, ctx.alloc, ctx.cfg.realign);
      } catch (const InfeasibleError&) {
      }
    }

    // best[mask]: cheapest cover of `mask`; the group holding its lowest member is enumerated.
    std::vector<std::optional<int>> best(full + 1);
    std::vector<std::size_t> pick(full + 1, 0);
    best[0] = 0;
    for (std::size_t mask = 1; mask <= full; ++mask) {
      const std::size_t low = mask & (~mask + 1);
      const std::size_t rest = mask ^ low;
      for (std::size_t sub = rest;; sub = (sub - 1) & rest) {
        const std::size_t g = sub | low;
        if (single[g] && best[mask ^ g]) {
          int cost = single[g]->resource() + *best[mask ^ g];
          if (!best[mask] || cost < *best[mask]) {
            best[mask] = cost;
            pick[mask] = g;
          }
        }
        if (sub == 0) break;
      }
    }
    if (!best[full]) {
      std::vector<std::string> ids;
      for (std::size_t i : idx) ids.push_back(plan.fragments[i].fragment_id);
      throw InfeasibleError("no feasible grouping for model " + model_id, ids);
    }
    for (std::size_t mask = full; mask != 0; mask ^= pick[mask]) plan.groups.push_back(*single[pick[mask]]);
  }
  finalize(plan, ctx);
  return plan;
}

ExecutionPlan plan_static(std::span<const ClientSpec> clients, double horizon_s, bool plus,
                          const PlanningContext& ctx, std::vector<std::string>* infeasible_clients) {
  std::vector<const ClientSpec*> order;
  for (const auto& c : clients) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->client_id < b->client_id; });
  std::vector<Fragment> frags;
  for (const auto* c : order) {
    auto f = partition_client(*c, c->trace->time_average(horizon_s), ctx.alloc.cost());
    if (f) {
      frags.push_back(std::move(*f));
    } else if (infeasible_clients) {
      infeasible_clients->push_back(c->client_id);
    }
  }
  ExecutionPlan plan = plus ? plan_gslice_plus(frags, ctx) : plan_gslice(frags, ctx);
  plan.planner = plus ? "static+" : "static";
  return plan;
}

ExecutionPlan run_planner(Planner planner, std::span<const Fragment> frags, const PlanningContext& ctx) {
  switch (planner) {
    case Planner::graft: return plan_graft(frags, ctx);
    case Planner::gslice: return plan_gslice(frags, ctx);
    case Planner::gslice_plus: return plan_gslice_plus(frags, ctx);
    case Planner::optimal: return plan_optimal(frags, ctx);
    case Planner::static_alloc:
    case Planner::static_plus:
      break;
  }
  throw ValidationError("static planners partition clients themselves; use plan_static");
}

void place(ExecutionPlan& plan, int gpus, int capacity) {
  std::vector<PackItem> items;
  std::vector<StagePlan*> owners;
  for (std::size_t g = 0; g < plan.groups.size(); ++g) {
    for (std::size_t l = 0; l < plan.groups[g].levels.size(); ++l) {
      auto& level = plan.groups[g].levels[l];
      const std::string affinity = "g" + std::to_string(g) + "/l" + std::to_string(l);
      auto add = [&](StagePlan& s, const std::string& key) {
        s.gpus.clear();
        for (int i = 0; i < s.alloc.instances; ++i) {
          items.push_back({key, i, s.alloc.share, affinity});
          owners.push_back(&s);
        }
      };
      for (std::size_t a = 0; a < level.alignment.size(); ++a) add(level.alignment[a], stage_key(g, l, a));
      add(level.shared, stage_key(g, l, std::nullopt));
    }
  }
  Packing packing = pack(items, gpus, capacity);
  for (std::size_t i = 0; i < items.size(); ++i) owners[i]->gpus.push_back(packing.gpu_of[i]);
  plan.gpus_used = 0;
  for (const auto& b : packing.bins) {
    if (!b.items.empty()) ++plan.gpus_used;
  }
}

namespace {

nlohmann::json stage_to_json(const StagePlan& s, const char* role) {
  return {{"role", role},
          {"members", s.members},
          {"span", {s.span.start, s.span.end}},
          {"demand", s.demand_rps},
          {"budget_ms", s.budget_ms},
          {"share", s.alloc.share},
          {"batch", s.alloc.batch},
          {"instances", s.alloc.instances},
          {"latency_ms", s.latency_ms},
          {"gpu", s.gpus}};
}

}  // namespace

nlohmann::json plan_to_json(const ExecutionPlan& plan) {
  nlohmann::json frags = nlohmann::json::array();
  for (const auto& f : plan.fragments) {
    frags.push_back({{"id", f.fragment_id},
                     {"model", f.model_id},
                     {"start_layer", f.start_layer},
                     {"budget_ms", f.budget_ms},
                     {"rate_rps", f.rate_rps},
                     {"clients", f.clients},
                     {"merged", f.merged}});
  }
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : plan.groups) {
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& l : g.levels) {
      nlohmann::json stages = nlohmann::json::array();
      for (const auto& s : l.alignment) stages.push_back(stage_to_json(s, "alignment"));
      stages.push_back(stage_to_json(l.shared, "shared"));
      levels.push_back({{"repartition_point", l.repartition_point}, {"stages", stages}});
    }
    groups.push_back({{"model", g.model_id}, {"resource", g.resource()}, {"levels", levels}});
  }
  return {{"planner", plan.planner},
          {"total_resource", plan.total_resource},
          {"gpus_used", plan.gpus_used},
          {"fragments", frags},
          {"groups", groups}};
}

}  // namespace fragsched
