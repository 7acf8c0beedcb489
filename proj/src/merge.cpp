#include "fragsched/merge.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "fragsched/error.hpp"

namespace fragsched {

double resource_margin(double achievable_rps, double demanded_rps) {
  if (!(demanded_rps > 0.0)) throw DomainError("resource margin needs demanded throughput > 0");
  if (achievable_rps < demanded_rps) {
    throw InfeasibleError("allocation delivers " + std::to_string(achievable_rps) + " rps for a demand of " +
                              std::to_string(demanded_rps),
                          {});
  }
  return (achievable_rps - demanded_rps) / demanded_rps;
}

std::vector<std::vector<std::size_t>> uniformity_classes(std::span<const Fragment> frags, double tolerance_ms) {
  std::map<std::pair<std::string, int>, std::vector<std::size_t>> by_point;
  for (std::size_t i = 0; i < frags.size(); ++i) by_point[{frags[i].model_id, frags[i].start_layer}].push_back(i);

  std::vector<std::vector<std::size_t>> classes;
  for (auto& [key, idx] : by_point) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return frags[a].budget_ms < frags[b].budget_ms; });
    double anchor = 0.0;
    for (std::size_t i : idx) {
      if (classes.empty() || i == idx.front() || frags[i].budget_ms - anchor > tolerance_ms) {
        classes.emplace_back();
        anchor = frags[i].budget_ms;
      }
      classes.back().push_back(i);
    }
  }
  return classes;
}

Fragment combine(std::span<const Fragment* const> members) {
  if (members.empty()) throw DomainError("cannot combine zero fragments");
  if (members.size() == 1) return *members.front();
  Fragment out;
  out.model_id = members.front()->model_id;
  out.start_layer = members.front()->start_layer;
  out.budget_ms = members.front()->budget_ms;
  out.merged = true;
  std::vector<std::string> ids;
  for (const Fragment* f : members) {
    out.budget_ms = std::min(out.budget_ms, f->budget_ms);
    out.rate_rps += f->rate_rps;
    ids.push_back(f->fragment_id);
    out.clients.insert(out.clients.end(), f->clients.begin(), f->clients.end());
  }
  std::sort(ids.begin(), ids.end());
  std::sort(out.clients.begin(), out.clients.end());
  for (const auto& id : ids) out.fragment_id += (out.fragment_id.empty() ? "" : "+") + id;
  return out;
}

namespace {

const ModelSpec& model_of(const ModelRegistry& models, const std::string& id) {
  auto it = models.find(id);
  if (it == models.end()) throw ValidationError("unknown model " + id);
  return *it->second;
}

// Achievable throughput of the cheapest allocation for `f`, or nullopt if none fits.
std::optional<double> achievable_rps(const Fragment& f, const ModelSpec& model, const Allocator& alloc) {
  Span span{f.start_layer, model.layer_count()};
  auto a = alloc.min_resource(f.model_id, span, f.rate_rps, f.budget_ms / 2.0);
  if (!a) return std::nullopt;
  if (a->is_null()) return kUnbounded;
  return a->instances * throughput_rps(alloc.cost(), f.model_id, span, a->batch, a->share);
}

}  // namespace

std::vector<Fragment> merge_fragments(std::span<const Fragment> frags, const MergeConfig& cfg,
                                      const ModelRegistry& models, const Allocator& alloc) {
  if (cfg.threshold < 0.0) throw DomainError("merge threshold must be >= 0");

  std::vector<std::pair<std::size_t, Fragment>> placed;
  for (const auto& cls : uniformity_classes(frags, cfg.budget_tolerance_ms)) {
    const ModelSpec& model = model_of(models, frags[cls.front()].model_id);
    for (std::size_t i : cls) {
      if (!achievable_rps(frags[i], model, alloc)) {
        throw InfeasibleError("fragment " + frags[i].fragment_id + " has no feasible allocation",
                              {frags[i].fragment_id});
      }
    }
    if (cls.size() == 1) {
      placed.emplace_back(cls.front(), frags[cls.front()]);
      continue;
    }

    std::vector<std::size_t> order = cls;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return frags[a].rate_rps > frags[b].rate_rps; });

    std::vector<const Fragment*> current;
    auto close = [&] {
      if (current.empty()) return;
      std::size_t first = frags.size();
      for (const Fragment* f : current) first = std::min(first, static_cast<std::size_t>(f - frags.data()));
      placed.emplace_back(first, combine(current));
      current.clear();
    };

    for (std::size_t i : order) {
      current.push_back(&frags[i]);
      Fragment merged = combine(current);
      auto achievable = achievable_rps(merged, model, alloc);
      if (!achievable) {
        // The addition broke feasibility: close what we had and restart from this member.
        current.pop_back();
        close();
        current.push_back(&frags[i]);
        merged = frags[i];
        achievable = achievable_rps(merged, model, alloc);
      }
      if (resource_margin(*achievable, merged.rate_rps) <= cfg.threshold) close();
    }
    close();
  }

  std::sort(placed.begin(), placed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Fragment> out;
  out.reserve(placed.size());
  for (auto& [pos, f] : placed) out.push_back(std::move(f));
  return out;
}

std::vector<Fragment> merge_uniform(std::span<const Fragment> frags, double tolerance_ms) {
  std::vector<std::pair<std::size_t, Fragment>> placed;
  for (const auto& cls : uniformity_classes(frags, tolerance_ms)) {
    std::vector<const Fragment*> members;
    for (std::size_t i : cls) members.push_back(&frags[i]);
    placed.emplace_back(*std::min_element(cls.begin(), cls.end()), combine(members));
  }
  std::sort(placed.begin(), placed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Fragment> out;
  for (auto& [pos, f] : placed) out.push_back(std::move(f));
  return out;
}

}  // namespace fragsched
