#include "fragsched/placement.hpp"

#include <algorithm>
#include <numeric>
#include <optional>

#include "fragsched/error.hpp"

namespace fragsched {

Packing pack(const std::vector<PackItem>& items, int gpu_count, int capacity) {
  if (capacity < 1 || capacity > 100) throw ValidationError("gpu capacity must be in 1..100");
  if (gpu_count < 0) throw ValidationError("gpu count must be >= 0");

  long total = 0;
  for (const auto& it : items) total += it.share;
  auto infeasible = [&](const std::string& why) {
    return InfeasibleError(why + " (total demand " + std::to_string(total) + "% vs capacity " +
                               (gpu_count == 0 ? std::string("unbounded")
                                               : std::to_string(static_cast<long>(gpu_count) * capacity) + "%") +
                               ")",
                           {});
  };
  for (const auto& it : items) {
    if (it.share > capacity) throw infeasible("instance of " + it.stage + " needs " + std::to_string(it.share) + "% > per-GPU cap");
  }

  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = items[a];
    const auto& y = items[b];
    if (x.share != y.share) return x.share > y.share;
    return std::tie(x.stage, x.instance) < std::tie(y.stage, y.instance);
  });

  Packing out;
  out.gpu_of.assign(items.size(), -1);
  auto fits = [&](const GpuBin& b, int share) { return b.used + share <= b.capacity; };
  auto put = [&](std::size_t bin, std::size_t item) {
    out.bins[bin].items.push_back(item);
    out.bins[bin].used += items[item].share;
    out.gpu_of[item] = out.bins[bin].gpu_index;
  };
  if (gpu_count > 0) {
    for (int g = 0; g < gpu_count; ++g) out.bins.push_back({g, capacity, {}, 0});
  }

  for (std::size_t item : order) {
    const auto& it = items[item];
    std::optional<std::size_t> target;
    if (!it.affinity.empty()) {
      for (std::size_t b = 0; b < out.bins.size() && !target; ++b) {
        if (!fits(out.bins[b], it.share)) continue;
        for (std::size_t other : out.bins[b].items) {
          if (items[other].affinity == it.affinity) {
            target = b;
            break;
          }
        }
      }
    }
    for (std::size_t b = 0; b < out.bins.size() && !target; ++b) {
      if (fits(out.bins[b], it.share)) target = b;
    }
    if (!target) {
      if (gpu_count > 0) throw infeasible("GPUs exhausted placing " + it.stage);
      out.bins.push_back({static_cast<int>(out.bins.size()), capacity, {}, 0});
      target = out.bins.size() - 1;
    }
    put(*target, item);
  }
  return out;
}

}  // namespace fragsched
