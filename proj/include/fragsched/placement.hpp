#pragma once

#include <string>
#include <vector>

namespace fragsched {

inline constexpr int kDefaultGpuCapacity = 99;

/// One instance to place. Items with the same non-empty affinity prefer to share a GPU.
struct PackItem {
  std::string stage;
  int instance = 0;
  int share = 0;
  std::string affinity;
};

struct GpuBin {
  int gpu_index = 0;
  int capacity = kDefaultGpuCapacity;
  std::vector<std::size_t> items;
  int used = 0;
};

struct Packing {
  std::vector<GpuBin> bins;
  /// GPU index per input item.
  std::vector<int> gpu_of;
};

/// First-fit decreasing by share, ties by (stage, instance). An item goes to
/// the first GPU already holding its affinity partner if one has room,
/// otherwise to the first GPU that fits. gpu_count == 0 opens GPUs on demand.
/// Throws InfeasibleError reporting demand against capacity when items do not fit.
Packing pack(const std::vector<PackItem>& items, int gpu_count, int capacity = kDefaultGpuCapacity);

}  // namespace fragsched
