#include <doctest.h>

#include <map>

#include "fragsched/error.hpp"
#include "fragsched/placement.hpp"

using namespace fragsched;

TEST_CASE("first fit decreasing with affinity") {
  std::vector<PackItem> items{{"g0/l0/s", 0, 60, "g0/l0"}, {"g1/l0/s", 0, 50, "g1/l0"},
                              {"g0/l0/a0", 0, 30, "g0/l0"}, {"g1/l0/a0", 0, 40, "g1/l0"}};
  const auto p = pack(items, 0);
  REQUIRE(p.gpu_of.size() == 4);
  // 60 then 50 open two GPUs; 40 joins its partner on GPU 1, 30 joins GPU 0.
  CHECK(p.gpu_of == std::vector<int>{0, 1, 0, 1});
  for (const auto& b : p.bins) CHECK(b.used <= b.capacity);
}

TEST_CASE("capacity and GPU count") {
  std::vector<PackItem> items;
  for (int i = 0; i < 7; ++i) items.push_back({"s", i, 30, ""});
  const auto unlimited = pack(items, 0, 99);
  CHECK(unlimited.bins.size() == 3);
  std::map<int, int> load;
  for (std::size_t i = 0; i < items.size(); ++i) load[unlimited.gpu_of[i]] += items[i].share;
  for (auto [gpu, used] : load) CHECK(used <= 99);

  CHECK_THROWS_AS(pack(items, 2, 99), InfeasibleError);
  CHECK_NOTHROW(pack(items, 3, 99));
  CHECK_THROWS_AS(pack({{"s", 0, 100, ""}}, 0, 99), InfeasibleError);
  CHECK_NOTHROW(pack({{"s", 0, 100, ""}}, 0, 100));
  CHECK_THROWS_AS(pack(items, -1, 99), ValidationError);
  CHECK_THROWS_AS(pack(items, 0, 0), ValidationError);
  CHECK(pack({}, 0).bins.empty());
}
