#include <doctest.h>

#include <random>

#include "fragsched/error.hpp"
#include "fragsched/frontier.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace fragsched;
using namespace fragsched::testing;

namespace {

ModelSpec single(double weight) {
  ModelSpec m;
  m.model_id = "m";
  m.input_bytes = 100;
  m.layers = {{weight, 10}};
  return m;
}

}  // namespace

TEST_CASE("instances cover demand") {
  CHECK(instances_for(100.0, 50.0) == 2);
  CHECK(instances_for(100.0, 40.0) == 3);
  CHECK(instances_for(1.0, 1000.0) == 1);
  CHECK(instances_for(90.0, 30.0) == 3);
}

TEST_CASE("frontier keeps exactly the non-dominated grid points") {
  auto w = make_world({synthetic_model("m", 4, 3)});
  const Span span{1, 4};
  const auto f = pareto_frontier(*w.cost, "m", span);
  REQUIRE(!f.points.empty());
  for (int r = 1; r <= 100; ++r) {
    for (int b = 1; b <= kDefaultMaxBatch; ++b) {
      const double lat = w.cost->latency_ms("m", span, b, r);
      bool dominated = false;
      for (int r2 = 1; r2 < r && !dominated; ++r2) {
        for (int b2 = b; b2 <= kDefaultMaxBatch && !dominated; ++b2) {
          dominated = w.cost->latency_ms("m", span, b2, r2) <= lat;
        }
      }
      const bool kept = std::find(f.points.begin(), f.points.end(), OperatingPoint{r, b, lat}) != f.points.end();
      CHECK(kept == !dominated);
    }
  }
}

TEST_CASE("min_resource matches full-grid search") {
  auto w = make_world({single(10.0)});
  Allocator alloc(*w.cost);
  SUBCASE("200 rps within 25 ms") {
    const auto got = alloc.min_resource("m", {0, 1}, 200.0, 25.0);
    const auto want = brute_min_resource(*w.cost, "m", {0, 1}, 200.0, 25.0);
    REQUIRE(want);
    CHECK(got == want);
  }
  SUBCASE("tiny demand with a loose budget fits the smallest share") {
    const auto got = alloc.min_resource("m", {0, 1}, 1.0, 1e6);
    CHECK(got == AllocConfig{1, 1, 1});
  }
  SUBCASE("empty span is free") { CHECK(alloc.min_resource("m", {1, 1}, 5.0, 1.0) == AllocConfig{}); }
  SUBCASE("budget below the fastest point is infeasible") {
    CHECK_FALSE(alloc.min_resource("m", {0, 1}, 5.0, 9.9));
    CHECK(alloc.min_resource("m", {0, 1}, 5.0, 10.0));
    CHECK_FALSE(alloc.min_resource("m", {0, 1}, 5.0, 0.0));
  }
  SUBCASE("zero demand is a domain error") { CHECK_THROWS_AS(alloc.min_resource("m", {0, 1}, 0.0, 20.0), DomainError); }
}

TEST_CASE("instance cap") {
  auto w = make_world({single(10.0)});
  Allocator capped(*w.cost, kDefaultMaxBatch, 1);
  const auto a = capped.min_resource("m", {0, 1}, 500.0, 40.0);
  const auto want = brute_min_resource(*w.cost, "m", {0, 1}, 500.0, 40.0, kDefaultMaxBatch, 1);
  CHECK(a == want);
  if (a) CHECK(a->instances == 1);
  CHECK_FALSE(capped.min_resource("m", {0, 1}, 5000.0, 11.0));
}

TEST_CASE("free and cached min_resource agree with brute force on random queries") {
  auto w = make_world({synthetic_model("m", 6, 21, 8.0)});
  Allocator alloc(*w.cost);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> layer(0, 6);
  std::uniform_real_distribution<double> demand(1.0, 400.0);
  std::uniform_real_distribution<double> budget(1.0, 80.0);
  for (int i = 0; i < 60; ++i) {
    int a = layer(rng), b = layer(rng);
    if (a > b) std::swap(a, b);
    const double q = std::round(demand(rng)), d = std::round(budget(rng));
    const auto want = brute_min_resource(*w.cost, "m", {a, b}, q, d);
    CHECK(alloc.min_resource("m", {a, b}, q, d) == want);
    if (a < b) CHECK(min_resource(alloc.frontier("m", {a, b}), q, d) == want);
  }
}

TEST_CASE("cost is monotone in budget and demand") {
  auto w = make_world({synthetic_model("m", 5, 8, 6.0)});
  Allocator alloc(*w.cost);
  for (double q : {10.0, 80.0, 300.0}) {
    int prev = std::numeric_limits<int>::max();
    for (double d = 1.0; d <= 60.0; d += 1.0) {
      auto a = alloc.min_resource("m", {0, 5}, q, d);
      int c = a ? a->cost() : std::numeric_limits<int>::max();
      CHECK(c <= prev);
      prev = c;
    }
  }
  for (double d : {10.0, 30.0}) {
    int prev = 0;
    for (double q = 5.0; q <= 400.0; q += 15.0) {
      auto a = alloc.min_resource("m", {0, 5}, q, d);
      int c = a ? a->cost() : std::numeric_limits<int>::max();
      CHECK(c >= prev);
      prev = c;
    }
  }
}
