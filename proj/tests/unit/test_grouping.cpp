#include <doctest.h>

#include <cmath>
#include <random>

#include "fragsched/error.hpp"
#include "fragsched/grouping.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace fragsched;
using namespace fragsched::testing;

namespace {

void check_partition(const Groups& g, std::size_t n, std::size_t m) {
  std::vector<int> seen(n, 0);
  std::size_t small = 0;
  for (const auto& grp : g) {
    CHECK(grp.size() <= m);
    if (grp.size() + 1 < m) ++small;
    for (auto v : grp) ++seen.at(v);
  }
  for (int s : seen) CHECK(s == 1);
  CHECK(small <= 1);
}

/// Internal-variance plus twice-counted cross weight, written out directly.
double direct_cost(const SimilarityGraph& graph, const Groups& groups) {
  std::vector<int> owner(graph.size());
  for (std::size_t k = 0; k < groups.size(); ++k) {
    for (auto v : groups[k]) owner[v] = static_cast<int>(k);
  }
  double total = 0.0;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    std::vector<double> internal;
    for (std::size_t i = 0; i < graph.size(); ++i) {
      for (std::size_t j = i + 1; j < graph.size(); ++j) {
        const bool in_i = owner[i] == static_cast<int>(k), in_j = owner[j] == static_cast<int>(k);
        if (in_i && in_j) internal.push_back(graph.weight(i, j));
        if (in_i != in_j) total += graph.weight(i, j);
      }
    }
    if (!internal.empty()) {
      double mean = 0.0;
      for (double x : internal) mean += x;
      mean /= static_cast<double>(internal.size());
      double var = 0.0;
      for (double x : internal) var += (x - mean) * (x - mean);
      total += var / static_cast<double>(internal.size());
    }
  }
  return total;
}

}  // namespace

TEST_CASE("graph weights are normalized weighted distances") {
  std::vector<Fragment> f{make_fragment("a", "m", 0, 10, 5), make_fragment("b", "m", 4, 30, 25),
                          make_fragment("c", "m", 2, 30, 10), make_fragment("d", "m", 0, 10, 5)};
  GroupingConfig cfg;
  const auto g = build_graph(f, cfg);
  CHECK(g.weight(0, 3) == 0.0);
  CHECK(g.weight(0, 1) == doctest::Approx(std::sqrt(3.0)));
  const double dp = 0.5, dt = 1.0, dq = 0.25;
  CHECK(g.weight(0, 2) == doctest::Approx(std::sqrt(dp * dp + dt * dt + dq * dq)));
  CHECK(g.weight(2, 0) == g.weight(0, 2));

  cfg.factor_weights = {2.0, 0.0, 1.0};
  const auto h = build_graph(f, cfg);
  CHECK(h.weight(0, 2) == doctest::Approx(std::sqrt(2 * dp * dp + dq * dq)));

  std::vector<Fragment> same{make_fragment("a", "m", 3, 10, 5), make_fragment("b", "m", 3, 10, 5)};
  CHECK(build_graph(same, GroupingConfig{}).weight(0, 1) == 0.0);
}

TEST_CASE("grouping config validation") {
  GroupingConfig cfg;
  cfg.group_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.group_size = 3;
  cfg.factor_weights = {0.0, 0.0, 0.0};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.factor_weights = {1.0, -1.0, 0.0};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("grouping cost") {
  SimilarityGraph g(4);
  const double w[4][4] = {{0, 1, 2, 3}, {1, 0, 4, 5}, {2, 4, 0, 6}, {3, 5, 6, 0}};
  for (int i = 0; i < 4; ++i) {
    for (int j = i + 1; j < 4; ++j) g.set_weight(i, j, w[i][j]);
  }
  SUBCASE("single group has no cross term") {
    const double mean = 21.0 / 6.0;
    double var = 0.0;
    for (double x : {1.0, 2.0, 3.0, 4.0, 5.0, 6.0}) var += (x - mean) * (x - mean);
    CHECK(grouping_cost(g, {{0, 1, 2, 3}}) == doctest::Approx(var / 6.0));
  }
  SUBCASE("pairs: variance of a single edge is zero, cross edges count twice") {
    CHECK(grouping_cost(g, {{0, 1}, {2, 3}}) == doctest::Approx(2.0 * (2 + 3 + 4 + 5)));
    CHECK(grouping_cost(g, {{0, 2}, {1, 3}}) == doctest::Approx(2.0 * (1 + 3 + 4 + 6)));
    CHECK(grouping_cost(g, {{0, 3}, {1, 2}}) == doctest::Approx(2.0 * (1 + 2 + 5 + 6)));
    CHECK(brute_best_grouping(g, 2) == doctest::Approx(28.0));
  }
  SUBCASE("equal weights") {
    SimilarityGraph e(5);
    for (int i = 0; i < 5; ++i) {
      for (int j = i + 1; j < 5; ++j) e.set_weight(i, j, 0.7);
    }
    CHECK(grouping_cost(e, {{0, 1, 2}, {3, 4}}) == doctest::Approx(2.0 * 6 * 0.7));
  }
  SUBCASE("groups must be a disjoint cover") {
    CHECK_THROWS_AS(grouping_cost(g, {{0, 1}, {1, 2, 3}}), ValidationError);
    CHECK_THROWS_AS(grouping_cost(g, {{0, 1}, {2}}), ValidationError);
    CHECK_THROWS_AS(grouping_cost(g, {{0, 1}, {2, 3, 4}}), ValidationError);
  }
  SUBCASE("matches the direct formula on random graphs") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int t = 0; t < 20; ++t) {
      SimilarityGraph r(9);
      for (int i = 0; i < 9; ++i) {
        for (int j = i + 1; j < 9; ++j) r.set_weight(i, j, u(rng));
      }
      const auto groups = random_balanced_grouping(9, 4, rng);
      CHECK(grouping_cost(r, groups) == doctest::Approx(direct_cost(r, groups)));
    }
  }
}

TEST_CASE("greedy grouping shape and determinism") {
  std::mt19937_64 rng(9);
  for (std::size_t n : {1u, 3u, 5u, 7u, 11u, 20u, 23u}) {
    const auto f = random_fragments(rng, "m", static_cast<int>(n), 10, 20.0, 120.0, 5.0, 60.0);
    GroupingConfig cfg;
    cfg.seed = n;
    const auto graph = build_graph(f, cfg);
    const auto g = group_fragments(graph, f, cfg);
    check_partition(g, n, 5);
    CHECK(g.size() == (n + 4) / 5);
    CHECK(group_fragments(graph, f, cfg) == g);
    if (n <= 5) CHECK(g.size() == 1);
  }
}

TEST_CASE("greedy matches a reference that rescores the full cost each step") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 15; ++t) {
    const int n = 6 + t;
    const auto f = random_fragments(rng, "m", n, 12, 20.0, 140.0, 5.0, 60.0);
    GroupingConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(100 + t);
    cfg.group_size = 3 + t % 3;
    const auto graph = build_graph(f, cfg);
    const auto got = group_fragments(graph, f, cfg);
    const auto want = reference_greedy(graph, f, static_cast<std::size_t>(cfg.group_size), cfg.seed);
    CHECK(grouping_cost(graph, got) == doctest::Approx(grouping_cost(graph, want)));
  }
}

TEST_CASE("planted pairs") {
  // Distances are edge weights and cross edges are charged, so the cheapest
  // grouping pairs each node with one from the other cluster.
  SUBCASE("identical pairs: greedy reaches the optimum") {
    std::vector<Fragment> f{make_fragment("a", "m", 1, 20, 10), make_fragment("b", "m", 9, 90, 50),
                            make_fragment("c", "m", 1, 20, 10), make_fragment("d", "m", 9, 90, 50)};
    GroupingConfig cfg;
    cfg.group_size = 2;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      cfg.seed = seed;
      const auto graph = build_graph(f, cfg);
      const auto g = group_fragments(graph, f, cfg);
      CHECK(grouping_cost(graph, g) == doctest::Approx(brute_best_grouping(graph, 2)));
      CHECK(grouping_cost(graph, {{0, 2}, {1, 3}}) > grouping_cost(graph, g));
    }
  }
  SUBCASE("jittered pairs: greedy lands on one of the two near-tied cross pairings") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> jitter(-0.5, 0.5);
    for (int t = 0; t < 20; ++t) {
      std::vector<Fragment> f{make_fragment("a", "m", 1, 20 + jitter(rng), 10 + jitter(rng)),
                              make_fragment("b", "m", 9, 90 + jitter(rng), 50 + jitter(rng)),
                              make_fragment("c", "m", 1, 20 + jitter(rng), 10 + jitter(rng)),
                              make_fragment("d", "m", 9, 90 + jitter(rng), 50 + jitter(rng))};
      GroupingConfig cfg;
      cfg.group_size = 2;
      cfg.seed = static_cast<std::uint64_t>(t);
      const auto graph = build_graph(f, cfg);
      const auto g = group_fragments(graph, f, cfg);
      CHECK(g != Groups{{0, 2}, {1, 3}});
      CHECK(grouping_cost(graph, g) <= 1.01 * brute_best_grouping(graph, 2));
    }
  }
}

TEST_CASE("uniformly rescaling raw factors leaves the grouping unchanged") {
  std::mt19937_64 rng(4);
  const auto f = random_fragments(rng, "m", 17, 12, 20.0, 120.0, 5.0, 60.0);
  auto scaled = f;
  for (auto& x : scaled) {
    x.budget_ms = x.budget_ms * 3.0 + 7.0;
    x.rate_rps *= 2.5;
  }
  GroupingConfig cfg;
  cfg.seed = 77;
  CHECK(group_fragments(build_graph(f, cfg), f, cfg) == group_fragments(build_graph(scaled, cfg), scaled, cfg));
}
