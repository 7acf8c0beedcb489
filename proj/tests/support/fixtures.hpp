#pragma once

#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "fragsched/cost_model.hpp"
#include "fragsched/model.hpp"
#include "fragsched/workload.hpp"

namespace fragsched::testing {

inline std::filesystem::path source_dir() { return FRAGSCHED_SOURCE_DIR; }
inline std::filesystem::path data_dir() { return source_dir() / "data"; }
inline std::filesystem::path fixture_dir() { return source_dir() / "tests" / "fixtures"; }

/// Random model with `layers` layers whose weights sum to `total_weight`
/// and whose payload shrinks along the network with occasional bumps.
inline ModelSpec synthetic_model(const std::string& id, int layers, std::uint64_t seed, double total_weight = 5.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> w(0.3, 1.0);
  std::uniform_real_distribution<double> shrink(0.5, 0.95);
  ModelSpec m;
  m.model_id = id;
  m.input_bytes = 600000;
  double sum = 0.0;
  double bytes = 900000.0;
  for (int i = 0; i < layers; ++i) {
    bytes *= shrink(rng);
    double b = (i % 3 == 1) ? bytes * 1.5 : bytes;
    m.layers.push_back({w(rng), static_cast<std::uint64_t>(std::max(b, 4000.0))});
    sum += m.layers.back().compute_weight;
  }
  for (auto& l : m.layers) l.compute_weight *= total_weight / sum;
  return m;
}

struct SyntheticWorld {
  ModelRegistry models;
  std::shared_ptr<const CostModel> cost;

  const ModelSpec& model(const std::string& id) const { return *models.at(id); }
};

inline SyntheticWorld make_world(std::vector<ModelSpec> specs, SyntheticParams params = {}) {
  SyntheticWorld w;
  for (auto& m : specs) {
    const std::string id = m.model_id;
    w.models.emplace(id, std::make_shared<const ModelSpec>(std::move(m)));
  }
  w.cost = std::make_shared<const CostModel>(CostModel::synthetic(params, w.models));
  return w;
}

inline Fragment make_fragment(const std::string& id, const std::string& model, int p, double budget, double rate) {
  Fragment f;
  f.fragment_id = id;
  f.model_id = model;
  f.start_layer = p;
  f.budget_ms = budget;
  f.rate_rps = rate;
  f.clients = {id};
  return f;
}

/// Fragments with start layers in [0, max_p], budgets in [tmin, tmax] and
/// rates in [qmin, qmax], named f0, f1, ...
inline std::vector<Fragment> random_fragments(std::mt19937_64& rng, const std::string& model, int count, int max_p,
                                              double tmin, double tmax, double qmin, double qmax) {
  std::uniform_int_distribution<int> p(0, max_p);
  std::uniform_real_distribution<double> t(tmin, tmax);
  std::uniform_real_distribution<double> q(qmin, qmax);
  std::vector<Fragment> out;
  for (int i = 0; i < count; ++i) {
    const int pi = p(rng);
    const double ti = std::round(t(rng));
    const double qi = std::round(q(rng));
    out.push_back(make_fragment("f" + std::to_string(i), model, pi, ti, qi));
  }
  return out;
}

}  // namespace fragsched::testing
