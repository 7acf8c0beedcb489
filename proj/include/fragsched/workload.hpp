#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fragsched/cost_model.hpp"
#include "fragsched/model.hpp"

namespace fragsched {

struct BandwidthSample {
  double time_s = 0.0;
  double mbps = 0.0;
};

/// Piecewise-constant bandwidth: each sample holds until the next one.
struct BandwidthTrace {
  std::string trace_id;
  std::vector<BandwidthSample> samples;

  void validate() const;

  /// Mean of bandwidth_at over [0, horizon_s).
  double time_average(double horizon_s) const;
};

double bandwidth_at(const BandwidthTrace& trace, double t_s);

BandwidthTrace parse_trace(std::istream& in, const std::string& source = "<trace>");
BandwidthTrace load_trace(const std::filesystem::path& path);

struct ClientSpec {
  std::string client_id;
  std::shared_ptr<const DeviceProfile> device;
  std::shared_ptr<const ModelSpec> model;
  double rate_rps = 0.0;
  double slo_ms = 0.0;
  std::shared_ptr<const BandwidthTrace> trace;
};

/// Server-side suffix [start_layer, N) of a model with its latency allowance
/// and demanded request rate.
struct Fragment {
  std::string fragment_id;
  std::string model_id;
  int start_layer = 0;
  double budget_ms = 0.0;
  double rate_rps = 0.0;
  std::vector<std::string> clients;
  bool merged = false;

  friend bool operator==(const Fragment&, const Fragment&) = default;
};

/// Time to ship the payload at boundary p over `mbps`.
double transfer_ms(const ModelSpec& model, int p, double mbps);

/// Chooses the boundary minimizing mobile + transfer + reference server time
/// (batch 1, full GPU) among boundaries that leave a positive server budget.
/// Equal estimates resolve to the larger boundary. nullopt when no boundary
/// leaves any budget.
std::optional<Fragment> partition_client(const ClientSpec& client, double mbps, const CostModel& cost);

struct EpochFragments {
  std::vector<Fragment> fragments;
  std::vector<std::string> infeasible_clients;
};

/// One fragment per feasible client at the bandwidth in effect at t_s,
/// ordered by client id.
EpochFragments generate_epoch(std::span<const ClientSpec> clients, double t_s, const CostModel& cost);

}  // namespace fragsched
