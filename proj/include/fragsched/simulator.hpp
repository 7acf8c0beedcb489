#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fragsched/planner.hpp"
#include "fragsched/scenario.hpp"

namespace fragsched {

struct SimConfig {
  double horizon_s = 120.0;
  /// Exponential inter-arrival times instead of a fixed 1/rate spacing.
  bool poisson = false;
  /// Deterministic arrivals: client i of n starts at i/n of its own period unless this is set,
  /// in which case every client's first request is at t = 0.
  bool in_phase = false;
  std::uint64_t seed = 0;
  PlannerConfig planner;
};

enum class RequestStatus { met, violated, dropped, inflight };

std::string status_name(RequestStatus s);

struct RequestRecord {
  std::string client;
  double gen_ms = 0.0;
  /// Completion or drop time; unset while in flight at the horizon.
  std::optional<double> done_ms;
  double deadline_ms = 0.0;
  RequestStatus status = RequestStatus::inflight;
  int epoch = 0;

  std::optional<double> latency_ms() const;
};

struct EpochRecord {
  int index = 0;
  double start_s = 0.0;
  /// A new plan took effect at this epoch's start.
  bool replanned = false;
  /// Unset when planning failed and every client went unserved.
  std::optional<int> total_resource;
  int gpus_used = 0;
  /// Wall-clock planning time; not part of the report, which stays reproducible.
  double plan_time_ms = 0.0;
  std::string plan_error;
  std::vector<std::string> unserved_clients;
  /// Boundary each served client was partitioned at.
  std::map<std::string, int> partition;
};

struct SimSummary {
  std::size_t generated = 0;
  std::size_t completed = 0;
  std::size_t met = 0;
  std::size_t dropped = 0;
  std::size_t inflight = 0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double p99_ms = 0.0;
  double max_ms = 0.0;
  /// Late completions over completions.
  double slo_violation_rate = 0.0;
  /// Drops over generated requests.
  double drop_rate = 0.0;
  int peak_total_resource = 0;
  /// Time-weighted over the horizon.
  double mean_total_resource = 0.0;
};

struct SimReport {
  std::string planner;
  double horizon_s = 0.0;
  std::vector<RequestRecord> requests;
  std::vector<EpochRecord> epochs;
  /// Plans in effect, indexed by the epoch at which each took effect.
  std::map<int, ExecutionPlan> plans;

  SimSummary summary() const;
  /// Summary of requests generated in one epoch.
  SimSummary epoch_summary(int epoch) const;
};

/// Nearest-rank percentile of `values` (sorted in place); 0 when empty.
double percentile(std::vector<double>& values, double q);

/// Runs the scenario with `planner` re-planning at each epoch boundary where
/// some client's partition changes. Static planners plan once. A zero
/// horizon yields an empty report.
SimReport simulate(const Scenario& scenario, Planner planner, const SimConfig& cfg);

/// Runs the scenario against one fixed plan for the whole horizon. Clients
/// the plan does not route are unserved.
SimReport simulate_with_plan(const Scenario& scenario, const ExecutionPlan& plan, const SimConfig& cfg);

nlohmann::json summary_to_json(const SimSummary& s);
/// Summary and per-epoch records; plans are included when `with_plans`.
nlohmann::json report_to_json(const SimReport& report, bool with_plans);
/// Header: client,gen_ms,done_ms,latency_ms,deadline_ms,status
void write_requests_csv(const SimReport& report, std::ostream& out);

}  // namespace fragsched
