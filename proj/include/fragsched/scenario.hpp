#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "fragsched/cost_model.hpp"
#include "fragsched/model.hpp"
#include "fragsched/workload.hpp"

namespace fragsched {

inline constexpr double kDefaultSloRatio = 0.95;
inline constexpr double kDefaultEpochSeconds = 60.0;

/// Clients plus everything they reference, resolved and validated.
struct Scenario {
  ModelRegistry models;
  std::map<std::string, std::shared_ptr<const DeviceProfile>> devices;
  std::map<std::string, std::shared_ptr<const BandwidthTrace>> traces;
  std::vector<ClientSpec> clients;
  std::shared_ptr<const CostModel> cost;
  int gpus = 0;
  double epoch_s = kDefaultEpochSeconds;
  /// Non-fatal findings, e.g. an SLO looser than running the model on-device.
  std::vector<std::string> warnings;
};

/// Scenario JSON:
///
///   { "models":  { id: path | ModelSpec },
///     "devices": { id: path | DeviceProfile },
///     "traces":  { id: path | {"samples": [[time_s, mbps], ...]} | {"constant_mbps": x} },
///     "cost_model": {"synthetic": {"c0", "c1", "kappa"}} | {"profiles": path},
///     "clients": [ {"client_id", "device", "model", "rate_rps", "slo_ratio" | "slo_ms", "trace"} ],
///     "gpus": int, "epoch_s": number }
///
/// Client references name entries of the maps or, failing that, files
/// relative to `base_dir`. The cost model defaults to the synthetic one.
Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace fragsched
