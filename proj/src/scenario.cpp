#include "fragsched/scenario.hpp"

#include <fstream>
#include <set>

#include "fragsched/error.hpp"
#include "fragsched/format.hpp"

namespace fragsched {

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& ref) {
  std::filesystem::path p(ref);
  return p.is_absolute() ? p : base / p;
}

BandwidthTrace trace_from_json(const std::string& id, const nlohmann::json& j) {
  BandwidthTrace t;
  t.trace_id = id;
  if (j.contains("constant_mbps")) {
    t.samples.push_back({0.0, j.at("constant_mbps").get<double>()});
  } else {
    for (const auto& s : j.at("samples")) t.samples.push_back({s.at(0).get<double>(), s.at(1).get<double>()});
  }
  t.validate();
  return t;
}

}  // namespace

Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  Scenario sc;
  try {
    if (j.contains("models")) {
      for (const auto& [id, v] : j.at("models").items()) {
        auto m = v.is_string() ? load_model(resolve(base_dir, v.get<std::string>())) : model_from_json(v);
        if (m.model_id != id) throw ValidationError("model entry '" + id + "' holds model_id '" + m.model_id + "'");
        sc.models.emplace(id, std::make_shared<const ModelSpec>(std::move(m)));
      }
    }
    if (j.contains("devices")) {
      for (const auto& [id, v] : j.at("devices").items()) {
        auto d = v.is_string() ? load_device(resolve(base_dir, v.get<std::string>())) : device_from_json(v);
        sc.devices.emplace(id, std::make_shared<const DeviceProfile>(std::move(d)));
      }
    }
    if (j.contains("traces")) {
      for (const auto& [id, v] : j.at("traces").items()) {
        auto t = v.is_string() ? load_trace(resolve(base_dir, v.get<std::string>())) : trace_from_json(id, v);
        t.trace_id = id;
        sc.traces.emplace(id, std::make_shared<const BandwidthTrace>(std::move(t)));
      }
    }
    sc.gpus = j.value("gpus", 0);
    sc.epoch_s = j.value("epoch_s", kDefaultEpochSeconds);
    if (sc.gpus < 0) throw ValidationError("gpus must be >= 0");
    if (!(sc.epoch_s > 0.0)) throw ValidationError("epoch_s must be > 0");

    for (const auto& c : j.value("clients", nlohmann::json::array())) {
      ClientSpec spec;
      spec.client_id = c.at("client_id").get<std::string>();

      auto model_ref = c.at("model").get<std::string>();
      if (!sc.models.count(model_ref)) {
        auto m = load_model(resolve(base_dir, model_ref));
        model_ref = m.model_id;
        sc.models.emplace(model_ref, std::make_shared<const ModelSpec>(std::move(m)));
      }
      spec.model = sc.models.at(model_ref);

      auto device_ref = c.at("device").get<std::string>();
      if (!sc.devices.count(device_ref)) {
        sc.devices.emplace(device_ref, std::make_shared<const DeviceProfile>(load_device(resolve(base_dir, device_ref))));
      }
      spec.device = sc.devices.at(device_ref);

      auto trace_ref = c.at("trace").get<std::string>();
      if (!sc.traces.count(trace_ref)) {
        sc.traces.emplace(trace_ref, std::make_shared<const BandwidthTrace>(load_trace(resolve(base_dir, trace_ref))));
      }
      spec.trace = sc.traces.at(trace_ref);

      spec.rate_rps = c.at("rate_rps").get<double>();
      if (!(spec.rate_rps > 0.0)) throw ValidationError("client " + spec.client_id + ": rate_rps must be > 0");
      const double full = spec.device->full_ms(spec.model->model_id);
      if (spec.device->cumulative_ms.at(spec.model->model_id).size() !=
          static_cast<std::size_t>(spec.model->layer_count()) + 1) {
        throw ValidationError("device " + spec.device->device_id + " profile for " + spec.model->model_id +
                              " does not match the model's layer count");
      }
      spec.slo_ms = c.contains("slo_ms") ? c.at("slo_ms").get<double>()
                                         : c.value("slo_ratio", kDefaultSloRatio) * full;
      if (!(spec.slo_ms > 0.0)) throw ValidationError("client " + spec.client_id + ": SLO must be > 0");
      if (spec.slo_ms > full) {
        sc.warnings.push_back("client " + spec.client_id + ": SLO " + format_double(spec.slo_ms) +
                              " ms exceeds on-device latency " + format_double(full) + " ms");
      }
      sc.clients.push_back(std::move(spec));
    }

    const auto cm = j.value("cost_model", nlohmann::json::object());
    if (cm.contains("profiles")) {
      sc.cost = std::make_shared<const CostModel>(load_profiles(resolve(base_dir, cm.at("profiles").get<std::string>())));
    } else {
      SyntheticParams params;
      if (cm.contains("synthetic")) {
        const auto& s = cm.at("synthetic");
        params.c0 = s.value("c0", params.c0);
        params.c1 = s.value("c1", params.c1);
        params.kappa = s.value("kappa", params.kappa);
      }
      sc.cost = std::make_shared<const CostModel>(CostModel::synthetic(params, sc.models));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }

  std::set<std::string> seen;
  for (const auto& c : sc.clients) {
    if (!seen.insert(c.client_id).second) throw ValidationError("duplicate client_id " + c.client_id);
  }
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return scenario_from_json(j, path.parent_path());
}

}  // namespace fragsched
