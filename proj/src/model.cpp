#include "fragsched/model.hpp"

#include <cmath>
#include <fstream>

#include "fragsched/error.hpp"

namespace fragsched {

std::uint64_t ModelSpec::boundary_bytes(int p) const {
  if (p < 0 || p > layer_count()) {
    throw DomainError("boundary " + std::to_string(p) + " outside 0.." +
                      std::to_string(layer_count()) + " for model " + model_id);
  }
  return p == 0 ? input_bytes : layers[static_cast<std::size_t>(p - 1)].output_bytes;
}

double ModelSpec::span_weight(Span span) const {
  if (span.start < 0 || span.end > layer_count() || span.start > span.end) {
    throw DomainError("invalid span [" + std::to_string(span.start) + "," +
                      std::to_string(span.end) + ") for model " + model_id);
  }
  double w = 0.0;
  for (int i = span.start; i < span.end; ++i) w += layers[static_cast<std::size_t>(i)].compute_weight;
  return w;
}

std::vector<int> ModelSpec::payload_minima() const {
  std::vector<int> out;
  for (int p = 1; p < layer_count(); ++p) {
    auto here = boundary_bytes(p);
    auto before = boundary_bytes(p - 1);
    auto after = boundary_bytes(p + 1);
    if (here <= before && here <= after && (here < before || here < after)) out.push_back(p);
  }
  return out;
}

void ModelSpec::validate() const {
  if (model_id.empty()) throw ValidationError("model_id must not be empty");
  if (layers.empty()) throw ValidationError("model " + model_id + " has no layers");
  if (input_bytes == 0) throw ValidationError("model " + model_id + " needs input_bytes > 0");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    double w = layers[i].compute_weight;
    if (!std::isfinite(w) || w < 0.0) {
      throw ValidationError("model " + model_id + " layer " + std::to_string(i) +
                            " has invalid compute_weight");
    }
  }
}

ModelSpec model_from_json(const nlohmann::json& j) {
  ModelSpec m;
  try {
    m.model_id = j.at("model_id").get<std::string>();
    m.input_bytes = j.at("input_bytes").get<std::uint64_t>();
    for (const auto& layer : j.at("layers")) {
      m.layers.push_back({layer.at("compute_weight").get<double>(),
                          layer.at("output_bytes").get<std::uint64_t>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("model spec: ") + e.what());
  }
  m.validate();
  return m;
}

nlohmann::json model_to_json(const ModelSpec& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.layers) {
    layers.push_back({{"compute_weight", l.compute_weight}, {"output_bytes", l.output_bytes}});
  }
  return {{"model_id", model.model_id}, {"input_bytes", model.input_bytes}, {"layers", layers}};
}

namespace {

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace

ModelSpec load_model(const std::filesystem::path& path) { return model_from_json(read_json(path)); }

double DeviceProfile::mobile_ms(const std::string& model_id, int p) const {
  auto it = cumulative_ms.find(model_id);
  if (it == cumulative_ms.end()) {
    throw ValidationError("device " + device_id + " has no profile for model " + model_id);
  }
  if (p < 0 || p >= static_cast<int>(it->second.size())) {
    throw DomainError("device " + device_id + ": boundary " + std::to_string(p) + " out of range");
  }
  return it->second[static_cast<std::size_t>(p)];
}

double DeviceProfile::full_ms(const std::string& model_id) const {
  auto it = cumulative_ms.find(model_id);
  if (it == cumulative_ms.end()) {
    throw ValidationError("device " + device_id + " has no profile for model " + model_id);
  }
  return it->second.back();
}

void DeviceProfile::validate() const {
  for (const auto& [model, cum] : cumulative_ms) {
    if (cum.empty() || cum.front() != 0.0) {
      throw ValidationError("device " + device_id + "/" + model + ": cumulative latency must start at 0");
    }
    for (std::size_t i = 1; i < cum.size(); ++i) {
      if (!std::isfinite(cum[i]) || cum[i] < cum[i - 1]) {
        throw ValidationError("device " + device_id + "/" + model +
                              ": cumulative latency decreases at boundary " + std::to_string(i));
      }
    }
  }
}

DeviceProfile device_from_json(const nlohmann::json& j) {
  DeviceProfile d;
  try {
    d.device_id = j.at("device_id").get<std::string>();
    for (const auto& [model, entry] : j.at("models").items()) {
      std::vector<double> cum;
      if (entry.contains("cumulative_ms")) {
        cum = entry.at("cumulative_ms").get<std::vector<double>>();
      } else {
        cum.push_back(0.0);
        for (double ms : entry.at("layer_ms").get<std::vector<double>>()) cum.push_back(cum.back() + ms);
      }
      d.cumulative_ms.emplace(model, std::move(cum));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("device profile: ") + e.what());
  }
  d.validate();
  return d;
}

DeviceProfile load_device(const std::filesystem::path& path) { return device_from_json(read_json(path)); }

}  // namespace fragsched
