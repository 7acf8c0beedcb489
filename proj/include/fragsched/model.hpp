#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

namespace fragsched {

/// Half-open layer range [start, end) of a model. Layer boundaries run 0..N.
struct Span {
  int start = 0;
  int end = 0;

  bool empty() const { return start >= end; }
  friend auto operator<=>(const Span&, const Span&) = default;
};

struct Layer {
  double compute_weight = 0.0;
  std::uint64_t output_bytes = 0;
};

struct ModelSpec {
  std::string model_id;
  std::uint64_t input_bytes = 0;
  std::vector<Layer> layers;

  int layer_count() const { return static_cast<int>(layers.size()); }

  /// Payload crossing boundary p: the network input for p == 0, otherwise
  /// the output of the layer just before the boundary.
  std::uint64_t boundary_bytes(int p) const;

  /// Sum of compute weights over layers in the span.
  double span_weight(Span span) const;

  /// Boundaries in 1..N-1 whose payload is a local minimum of boundary_bytes.
  std::vector<int> payload_minima() const;

  void validate() const;
};

ModelSpec model_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const ModelSpec& model);
ModelSpec load_model(const std::filesystem::path& path);

/// Cumulative on-device latency per model: cumulative_ms[p] is the time to
/// run layers [0, p), so cumulative_ms[0] == 0.
struct DeviceProfile {
  std::string device_id;
  std::map<std::string, std::vector<double>> cumulative_ms;

  double mobile_ms(const std::string& model_id, int p) const;
  double full_ms(const std::string& model_id) const;

  void validate() const;
};

/// Accepts either {"cumulative_ms": [...]} (N+1 entries, first 0) or
/// {"layer_ms": [...]} (N entries) per model.
DeviceProfile device_from_json(const nlohmann::json& j);
DeviceProfile load_device(const std::filesystem::path& path);

using ModelRegistry = std::map<std::string, std::shared_ptr<const ModelSpec>, std::less<>>;

}  // namespace fragsched
