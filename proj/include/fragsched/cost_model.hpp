#pragma once

#include <filesystem>
#include <iosfwd>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fragsched/model.hpp"

namespace fragsched {

inline constexpr int kMinShare = 1;
inline constexpr int kMaxShare = 100;
inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

/// latency = W * (c0 + c1 * (batch - 1)) * (100 / share)^kappa, W the span's compute weight.
struct SyntheticParams {
  double c0 = 1.0;
  double c1 = 0.25;
  double kappa = 0.9;

  void validate() const;
};

struct ProfileRow {
  std::string model;
  int start_layer = 0;
  int end_layer = 0;
  int batch = 1;
  int gpu_share = 100;
  double latency_ms = 0.0;
};

/// Server-side latency oracle: (model, span, batch, share) -> milliseconds.
///
/// Immutable after construction. Empty spans cost 0 ms. Spans or grid points a
/// profile table cannot answer conservatively report kUnbounded.
class CostModel {
 public:
  static CostModel synthetic(SyntheticParams params, const ModelRegistry& models);

  /// Builds a table-backed model. Rejects duplicate rows and tables whose
  /// latency decreases with batch or increases with share.
  static CostModel from_rows(const std::vector<ProfileRow>& rows);

  double latency_ms(std::string_view model, Span span, int batch, int share) const;

  bool is_synthetic() const { return std::holds_alternative<Synthetic>(backend_); }
  const SyntheticParams* synthetic_params() const;

 private:
  struct Synthetic {
    SyntheticParams params;
    std::map<std::string, std::vector<double>, std::less<>> weights;
  };
  // Dense (batch x share) grid for one span; entry [b][s] is the smallest
  // measured latency at any point with batch >= batches[b] and share <= shares[s].
  struct SpanGrid {
    std::vector<int> batches;
    std::vector<int> shares;
    std::vector<double> conservative;
  };
  struct Table {
    std::map<std::string, std::map<std::pair<int, int>, SpanGrid>, std::less<>> spans;
  };

  explicit CostModel(std::variant<Synthetic, Table> backend) : backend_(std::move(backend)) {}

  std::variant<Synthetic, Table> backend_;
};

CostModel parse_profiles(std::istream& in, const std::string& source = "<profiles>");
CostModel load_profiles(const std::filesystem::path& path);

/// Per-instance steady-state throughput, 1000 * batch / latency. Empty spans are unbounded.
double throughput_rps(const CostModel& cost, std::string_view model, Span span, int batch, int share);

inline constexpr std::string_view kProfileHeader = "model,start_layer,end_layer,batch,gpu_share,latency_ms";

/// Materializes `cost` on every span of `model` over the given batch and share grid.
std::vector<ProfileRow> tabulate(const CostModel& cost, const ModelSpec& model,
                                 const std::vector<int>& batches, const std::vector<int>& shares);

void write_profile_csv(std::ostream& out, const std::vector<ProfileRow>& rows);

}  // namespace fragsched
