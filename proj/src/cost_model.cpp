#include "fragsched/cost_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fragsched/error.hpp"
#include "fragsched/format.hpp"

namespace fragsched {

void SyntheticParams::validate() const {
  if (!(c0 > 0.0) || !std::isfinite(c0)) throw DomainError("synthetic model needs c0 > 0");
  if (!(c1 >= 0.0) || !std::isfinite(c1)) throw DomainError("synthetic model needs c1 >= 0");
  if (!(kappa > 0.0 && kappa <= 2.0)) throw DomainError("synthetic model needs 0 < kappa <= 2");
}

CostModel CostModel::synthetic(SyntheticParams params, const ModelRegistry& models) {
  params.validate();
  Synthetic s{params, {}};
  for (const auto& [id, model] : models) {
    std::vector<double> w;
    w.reserve(model->layers.size());
    for (const auto& layer : model->layers) w.push_back(layer.compute_weight);
    s.weights.emplace(id, std::move(w));
  }
  return CostModel(std::move(s));
}

const SyntheticParams* CostModel::synthetic_params() const {
  if (const auto* s = std::get_if<Synthetic>(&backend_)) return &s->params;
  return nullptr;
}

namespace {

void check_query(Span span, int batch, int share) {
  if (share < kMinShare || share > kMaxShare) {
    throw DomainError("gpu share " + std::to_string(share) + " outside 1..100");
  }
  if (batch < 1) throw DomainError("batch must be >= 1");
  if (span.start < 0 || span.start > span.end) throw DomainError("invalid span");
}

}  // namespace

double CostModel::latency_ms(std::string_view model, Span span, int batch, int share) const {
  check_query(span, batch, share);
  if (span.empty()) return 0.0;

  if (const auto* s = std::get_if<Synthetic>(&backend_)) {
    auto it = s->weights.find(model);
    if (it == s->weights.end()) throw ValidationError("unknown model " + std::string(model));
    if (span.end > static_cast<int>(it->second.size())) throw DomainError("span beyond model output");
    double w = 0.0;
    for (int i = span.start; i < span.end; ++i) w += it->second[static_cast<std::size_t>(i)];
    const auto& p = s->params;
    return w * (p.c0 + p.c1 * (batch - 1)) * std::pow(100.0 / share, p.kappa);
  }

  const auto& table = std::get<Table>(backend_);
  auto mit = table.spans.find(model);
  if (mit == table.spans.end()) throw ValidationError("no profile rows for model " + std::string(model));
  auto sit = mit->second.find({span.start, span.end});
  if (sit == mit->second.end()) return kUnbounded;
  const SpanGrid& g = sit->second;
  auto bi = std::lower_bound(g.batches.begin(), g.batches.end(), batch) - g.batches.begin();
  auto si = (std::upper_bound(g.shares.begin(), g.shares.end(), share) - g.shares.begin()) - 1;
  if (bi == static_cast<std::ptrdiff_t>(g.batches.size()) || si < 0) return kUnbounded;
  return g.conservative[static_cast<std::size_t>(bi) * g.shares.size() + static_cast<std::size_t>(si)];
}

CostModel CostModel::from_rows(const std::vector<ProfileRow>& rows) {
  // model -> span -> (batch, share) -> latency
  std::map<std::string, std::map<std::pair<int, int>, std::map<std::pair<int, int>, double>>> raw;
  for (const auto& r : rows) {
    check_query({r.start_layer, r.end_layer}, r.batch, r.gpu_share);
    if (!std::isfinite(r.latency_ms) || r.latency_ms < 0.0) {
      throw ValidationError("profile row for " + r.model + " has invalid latency");
    }
    auto [it, inserted] =
        raw[r.model][{r.start_layer, r.end_layer}].emplace(std::pair{r.batch, r.gpu_share}, r.latency_ms);
    if (!inserted) {
      throw ValidationError("duplicate profile row " + r.model + " [" + std::to_string(r.start_layer) + "," +
                            std::to_string(r.end_layer) + ") batch " + std::to_string(r.batch) + " share " +
                            std::to_string(r.gpu_share));
    }
  }

  std::vector<std::string> violations;
  Table table;
  for (const auto& [model, spans] : raw) {
    auto& out_spans = table.spans[model];
    for (const auto& [span, points] : spans) {
      SpanGrid g;
      for (const auto& [key, lat] : points) {
        g.batches.push_back(key.first);
        g.shares.push_back(key.second);
      }
      std::sort(g.batches.begin(), g.batches.end());
      g.batches.erase(std::unique(g.batches.begin(), g.batches.end()), g.batches.end());
      std::sort(g.shares.begin(), g.shares.end());
      g.shares.erase(std::unique(g.shares.begin(), g.shares.end()), g.shares.end());
      const std::size_t nb = g.batches.size();
      const std::size_t ns = g.shares.size();
      std::vector<double> grid(nb * ns, kUnbounded);
      for (const auto& [key, lat] : points) {
        auto bi = static_cast<std::size_t>(std::lower_bound(g.batches.begin(), g.batches.end(), key.first) -
                                           g.batches.begin());
        auto si = static_cast<std::size_t>(std::lower_bound(g.shares.begin(), g.shares.end(), key.second) -
                                           g.shares.begin());
        grid[bi * ns + si] = lat;
      }

      std::string where = model + " [" + std::to_string(span.first) + "," + std::to_string(span.second) + ")";
      // Measured points only: latency must not drop as batch grows nor rise as share grows.
      for (std::size_t si = 0; si < ns; ++si) {
        double prev = -1.0;
        int prev_batch = 0;
        for (std::size_t bi = 0; bi < nb; ++bi) {
          double v = grid[bi * ns + si];
          if (std::isinf(v)) continue;
          if (prev >= 0.0 && v < prev) {
            violations.push_back(where + " share " + std::to_string(g.shares[si]) + ": batch " +
                                 std::to_string(prev_batch) + "->" + std::to_string(g.batches[bi]) +
                                 " latency " + format_double(prev) + "->" + format_double(v));
          }
          prev = v;
          prev_batch = g.batches[bi];
        }
      }
      for (std::size_t bi = 0; bi < nb; ++bi) {
        double prev = -1.0;
        int prev_share = 0;
        for (std::size_t si = 0; si < ns; ++si) {
          double v = grid[bi * ns + si];
          if (std::isinf(v)) continue;
          if (prev >= 0.0 && v > prev) {
            violations.push_back(where + " batch " + std::to_string(g.batches[bi]) + ": share " +
                                 std::to_string(prev_share) + "->" + std::to_string(g.shares[si]) +
                                 " latency " + format_double(prev) + "->" + format_double(v));
          }
          prev = v;
          prev_share = g.shares[si];
        }
      }

      g.conservative = grid;
      for (std::size_t bi = nb; bi-- > 0;) {
        for (std::size_t si = 0; si < ns; ++si) {
          double& c = g.conservative[bi * ns + si];
          if (bi + 1 < nb) c = std::min(c, g.conservative[(bi + 1) * ns + si]);
          if (si > 0) c = std::min(c, g.conservative[bi * ns + si - 1]);
        }
      }
      out_spans.emplace(span, std::move(g));
    }
  }

  if (!violations.empty()) {
    std::string msg = "profile table is not monotone:";
    for (const auto& v : violations) msg += "\n  " + v;
    throw ValidationError(msg);
  }
  return CostModel(std::move(table));
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <typename T>
T parse_number(const std::string& text, const std::string& source, int line_no) {
  T value{};
  auto first = text.data();
  auto last = text.data() + text.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && (last[-1] == ' ' || last[-1] == '\r')) --last;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || first == last) {
    throw ParseError(source + ":" + std::to_string(line_no) + ": bad number '" + text + "'");
  }
  return value;
}

}  // namespace

CostModel parse_profiles(std::istream& in, const std::string& source) {
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  std::vector<ProfileRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!saw_header) {
      if (line != kProfileHeader) {
        throw ParseError(source + ":" + std::to_string(line_no) + ": expected header '" +
                         std::string(kProfileHeader) + "'");
      }
      saw_header = true;
      continue;
    }
    auto fields = split_csv(line);
    if (fields.size() != 6) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected 6 fields, got " +
                       std::to_string(fields.size()));
    }
    ProfileRow r;
    r.model = fields[0];
    if (r.model.empty()) throw ParseError(source + ":" + std::to_string(line_no) + ": empty model name");
    r.start_layer = parse_number<int>(fields[1], source, line_no);
    r.end_layer = parse_number<int>(fields[2], source, line_no);
    r.batch = parse_number<int>(fields[3], source, line_no);
    r.gpu_share = parse_number<int>(fields[4], source, line_no);
    r.latency_ms = parse_number<double>(fields[5], source, line_no);
    if (r.start_layer < 0 || r.end_layer <= r.start_layer) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": span must satisfy 0 <= start < end");
    }
    if (r.batch < 1 || r.gpu_share < kMinShare || r.gpu_share > kMaxShare) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": batch or gpu_share out of range");
    }
    rows.push_back(std::move(r));
  }
  if (!saw_header) throw ParseError(source + ": missing header");
  return CostModel::from_rows(rows);
}

CostModel load_profiles(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return parse_profiles(in, path.string());
}

double throughput_rps(const CostModel& cost, std::string_view model, Span span, int batch, int share) {
  if (span.empty()) return kUnbounded;
  double lat = cost.latency_ms(model, span, batch, share);
  if (lat <= 0.0) return kUnbounded;
  return 1000.0 * batch / lat;
}

std::vector<ProfileRow> tabulate(const CostModel& cost, const ModelSpec& model, const std::vector<int>& batches,
                                 const std::vector<int>& shares) {
  std::vector<ProfileRow> rows;
  const int n = model.layer_count();
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b <= n; ++b) {
      for (int batch : batches) {
        for (int share : shares) {
          rows.push_back({model.model_id, a, b, batch, share, cost.latency_ms(model.model_id, {a, b}, batch, share)});
        }
      }
    }
  }
  return rows;
}

void write_profile_csv(std::ostream& out, const std::vector<ProfileRow>& rows) {
  out << kProfileHeader << '\n';
  for (const auto& r : rows) {
    out << r.model << ',' << r.start_layer << ',' << r.end_layer << ',' << r.batch << ',' << r.gpu_share << ','
        << format_double(r.latency_ms) << '\n';
  }
}

}  // namespace fragsched
