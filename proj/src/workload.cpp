#include "fragsched/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fragsched/error.hpp"

namespace fragsched {

void BandwidthTrace::validate() const {
  if (samples.empty()) throw ValidationError("trace " + trace_id + " is empty");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!(samples[i].mbps > 0.0) || !std::isfinite(samples[i].mbps)) {
      throw ValidationError("trace " + trace_id + ": bandwidth must be > 0 at sample " + std::to_string(i));
    }
    if (i > 0 && !(samples[i].time_s > samples[i - 1].time_s)) {
      throw ValidationError("trace " + trace_id + ": times must strictly increase at sample " + std::to_string(i));
    }
  }
}

double bandwidth_at(const BandwidthTrace& trace, double t_s) {
  if (trace.samples.empty()) throw ValidationError("trace " + trace.trace_id + " is empty");
  if (!(t_s >= 0.0)) throw DomainError("bandwidth query at negative time");
  auto it = std::upper_bound(trace.samples.begin(), trace.samples.end(), t_s,
                             [](double t, const BandwidthSample& s) { return t < s.time_s; });
  if (it == trace.samples.begin()) return trace.samples.front().mbps;
  return std::prev(it)->mbps;
}

double BandwidthTrace::time_average(double horizon_s) const {
  if (samples.empty()) throw ValidationError("trace " + trace_id + " is empty");
  if (!(horizon_s > 0.0)) throw DomainError("time average needs a positive horizon");
  double area = 0.0;
  double t = 0.0;
  while (t < horizon_s) {
    double bw = bandwidth_at(*this, t);
    auto next = std::upper_bound(samples.begin(), samples.end(), t,
                                 [](double x, const BandwidthSample& s) { return x < s.time_s; });
    double until = next == samples.end() ? horizon_s : std::min(horizon_s, next->time_s);
    area += bw * (until - t);
    t = until;
  }
  return area / horizon_s;
}

BandwidthTrace parse_trace(std::istream& in, const std::string& source) {
  BandwidthTrace trace;
  trace.trace_id = source;
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!saw_header) {
      if (line != "time_s,mbps") throw ParseError(source + ":" + std::to_string(line_no) + ": expected header 'time_s,mbps'");
      saw_header = true;
      continue;
    }
    std::istringstream ss(line);
    BandwidthSample s;
    char comma = 0;
    if (!(ss >> s.time_s >> comma >> s.mbps) || comma != ',' || !(ss >> std::ws).eof()) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": malformed trace row");
    }
    trace.samples.push_back(s);
  }
  if (!saw_header) throw ParseError(source + ": missing header");
  trace.validate();
  return trace;
}

BandwidthTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  auto trace = parse_trace(in, path.string());
  trace.trace_id = path.stem().string();
  return trace;
}

double transfer_ms(const ModelSpec& model, int p, double mbps) {
  if (!(mbps > 0.0)) throw DomainError("bandwidth must be > 0");
  return 8.0 * static_cast<double>(model.boundary_bytes(p)) / (mbps * 1e6) * 1000.0;
}

std::optional<Fragment> partition_client(const ClientSpec& client, double mbps, const CostModel& cost) {
  if (!(mbps > 0.0)) throw DomainError("bandwidth must be > 0");
  const ModelSpec& model = *client.model;
  const int n = model.layer_count();

  std::optional<int> chosen;
  double best_estimate = kUnbounded;
  double chosen_budget = 0.0;
  for (int p = 0; p <= n; ++p) {
    double mobile = client.device->mobile_ms(model.model_id, p);
    double transfer = transfer_ms(model, p, mbps);
    double budget = client.slo_ms - mobile - transfer;
    if (!(budget > 0.0)) continue;
    double estimate = mobile + transfer + cost.latency_ms(model.model_id, {p, n}, 1, kMaxShare);
    if (estimate <= best_estimate) {
      best_estimate = estimate;
      chosen = p;
      chosen_budget = budget;
    }
  }
  if (!chosen) return std::nullopt;

  Fragment f;
  f.fragment_id = client.client_id;
  f.model_id = model.model_id;
  f.start_layer = *chosen;
  f.budget_ms = chosen_budget;
  f.rate_rps = client.rate_rps;
  f.clients = {client.client_id};
  return f;
}

EpochFragments generate_epoch(std::span<const ClientSpec> clients, double t_s, const CostModel& cost) {
  std::vector<const ClientSpec*> order;
  order.reserve(clients.size());
  for (const auto& c : clients) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->client_id < b->client_id; });

  EpochFragments out;
  for (const auto* c : order) {
    auto f = partition_client(*c, bandwidth_at(*c->trace, t_s), cost);
    if (f) {
      out.fragments.push_back(std::move(*f));
    } else {
      out.infeasible_clients.push_back(c->client_id);
    }
  }
  return out;
}

}  // namespace fragsched
