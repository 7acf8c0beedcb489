#include "fragsched/simulator.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <ostream>
#include <queue>
#include <random>

#include "fragsched/error.hpp"
#include "fragsched/format.hpp"

namespace fragsched {

namespace {

constexpr double kSlack = 1e-9;

struct StageRuntime {
  std::string model_id;
  Span span;
  int share = 0;
  int batch = 0;
  double budget_ms = 0.0;
  int idle = 0;
  std::deque<std::size_t> queue;
};

/// A plan prepared for execution: its stages get runtime state, each routed
/// client a path through them.
struct ActivePlan {
  const ExecutionPlan* plan = nullptr;
  std::map<std::string, int> partition;
  std::map<std::string, std::vector<std::size_t>> paths;
};

struct Request {
  std::size_t client = 0;
  double gen_ms = 0.0;
  int epoch = 0;
  std::size_t active = 0;
  std::size_t pos = 0;
  double enqueued_ms = 0.0;
  RequestStatus status = RequestStatus::inflight;
  std::optional<double> done_ms;
};

enum Kind : int { kGenerate = 0, kArrive = 1, kDispatch = 2, kStageDone = 3 };

struct Event {
  double t = 0.0;
  int kind = 0;
  std::uint64_t seq = 0;
  std::size_t a = 0;
  std::size_t b = 0;

  bool operator>(const Event& o) const {
    if (t != o.t) return t > o.t;
    if (kind != o.kind) return kind > o.kind;
    return seq > o.seq;
  }
};

std::map<std::string, int> partition_of(const ExecutionPlan& plan) {
  std::map<std::string, int> out;
  for (const auto& f : plan.fragments) {
    for (const auto& c : f.clients) out[c] = f.start_layer;
  }
  return out;
}

/// One simulation run over precomputed per-epoch plans.
class Engine {
 public:
  Engine(const Scenario& sc, const SimConfig& cfg) : sc_(sc), cfg_(cfg), horizon_ms_(cfg.horizon_s * 1000.0) {}

  std::size_t add_plan(const ExecutionPlan& plan) {
    ActivePlan ap;
    ap.plan = &plan;
    ap.partition = partition_of(plan);
    std::map<const StagePlan*, std::size_t> index;
    auto stage_id = [&](const StagePlan& s) {
      auto it = index.find(&s);
      if (it != index.end()) return it->second;
      StageRuntime rt;
      rt.model_id = s.model_id;
      rt.span = s.span;
      rt.share = s.alloc.share;
      rt.batch = std::max(1, s.alloc.batch);
      rt.budget_ms = s.budget_ms;
      rt.idle = s.alloc.instances;
      stages_.push_back(std::move(rt));
      index.emplace(&s, stages_.size() - 1);
      return stages_.size() - 1;
    };
    for (const auto& [client, route] : plan.routes) {
      const auto& level = plan.groups.at(route.group).levels.at(route.level);
      std::vector<std::size_t> path;
      const auto& align = level.alignment.at(route.alignment);
      if (!align.span.empty()) path.push_back(stage_id(align));
      if (!level.shared.span.empty()) path.push_back(stage_id(level.shared));
      ap.paths.emplace(client, std::move(path));
    }
    active_.push_back(std::move(ap));
    return active_.size() - 1;
  }

  /// `epoch_plan[k]` is the active plan index for epoch k, or npos when unserved.
  std::vector<RequestRecord> run(const std::vector<std::size_t>& epoch_plan) {
    epoch_plan_ = epoch_plan;
    gen_count_.assign(sc_.clients.size(), 0);
    rngs_.clear();
    for (std::size_t c = 0; c < sc_.clients.size(); ++c) {
      std::seed_seq seq{static_cast<std::uint32_t>(cfg_.seed), static_cast<std::uint32_t>(cfg_.seed >> 32),
                        static_cast<std::uint32_t>(c)};
      rngs_.emplace_back(seq);
      schedule_generation(c, 0.0);
    }
    while (!events_.empty()) {
      Event e = events_.top();
      if (e.t > horizon_ms_) break;
      events_.pop();
      switch (e.kind) {
        case kGenerate: on_generate(e.t, e.a); break;
        case kArrive: on_arrive(e.t, e.a); break;
        case kDispatch: try_dispatch(e.a, e.t); break;
        case kStageDone: on_stage_done(e.t, e.a, e.b); break;
        default: break;
      }
    }
    std::vector<RequestRecord> out;
    out.reserve(requests_.size());
    for (const auto& r : requests_) {
      const auto& client = sc_.clients[r.client];
      out.push_back({client.client_id, r.gen_ms, r.done_ms, r.gen_ms + client.slo_ms, r.status, r.epoch});
    }
    return out;
  }

 private:
  void push(double t, int kind, std::size_t a, std::size_t b = 0) { events_.push({t, kind, seq_++, a, b}); }

  void schedule_generation(std::size_t c, double now) {
    const double rate_per_ms = sc_.clients[c].rate_rps / 1000.0;
    double t;
    if (cfg_.poisson) {
      t = now + std::exponential_distribution<double>(rate_per_ms)(rngs_[c]);
    } else {
      double offset = 0.0;
      if (!cfg_.in_phase) {
        offset = static_cast<double>(c) / static_cast<double>(sc_.clients.size());
      }
      t = (static_cast<double>(gen_count_[c]) + offset) / rate_per_ms;
    }
    ++gen_count_[c];
    if (t < horizon_ms_) push(t, kGenerate, c);
  }

  int epoch_of(double t_ms) const {
    const int e = static_cast<int>(std::floor(t_ms / 1000.0 / sc_.epoch_s));
    return std::clamp(e, 0, static_cast<int>(epoch_plan_.size()) - 1);
  }

  void finish(Request& r, double t, RequestStatus s) {
    r.status = s;
    r.done_ms = t;
  }

  void on_generate(double t, std::size_t c) {
    schedule_generation(c, t);
    const auto& client = sc_.clients[c];
    Request r;
    r.client = c;
    r.gen_ms = t;
    r.epoch = epoch_of(t);
    requests_.push_back(r);
    const std::size_t id = requests_.size() - 1;
    const std::size_t ap = epoch_plan_[r.epoch];
    if (ap == kNone || !active_[ap].paths.count(client.client_id)) {
      finish(requests_[id], t, RequestStatus::dropped);
      return;
    }
    requests_[id].active = ap;
    const int p = active_[ap].partition.at(client.client_id);
    const double mbps = bandwidth_at(*client.trace, t / 1000.0);
    const double delay = client.device->mobile_ms(client.model->model_id, p) + transfer_ms(*client.model, p, mbps);
    push(t + delay, kArrive, id);
  }

  void on_arrive(double t, std::size_t id) {
    Request& r = requests_[id];
    const auto& client = sc_.clients[r.client];
    const auto& path = active_[r.active].paths.at(client.client_id);
    double bound = 0.0;
    for (auto s : path) bound += 2.0 * stages_[s].budget_ms;
    if ((t - r.gen_ms) + bound > client.slo_ms + kSlack) {
      finish(r, t, RequestStatus::dropped);
      return;
    }
    advance(t, id);
  }

  /// Sends the request to its next stage, or completes it.
  void advance(double t, std::size_t id) {
    Request& r = requests_[id];
    const auto& client = sc_.clients[r.client];
    const auto& path = active_[r.active].paths.at(client.client_id);
    if (r.pos >= path.size()) {
      const bool met = t - r.gen_ms <= client.slo_ms + kSlack;
      finish(r, t, met ? RequestStatus::met : RequestStatus::violated);
      return;
    }
    const std::size_t s = path[r.pos];
    auto& stage = stages_[s];
    r.enqueued_ms = t;
    stage.queue.push_back(id);
    if (stage.queue.size() == 1) push(t + stage.budget_ms, kDispatch, s);
    try_dispatch(s, t);
  }

  void try_dispatch(std::size_t s, double t) {
    auto& stage = stages_[s];
    while (stage.idle > 0 && !stage.queue.empty()) {
      const bool full = static_cast<int>(stage.queue.size()) >= stage.batch;
      const bool timed_out = t - requests_[stage.queue.front()].enqueued_ms >= stage.budget_ms - kSlack;
      if (!full && !timed_out) break;
      const int n = std::min<int>(stage.batch, static_cast<int>(stage.queue.size()));
      std::vector<std::size_t> batch(stage.queue.begin(), stage.queue.begin() + n);
      stage.queue.erase(stage.queue.begin(), stage.queue.begin() + n);
      --stage.idle;
      const double service = sc_.cost->latency_ms(stage.model_id, stage.span, n, stage.share);
      batches_.push_back(std::move(batch));
      push(t + service, kStageDone, s, batches_.size() - 1);
      if (!stage.queue.empty()) {
        const double due = requests_[stage.queue.front()].enqueued_ms + stage.budget_ms;
        if (due > t) push(due, kDispatch, s);
      }
    }
  }

  void on_stage_done(double t, std::size_t s, std::size_t b) {
    ++stages_[s].idle;
    std::vector<std::size_t> batch = std::move(batches_[b]);
    for (auto id : batch) {
      ++requests_[id].pos;
      advance(t, id);
    }
    try_dispatch(s, t);
  }

 public:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

 private:
  const Scenario& sc_;
  const SimConfig& cfg_;
  double horizon_ms_;
  std::vector<ActivePlan> active_;
  std::vector<StageRuntime> stages_;
  std::vector<std::size_t> epoch_plan_;
  std::vector<Request> requests_;
  std::vector<std::vector<std::size_t>> batches_;
  std::vector<std::size_t> gen_count_;
  std::vector<std::mt19937_64> rngs_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0;
};

int epoch_count(const Scenario& sc, double horizon_s) {
  return std::max(1, static_cast<int>(std::ceil(horizon_s / sc.epoch_s - 1e-9)));
}

void fill_epoch(EpochRecord& rec, const ExecutionPlan* plan, const Scenario& sc) {
  if (plan) {
    rec.total_resource = plan->total_resource;
    rec.gpus_used = plan->gpus_used;
    rec.partition = partition_of(*plan);
  }
  for (const auto& c : sc.clients) {
    if (!plan || !plan->routes.count(c.client_id)) rec.unserved_clients.push_back(c.client_id);
  }
}

}  // namespace

std::string status_name(RequestStatus s) {
  switch (s) {
    case RequestStatus::met: return "met";
    case RequestStatus::violated: return "violated";
    case RequestStatus::dropped: return "dropped";
    case RequestStatus::inflight: return "inflight";
  }
  return "unknown";
}

std::optional<double> RequestRecord::latency_ms() const {
  if (status == RequestStatus::met || status == RequestStatus::violated) return *done_ms - gen_ms;
  return std::nullopt;
}

double percentile(std::vector<double>& values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

namespace {

SimSummary summarize(const std::vector<RequestRecord>& reqs, std::optional<int> epoch) {
  SimSummary s;
  std::vector<double> lat;
  for (const auto& r : reqs) {
    if (epoch && r.epoch != *epoch) continue;
    ++s.generated;
    switch (r.status) {
      case RequestStatus::met: ++s.met; [[fallthrough]];
      case RequestStatus::violated:
        ++s.completed;
        lat.push_back(*r.latency_ms());
        break;
      case RequestStatus::dropped: ++s.dropped; break;
      case RequestStatus::inflight: ++s.inflight; break;
    }
  }
  s.p50_ms = percentile(lat, 0.50);
  s.p95_ms = percentile(lat, 0.95);
  s.p99_ms = percentile(lat, 0.99);
  s.max_ms = lat.empty() ? 0.0 : lat.back();
  s.slo_violation_rate = s.completed ? static_cast<double>(s.completed - s.met) / static_cast<double>(s.completed) : 0.0;
  s.drop_rate = s.generated ? static_cast<double>(s.dropped) / static_cast<double>(s.generated) : 0.0;
  return s;
}

}  // namespace

SimSummary SimReport::summary() const {
  SimSummary s = summarize(requests, std::nullopt);
  double weighted = 0.0;
  const double epoch_len = epochs.size() > 1 ? epochs[1].start_s - epochs[0].start_s : horizon_s;
  for (const auto& e : epochs) {
    const int total = e.total_resource.value_or(0);
    s.peak_total_resource = std::max(s.peak_total_resource, total);
    const double len = std::max(0.0, std::min(e.start_s + epoch_len, horizon_s) - e.start_s);
    weighted += total * len;
  }
  s.mean_total_resource = horizon_s > 0.0 ? weighted / horizon_s : 0.0;
  return s;
}

SimSummary SimReport::epoch_summary(int epoch) const {
  SimSummary s = summarize(requests, epoch);
  for (const auto& e : epochs) {
    if (e.index == epoch) {
      s.peak_total_resource = e.total_resource.value_or(0);
      s.mean_total_resource = s.peak_total_resource;
    }
  }
  return s;
}

SimReport simulate(const Scenario& sc, Planner planner, const SimConfig& cfg) {
  cfg.planner.validate();
  if (!(cfg.horizon_s >= 0.0)) throw ValidationError("horizon must be >= 0");
  Allocator alloc(*sc.cost, cfg.planner.max_batch, cfg.planner.instance_cap);
  PlanningContext ctx{sc.models, alloc, cfg.planner};

  SimReport report;
  report.planner = planner_name(planner);
  report.horizon_s = cfg.horizon_s;
  if (cfg.horizon_s == 0.0) return report;
  const int n = epoch_count(sc, cfg.horizon_s);

  std::vector<std::optional<int>> plan_epoch(n);
  std::map<std::string, int> desired;
  std::optional<int> current;
  for (int k = 0; k < n; ++k) {
    EpochRecord rec;
    rec.index = k;
    rec.start_s = k * sc.epoch_s;
    bool replan = k == 0;
    std::vector<Fragment> frags;
    if (!is_static(planner)) {
      auto ef = generate_epoch(sc.clients, rec.start_s, *sc.cost);
      std::map<std::string, int> want;
      for (const auto& f : ef.fragments) want[f.clients.front()] = f.start_layer;
      replan = replan || want != desired;
      desired = std::move(want);
      frags = std::move(ef.fragments);
    }
    if (replan) {
      rec.replanned = true;
      const auto t0 = std::chrono::steady_clock::now();
      try {
        ExecutionPlan plan = is_static(planner)
                                 ? plan_static(sc.clients, cfg.horizon_s, planner == Planner::static_plus, ctx)
                                 : run_planner(planner, frags, ctx);
        report.plans.emplace(k, std::move(plan));
        current = k;
      } catch (const InfeasibleError& e) {
        rec.plan_error = e.what();
        current.reset();
      }
      rec.plan_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    plan_epoch[k] = current;
    fill_epoch(rec, current ? &report.plans.at(*current) : nullptr, sc);
    report.epochs.push_back(std::move(rec));
  }

  Engine engine(sc, cfg);
  std::map<int, std::size_t> active;
  for (const auto& [k, plan] : report.plans) active[k] = engine.add_plan(plan);
  std::vector<std::size_t> epoch_plan(n, Engine::kNone);
  for (int k = 0; k < n; ++k) {
    if (plan_epoch[k]) epoch_plan[k] = active.at(*plan_epoch[k]);
  }
  report.requests = engine.run(epoch_plan);
  return report;
}

SimReport simulate_with_plan(const Scenario& sc, const ExecutionPlan& plan, const SimConfig& cfg) {
  if (!(cfg.horizon_s >= 0.0)) throw ValidationError("horizon must be >= 0");
  SimReport report;
  report.planner = plan.planner;
  report.horizon_s = cfg.horizon_s;
  if (cfg.horizon_s == 0.0) return report;
  report.plans.emplace(0, plan);
  const int n = epoch_count(sc, cfg.horizon_s);
  for (int k = 0; k < n; ++k) {
    EpochRecord rec;
    rec.index = k;
    rec.start_s = k * sc.epoch_s;
    rec.replanned = k == 0;
    fill_epoch(rec, &report.plans.at(0), sc);
    report.epochs.push_back(std::move(rec));
  }
  Engine engine(sc, cfg);
  const std::size_t ap = engine.add_plan(report.plans.at(0));
  report.requests = engine.run(std::vector<std::size_t>(n, ap));
  return report;
}

nlohmann::json summary_to_json(const SimSummary& s) {
  return {{"generated", s.generated},
          {"completed", s.completed},
          {"met", s.met},
          {"dropped", s.dropped},
          {"inflight", s.inflight},
          {"p50_ms", s.p50_ms},
          {"p95_ms", s.p95_ms},
          {"p99_ms", s.p99_ms},
          {"max_ms", s.max_ms},
          {"slo_violation_rate", s.slo_violation_rate},
          {"drop_rate", s.drop_rate},
          {"peak_total_resource", s.peak_total_resource},
          {"mean_total_resource", s.mean_total_resource}};
}

nlohmann::json report_to_json(const SimReport& report, bool with_plans) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["planner"] = report.planner;
  j["horizon_s"] = report.horizon_s;
  j["summary"] = summary_to_json(report.summary());
  auto epochs = nlohmann::json::array();
  for (const auto& e : report.epochs) {
    nlohmann::json je{{"index", e.index},
                      {"start_s", e.start_s},
                      {"replanned", e.replanned},
                      {"total_resource", e.total_resource ? nlohmann::json(*e.total_resource) : nlohmann::json()},
                      {"gpus_used", e.gpus_used},
                      {"unserved_clients", e.unserved_clients},
                      {"partition", e.partition}};
    if (!e.plan_error.empty()) je["plan_error"] = e.plan_error;
    je["stats"] = summary_to_json(report.epoch_summary(e.index));
    epochs.push_back(std::move(je));
  }
  j["epochs"] = std::move(epochs);
  if (with_plans) {
    auto plans = nlohmann::json::object();
    for (const auto& [k, p] : report.plans) plans[std::to_string(k)] = plan_to_json(p);
    j["plans"] = std::move(plans);
  }
  return j;
}

void write_requests_csv(const SimReport& report, std::ostream& out) {
  out << "client,gen_ms,done_ms,latency_ms,deadline_ms,status\n";
  for (const auto& r : report.requests) {
    out << r.client << ',' << format_double(r.gen_ms) << ',' << (r.done_ms ? format_double(*r.done_ms) : "") << ',';
    if (auto l = r.latency_ms()) out << format_double(*l);
    out << ',' << format_double(r.deadline_ms) << ',' << status_name(r.status) << '\n';
  }
}

}  // namespace fragsched
