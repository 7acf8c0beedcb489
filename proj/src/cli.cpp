#include "fragsched/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <fstream>
#include <functional>
#include <ostream>
#include <sstream>
#include <thread>

#include "fragsched/error.hpp"
#include "fragsched/format.hpp"
#include "fragsched/planner.hpp"
#include "fragsched/scenario.hpp"
#include "fragsched/simulator.hpp"

namespace fragsched {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;

struct RunConfig {
  std::string subcommand;
  std::string scenario;
  std::string planner = "graft";
  std::string planners = "graft,gslice,gslice+,static,static+";
  std::uint64_t seed = 0;
  double merge_threshold = 0.2;
  int group_size = 5;
  std::string factor_weights = "1,1,1";
  double budget_grid_ms = 1.0;
  int instance_cap = 0;
  int max_batch = kDefaultMaxBatch;
  int gpus = -1;
  int gpu_capacity = kDefaultGpuCapacity;
  double horizon_s = 120.0;
  int workers = 2;
  bool all_layers = false;
  bool per_fragment_budget = false;
  bool poisson = false;
  bool in_phase = false;
  double at_s = 0.0;
  int optimal_cap = 8;
  std::string out;
  std::string requests_csv;
  std::vector<std::string> model_files;
  double c0 = 1.0;
  double c1 = 0.25;
  double kappa = 0.9;
  bool synthetic_overridden = false;
};

std::array<double, 3> parse_weights(const std::string& text) {
  std::array<double, 3> w{};
  std::stringstream ss(text);
  std::string item;
  std::size_t i = 0;
  while (std::getline(ss, item, ',')) {
    if (i >= 3) break;
    try {
      std::size_t used = 0;
      w[i] = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("--factor-weights: '" + item + "' is not a number");
    }
    ++i;
  }
  if (i != 3 || std::getline(ss, item, ',')) throw ValidationError("--factor-weights takes three comma-separated values");
  return w;
}

std::vector<Planner> parse_planner_list(const std::string& text) {
  std::vector<Planner> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const Planner p = parse_planner(item);
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
  if (out.empty()) throw ValidationError("--planners is empty");
  return out;
}

PlannerConfig planner_config(const RunConfig& rc, const Scenario* sc) {
  PlannerConfig pc;
  pc.merge.threshold = rc.merge_threshold;
  pc.group.group_size = rc.group_size;
  pc.group.factor_weights = parse_weights(rc.factor_weights);
  pc.group.seed = rc.seed;
  pc.realign.budget_grid_ms = rc.budget_grid_ms;
  pc.realign.all_layers = rc.all_layers;
  pc.realign.per_fragment_budget = rc.per_fragment_budget;
  pc.max_batch = rc.max_batch;
  if (rc.instance_cap > 0) pc.instance_cap = rc.instance_cap;
  pc.workers = rc.workers;
  pc.gpus = rc.gpus >= 0 ? rc.gpus : (sc ? sc->gpus : 0);
  pc.gpu_capacity = rc.gpu_capacity;
  pc.optimal_cap = rc.optimal_cap;
  if (!(rc.merge_threshold >= 0.0)) throw ValidationError("--merge-threshold must be >= 0");
  if (rc.instance_cap < 0) throw ValidationError("--instance-cap must be >= 0");
  pc.validate();
  return pc;
}

nlohmann::json config_echo(const RunConfig& rc, const PlannerConfig& pc) {
  nlohmann::json j{{"subcommand", rc.subcommand},
                   {"scenario", rc.scenario},
                   {"seed", rc.seed},
                   {"merge_threshold", pc.merge.threshold},
                   {"budget_tolerance_ms", pc.merge.budget_tolerance_ms},
                   {"group_size", pc.group.group_size},
                   {"factor_weights", pc.group.factor_weights},
                   {"budget_grid_ms", pc.realign.budget_grid_ms},
                   {"all_layers", pc.realign.all_layers},
                   {"per_fragment_budget", pc.realign.per_fragment_budget},
                   {"max_batch", pc.max_batch},
                   {"instance_cap", pc.instance_cap ? nlohmann::json(*pc.instance_cap) : nlohmann::json()},
                   {"gpus", pc.gpus},
                   {"gpu_capacity", pc.gpu_capacity},
                   {"workers", pc.workers},
                   {"optimal_cap", pc.optimal_cap}};
  if (rc.subcommand == "plan") {
    j["planner"] = rc.planner;
    j["at_s"] = rc.at_s;
    j["horizon_s"] = rc.horizon_s;
  } else if (rc.subcommand == "simulate") {
    j["planner"] = rc.planner;
    j["horizon_s"] = rc.horizon_s;
    j["poisson"] = rc.poisson;
    j["in_phase"] = rc.in_phase;
  } else if (rc.subcommand == "compare") {
    j["planners"] = rc.planners;
    j["horizon_s"] = rc.horizon_s;
    j["poisson"] = rc.poisson;
    j["in_phase"] = rc.in_phase;
  }
  return j;
}

/// Writes through `fn` to `path`, or to `out` when the path is empty.
void emit(const std::string& path, std::ostream& out, const std::function<void(std::ostream&)>& fn) {
  if (path.empty()) {
    fn(out);
    return;
  }
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path);
  fn(f);
  if (!f) throw Error("failed writing " + path);
}

void report_infeasible(const InfeasibleError& e, std::ostream& err) {
  err << "infeasible: " << e.what() << '\n';
  for (const auto& f : e.fragments()) err << "  fragment " << f << '\n';
}

int cmd_plan(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const Scenario sc = load_scenario(rc.scenario);
  const PlannerConfig pc = planner_config(rc, &sc);
  const Planner planner = parse_planner(rc.planner);
  for (const auto& w : sc.warnings) err << "warning: " << w << '\n';

  Allocator alloc(*sc.cost, pc.max_batch, pc.instance_cap);
  PlanningContext ctx{sc.models, alloc, pc};
  std::vector<std::string> infeasible;
  ExecutionPlan plan;
  try {
    if (is_static(planner)) {
      plan = plan_static(sc.clients, rc.horizon_s, planner == Planner::static_plus, ctx, &infeasible);
    } else {
      auto ef = generate_epoch(sc.clients, rc.at_s, *sc.cost);
      infeasible = ef.infeasible_clients;
      plan = run_planner(planner, ef.fragments, ctx);
    }
  } catch (const InfeasibleError& e) {
    report_infeasible(e, err);
    return kExitInfeasible;
  }

  nlohmann::json j;
  j["format_version"] = 1;
  j["config"] = config_echo(rc, pc);
  j["plan"] = plan_to_json(plan);
  j["infeasible_clients"] = infeasible;
  emit(rc.out, out, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
  if (!infeasible.empty()) {
    err << "infeasible: no partition leaves a positive server budget for";
    for (const auto& c : infeasible) err << ' ' << c;
    err << '\n';
    return kExitInfeasible;
  }
  return kExitOk;
}

SimConfig sim_config(const RunConfig& rc, const PlannerConfig& pc) {
  SimConfig cfg;
  cfg.horizon_s = rc.horizon_s;
  cfg.poisson = rc.poisson;
  cfg.in_phase = rc.in_phase;
  cfg.seed = rc.seed;
  cfg.planner = pc;
  return cfg;
}

int cmd_simulate(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const Scenario sc = load_scenario(rc.scenario);
  const PlannerConfig pc = planner_config(rc, &sc);
  const Planner planner = parse_planner(rc.planner);
  for (const auto& w : sc.warnings) err << "warning: " << w << '\n';

  const SimReport report = simulate(sc, planner, sim_config(rc, pc));
  nlohmann::json j = report_to_json(report, true);
  j["config"] = config_echo(rc, pc);
  emit(rc.out, out, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
  if (!rc.requests_csv.empty()) {
    emit(rc.requests_csv, out, [&](std::ostream& o) {
      o << "# config: " << j["config"].dump() << '\n';
      write_requests_csv(report, o);
    });
  }
  if (!report.epochs.empty() && !report.epochs.front().plan_error.empty()) {
    err << "infeasible: first epoch: " << report.epochs.front().plan_error << '\n';
    return kExitInfeasible;
  }
  return kExitOk;
}

int cmd_compare(const RunConfig& rc, std::ostream& out, std::ostream& err) {
  const Scenario sc = load_scenario(rc.scenario);
  const PlannerConfig pc = planner_config(rc, &sc);
  const auto planners = parse_planner_list(rc.planners);
  for (const auto& w : sc.warnings) err << "warning: " << w << '\n';
  const SimConfig cfg = sim_config(rc, pc);

  std::vector<std::optional<SimReport>> reports(planners.size());
  std::vector<std::string> errors(planners.size());
  {
    std::atomic<std::size_t> next{0};
    auto work = [&] {
      for (std::size_t i = next++; i < planners.size(); i = next++) {
        try {
          reports[i] = simulate(sc, planners[i], cfg);
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
    };
    std::vector<std::jthread> pool;
    const auto n = std::min<std::size_t>(static_cast<std::size_t>(pc.workers), planners.size());
    for (std::size_t w = 1; w < n; ++w) pool.emplace_back(work);
    work();
  }
  for (std::size_t i = 0; i < planners.size(); ++i) {
    if (!errors[i].empty()) {
      err << planner_name(planners[i]) << ": " << errors[i] << '\n';
      return kExitError;
    }
  }

  bool infeasible = false;
  emit(rc.out, out, [&](std::ostream& o) {
    o << "# config: " << config_echo(rc, pc).dump() << '\n';
    o << "epoch,planner,total_resource,p99_latency_ms,slo_violation_rate,drop_rate,plan_time_ms\n";
    const std::size_t epochs = reports.front()->epochs.size();
    for (std::size_t k = 0; k < epochs; ++k) {
      for (std::size_t i = 0; i < planners.size(); ++i) {
        const auto& rep = *reports[i];
        const auto& e = rep.epochs[k];
        const SimSummary s = rep.epoch_summary(e.index);
        if (!e.plan_error.empty()) infeasible = true;
        o << e.index << ',' << rep.planner << ',' << (e.total_resource ? std::to_string(*e.total_resource) : "")
          << ',' << format_double(s.p99_ms) << ',' << format_double(s.slo_violation_rate) << ','
          << format_double(s.drop_rate) << ',' << format_double(e.plan_time_ms) << '\n';
      }
    }
  });
  if (infeasible) err << "warning: some planners were infeasible in some epochs; their rows leave total_resource empty\n";
  return kExitOk;
}

int cmd_synth_profile(const RunConfig& rc, std::ostream& out, std::ostream&) {
  ModelRegistry models;
  SyntheticParams params;
  if (!rc.scenario.empty()) {
    const Scenario sc = load_scenario(rc.scenario);
    models = sc.models;
    if (const auto* p = sc.cost->synthetic_params()) params = *p;
  }
  for (const auto& f : rc.model_files) {
    auto m = load_model(f);
    const std::string id = m.model_id;
    models[id] = std::make_shared<const ModelSpec>(std::move(m));
  }
  if (models.empty()) throw ValidationError("synth-profile needs --scenario or --model");
  if (rc.synthetic_overridden) params = {rc.c0, rc.c1, rc.kappa};
  const CostModel cost = CostModel::synthetic(params, models);

  std::vector<int> shares;
  for (int s = kMinShare; s <= kMaxShare; ++s) shares.push_back(s);
  std::vector<int> batches;
  for (int b = 1; b <= rc.max_batch; b *= 2) batches.push_back(b);
  std::vector<ProfileRow> rows;
  for (const auto& [id, model] : models) {
    auto part = tabulate(cost, *model, batches, shares);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  emit(rc.out, out, [&](std::ostream& o) {
    nlohmann::json cfg{{"subcommand", rc.subcommand}, {"scenario", rc.scenario}, {"models", rc.model_files},
                       {"c0", params.c0}, {"c1", params.c1}, {"kappa", params.kappa}, {"max_batch", rc.max_batch}};
    o << "# config: " << cfg.dump() << '\n';
    write_profile_csv(o, rows);
  });
  return kExitOk;
}

void add_scheduler_flags(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--scenario", rc.scenario, "Scenario JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", rc.seed, "Seed for grouping and arrivals");
  cmd->add_option("--merge-threshold", rc.merge_threshold, "Resource margin that closes a merged fragment");
  cmd->add_option("--group-size", rc.group_size, "Fragments per group");
  cmd->add_option("--factor-weights", rc.factor_weights, "Similarity weights for partition point, budget and rate");
  cmd->add_option("--budget-grid-ms", rc.budget_grid_ms, "Shared-stage budget step");
  cmd->add_option("--instance-cap", rc.instance_cap, "Maximum instances per stage (0: none)");
  cmd->add_option("--max-batch", rc.max_batch, "Largest batch size");
  cmd->add_option("--gpus", rc.gpus, "GPU count (0: unlimited; default from scenario)");
  cmd->add_option("--gpu-capacity", rc.gpu_capacity, "Usable share per GPU");
  cmd->add_option("--horizon", rc.horizon_s, "Simulated seconds (static planners average bandwidth over it)");
  cmd->add_option("--workers", rc.workers, "Worker threads");
  cmd->add_flag("--all-layers", rc.all_layers, "Try every boundary as a re-partition point");
  cmd->add_flag("--per-fragment-budget", rc.per_fragment_budget, "Bound alignment stages by each member's own budget");
  cmd->add_option("--optimal-cap", rc.optimal_cap, "Largest merged fragment count for the optimal planner");
  cmd->add_option("--out", rc.out, "Output file (default stdout)");
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  CLI::App app{"Scheduler and simulator for partitioned DNN serving"};
  app.require_subcommand(1);

  auto* plan = app.add_subcommand("plan", "Plan one epoch and print the plan JSON");
  add_scheduler_flags(plan, rc);
  plan->add_option("--planner", rc.planner, "graft, gslice, gslice+, static, static+ or optimal");
  plan->add_option("--at", rc.at_s, "Trace time in seconds to partition at");

  auto* sim = app.add_subcommand("simulate", "Simulate a scenario under one planner");
  add_scheduler_flags(sim, rc);
  sim->add_option("--planner", rc.planner, "graft, gslice, gslice+, static, static+ or optimal");
  sim->add_flag("--poisson", rc.poisson, "Poisson arrivals");
  sim->add_flag("--in-phase", rc.in_phase, "Start every client's deterministic arrivals at t = 0");
  sim->add_option("--requests-csv", rc.requests_csv, "Per-request CSV output");

  auto* cmp = app.add_subcommand("compare", "Simulate several planners on the same scenario");
  add_scheduler_flags(cmp, rc);
  cmp->add_option("--planners", rc.planners, "Comma-separated planner list");
  cmp->add_flag("--poisson", rc.poisson, "Poisson arrivals");
  cmp->add_flag("--in-phase", rc.in_phase, "Start every client's deterministic arrivals at t = 0");

  auto* synth = app.add_subcommand("synth-profile", "Materialize the synthetic cost model as a profile CSV");
  synth->add_option("--scenario", rc.scenario, "Scenario JSON whose models and parameters to use")
      ->check(CLI::ExistingFile);
  synth->add_option("--model", rc.model_files, "Model JSON (repeatable)")->check(CLI::ExistingFile);
  auto* c0 = synth->add_option("--c0", rc.c0, "Fixed cost per batch");
  auto* c1 = synth->add_option("--c1", rc.c1, "Marginal cost per extra batch item");
  auto* kappa = synth->add_option("--kappa", rc.kappa, "Share scaling exponent");
  synth->add_option("--max-batch", rc.max_batch, "Largest batch (powers of two up to it)");
  synth->add_option("--out", rc.out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << "run with --help for usage\n";
    return kExitError;
  }

  try {
    if (*plan) {
      rc.subcommand = "plan";
      return cmd_plan(rc, out, err);
    }
    if (*sim) {
      rc.subcommand = "simulate";
      return cmd_simulate(rc, out, err);
    }
    if (*cmp) {
      rc.subcommand = "compare";
      return cmd_compare(rc, out, err);
    }
    rc.subcommand = "synth-profile";
    rc.synthetic_overridden = c0->count() + c1->count() + kappa->count() > 0;
    if (rc.synthetic_overridden && !rc.scenario.empty()) {
      // Unset parameters keep the scenario's values.
      const Scenario sc = load_scenario(rc.scenario);
      if (const auto* p = sc.cost->synthetic_params()) {
        if (!c0->count()) rc.c0 = p->c0;
        if (!c1->count()) rc.c1 = p->c1;
        if (!kappa->count()) rc.kappa = p->kappa;
      }
    }
    return cmd_synth_profile(rc, out, err);
  } catch (const InfeasibleError& e) {
    report_infeasible(e, err);
    return kExitInfeasible;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace fragsched
