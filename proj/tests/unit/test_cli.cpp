#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fragsched/cli.hpp"
#include "fragsched/cost_model.hpp"
#include "support/fixtures.hpp"

using namespace fragsched;
using namespace fragsched::testing;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "fragsched");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string scenario(const std::string& name) { return (data_dir() / "scenarios" / name).string(); }
std::string fixture(const std::string& name) { return (fixture_dir() / name).string(); }

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "fragsched_cli_test";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("plan prints a versioned plan with its configuration") {
  const auto r = cli({"plan", "--scenario", scenario("uniform4.json")});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j["format_version"] == 1);
  CHECK(j["config"]["merge_threshold"] == 0.2);
  CHECK(j["config"]["group_size"] == 5);
  CHECK(j["plan"]["total_resource"].get<int>() > 0);
  CHECK(j["plan"]["planner"] == "graft");
}

TEST_CASE("plan on the fixture matches the golden file") {
  // The config echo records the scenario path as given, so run from the source tree.
  const auto cwd = std::filesystem::current_path();
  std::filesystem::current_path(source_dir());
  const auto r = cli({"plan", "--scenario", "tests/fixtures/sharing_friendly.json", "--seed", "1"});
  std::filesystem::current_path(cwd);
  REQUIRE(r.code == 0);
  CHECK(r.out == slurp(fixture_dir() / "sharing_friendly.plan.json"));
}

TEST_CASE("plan exit codes") {
  CHECK(cli({"plan", "--scenario", scenario("uniform4.json"), "--bogus"}).code == 1);
  CHECK(cli({"plan"}).code == 1);
  CHECK(cli({}).code == 1);
  CHECK(cli({"plan", "--scenario", scenario("uniform4.json"), "--planner", "nope"}).code == 1);
  CHECK(cli({"plan", "--scenario", scenario("uniform4.json"), "--factor-weights", "1,2"}).code == 1);
  CHECK(cli({"plan", "--scenario", scenario("uniform4.json"), "--group-size", "0"}).code == 1);
  CHECK(cli({"plan", "--scenario", "/nonexistent.json"}).code == 1);
  CHECK(cli({"--help"}).code == 0);

  const auto empty = cli({"plan", "--scenario", fixture("empty.json")});
  REQUIRE(empty.code == 0);
  CHECK(nlohmann::json::parse(empty.out)["plan"]["total_resource"] == 0);

  const auto tight = cli({"plan", "--scenario", fixture("infeasible.json")});
  CHECK(tight.code == 2);
  CHECK(tight.err.find("tight") != std::string::npos);

  const auto few_gpus = cli({"plan", "--scenario", scenario("mixed20.json"), "--gpus", "1", "--gpu-capacity", "10"});
  CHECK(few_gpus.code == 2);
  CHECK(few_gpus.err.find("infeasible") != std::string::npos);
}

TEST_CASE("simulate writes reproducible reports") {
  const auto a = scratch("a.json"), b = scratch("b.json"), ca = scratch("a.csv"), cb = scratch("b.csv");
  for (const auto& [json, csv] : {std::pair{a, ca}, std::pair{b, cb}}) {
    const auto r = cli({"simulate", "--scenario", scenario("uniform4.json"), "--horizon", "20", "--poisson", "--seed",
                        "5", "--out", json.string(), "--requests-csv", csv.string()});
    REQUIRE(r.code == 0);
  }
  CHECK(slurp(a) == slurp(b));
  CHECK(slurp(ca) == slurp(cb));
  const auto j = nlohmann::json::parse(slurp(a));
  CHECK(j["format_version"] == 1);
  CHECK(j["config"]["seed"] == 5);
  CHECK(j["config"]["poisson"] == true);
  CHECK(slurp(ca).find("client,gen_ms,done_ms,latency_ms,deadline_ms,status") != std::string::npos);

  const auto zero = cli({"simulate", "--scenario", scenario("uniform4.json"), "--horizon", "0"});
  REQUIRE(zero.code == 0);
  CHECK(nlohmann::json::parse(zero.out)["summary"]["generated"] == 0);

  const auto refuse = cli({"simulate", "--scenario", scenario("mixed20.json"), "--planner", "optimal", "--horizon", "10"});
  CHECK(refuse.code == 1);
  CHECK(refuse.err.find("refuses") != std::string::npos);
}

TEST_CASE("compare emits one row per epoch and planner") {
  const auto r = cli({"compare", "--scenario", fixture("sharing_friendly.json"), "--planners", "graft,gslice",
                      "--horizon", "10", "--seed", "1"});
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# config: ", 0) == 0);
  std::getline(in, line);
  CHECK(line == "epoch,planner,total_resource,p99_latency_ms,slo_violation_rate,drop_rate,plan_time_ms");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  REQUIRE(rows.size() == 2);
  CHECK(rows[0][1] == "graft");
  CHECK(rows[1][1] == "gslice");
  CHECK(std::stoi(rows[0][2]) < std::stoi(rows[1][2]));
}

TEST_CASE("synth-profile materializes the synthetic model") {
  const auto path = scratch("vgg.csv");
  const auto model = (data_dir() / "models" / "vgg.json").string();
  const auto r = cli({"synth-profile", "--model", model, "--out", path.string()});
  REQUIRE(r.code == 0);
  std::ifstream in(path);
  std::string line;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '#') ++rows;
  }
  CHECK(rows == 1 + 21 * 600);  // header plus 6 layers' 21 spans
  const auto table = load_profiles(path);
  const auto m = std::make_shared<const ModelSpec>(load_model(model));
  const auto synth = CostModel::synthetic({}, {{"vgg", m}});
  CHECK(table.latency_ms("vgg", {1, 4}, 8, 37) == synth.latency_ms("vgg", {1, 4}, 8, 37));

  CHECK(cli({"synth-profile", "--model", model, "--kappa", "0"}).code == 1);
  CHECK(cli({"synth-profile"}).code == 1);
}
