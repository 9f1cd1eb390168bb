#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Outcome {
  int code;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Runs the CLI from `cwd` with stdout discarded and stderr captured.
Outcome cli(const std::string& args, const fs::path& cwd) {
  const auto err = fs::temp_directory_path() / "stratacast_test_cli_stderr.txt";
  const auto cmd = "cd '" + cwd.string() + "' && '" STRATACAST_CLI_PATH "' " + args + " > /dev/null 2> '" +
                   err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

std::set<fs::path> tree(const fs::path& root) {
  std::set<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) out.insert(fs::relative(e.path(), root));
  return out;
}

json small_experiment(const std::string& data) {
  return {{"dataset", data},
          {"split", {{"train", {2000, 2001}}, {"test", {2002, 2002}}}},
          {"strategies", {"random", "stratified_time"}},
          {"n_members", 2},
          {"n_steps", 3},
          {"leads", {1, 3}},
          {"eval_stride_hours", 24 * 20},
          {"seed", 3},
          {"output_dir", "results"}};
}

// A workspace with a synthetic config and a generated dataset.
fs::path workspace(const std::string& name) {
  const auto dir = fixtures::temp_dir(name);
  std::ofstream(dir / "synth.json") << fixtures::small_synthetic(3, 21).to_json().dump(1);
  REQUIRE(cli("generate-data --config synth.json --out data", dir).code == 0);
  std::ofstream(dir / "exp.json") << small_experiment("data/dataset.ften").dump(1);
  return dir;
}

}  // namespace

TEST_CASE("CLI: help exits 0 for the app and every subcommand") {
  const auto dir = fixtures::temp_dir("cli_help");
  CHECK(cli("--help", dir).code == 0);
  for (const char* sub : {"generate-data", "select", "train", "rollout", "evaluate", "run", "report"}) {
    CAPTURE(std::string(sub));
    CHECK(cli(std::string(sub) + " --help", dir).code == 0);
  }
  CHECK(fs::is_empty(dir));
}

TEST_CASE("CLI: usage errors exit 1 with a message on stderr") {
  const auto dir = workspace("cli_usage");
  const auto missing = cli("select --config exp.json --out sel", dir);
  CHECK(missing.code == 1);
  CHECK(missing.err.find("--strategy") != std::string::npos);
  CHECK(cli("select --config exp.json --strategy random --out sel --bogus", dir).code == 1);
  CHECK(cli("select --config exp.json --strategy random --out sel --fraction abc", dir).code == 1);
  CHECK(cli("", dir).code == 1);
  CHECK(cli("frobnicate", dir).code == 1);
  CHECK(cli("run --config nope.json", dir).code == 1);
  for (const char* sub : {"generate-data", "select", "train", "rollout", "evaluate", "run", "report"}) {
    CAPTURE(std::string(sub));
    CHECK(cli(std::string(sub) + " --unknown-flag 1", dir).code == 1);
  }
  CHECK_FALSE(fs::exists(dir / "sel"));
}

TEST_CASE("CLI: data and validation errors exit 2") {
  const auto dir = workspace("cli_data");
  auto bad = small_experiment("data/dataset.ften");
  bad["fraction"] = 2.0;
  std::ofstream(dir / "bad.json") << bad.dump();
  const auto r = cli("select --config bad.json --strategy random --out sel", dir);
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error: ", 0) == 0);

  std::ofstream(dir / "corrupt.ften") << "FTEN";
  std::ofstream(dir / "corrupt.json") << small_experiment("corrupt.ften").dump();
  CHECK(cli("run --config corrupt.json --out res", dir).code == 2);
  CHECK(cli("select --config exp.json --strategy coin_flip --out sel", dir).code == 2);
  CHECK(cli("select --config exp.json --strategy random --fraction 0.0001 --out sel", dir).code == 2);
}

TEST_CASE("CLI: select is reproducible across processes") {
  const auto dir = workspace("cli_select");
  const std::string args = "select --config exp.json --strategy stratified_time --fraction 0.2 --seed 7 --out ";
  REQUIRE(cli(args + "a", dir).code == 0);
  REQUIRE(cli(args + "b", dir).code == 0);
  const auto a = slurp(dir / "a" / "selection.json");
  CHECK(a == slurp(dir / "b" / "selection.json"));
  const auto j = json::parse(a);
  CHECK(j["strategy"] == "stratified_time");
  CHECK(j["seed"] == 7);
  CHECK(j["indices"].size() > 0);
}

TEST_CASE("CLI: generate-data then run yields a non-empty metrics CSV") {
  const auto dir = workspace("cli_run");
  CHECK(fs::exists(dir / "data" / "dataset.ften"));
  const auto before = tree(dir);
  REQUIRE(cli("run --config exp.json --out res --jobs 2", dir).code == 0);
  const auto csv = slurp(dir / "res" / "metrics.csv");
  CHECK(csv.rfind("method,variable,lead_days,crps,rmse,ssr\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') > 1);
  CHECK(fs::exists(dir / "res" / "report_synthetic_0.csv"));

  // Nothing outside --out changed.
  auto after = tree(dir);
  std::erase_if(after, [](const fs::path& p) { return *p.begin() == "res"; });
  CHECK(after == before);

  SUBCASE("a second run gives identical bytes") {
    REQUIRE(cli("run --config exp.json --out res2", dir).code == 0);
    CHECK(slurp(dir / "res" / "metrics_raw.csv") == slurp(dir / "res2" / "metrics_raw.csv"));
    CHECK(slurp(dir / "res" / "metrics.csv") == slurp(dir / "res2" / "metrics.csv"));
  }
  SUBCASE("without --out the config's output_dir is used") {
    REQUIRE(cli("run --config exp.json --strategy random", dir).code == 0);
    CHECK(fs::exists(dir / "results" / "metrics.csv"));
  }
  SUBCASE("report re-tabulates the raw metrics") {
    REQUIRE(cli("report --metrics res/metrics_raw.csv --leads 1,3 --out rep", dir).code == 0);
    CHECK(slurp(dir / "rep" / "report_synthetic_1.csv") == slurp(dir / "res" / "report_synthetic_1.csv"));
  }
}

TEST_CASE("CLI: the staged pipeline select, train, rollout, evaluate") {
  const auto dir = workspace("cli_stages");
  REQUIRE(cli("select --config exp.json --strategy random --seed 2 --out s", dir).code == 0);
  REQUIRE(cli("train --config exp.json --selection s/selection.json --seed 2 --out m", dir).code == 0);
  REQUIRE(cli("rollout --config exp.json --model m/model.json --members 3 --seed 2 --out f", dir).code == 0);
  REQUIRE(cli("evaluate --config exp.json --forecast f/forecast.json --method random --out e", dir).code == 0);
  const auto csv = slurp(dir / "e" / "metrics.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 * 3);
  CHECK(csv.find("\nrandom,synthetic_0,1,") != std::string::npos);
  const auto fc = json::parse(slurp(dir / "f" / "forecast.json"));
  CHECK(fc["n_members"] == 3);
  CHECK(fc["n_steps"] == 3);
}
