#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stratacast/stratacast.h"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct Failure {
  int code;
};

void check(sc_status st) {
  if (st == SC_OK) return;
  std::fprintf(stderr, "error: %s\n", sc_last_error());
  throw Failure{kExitData};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Experiment = std::unique_ptr<sc_experiment, Deleter<sc_experiment, sc_experiment_free>>;
using Selection = std::unique_ptr<sc_selection, Deleter<sc_selection, sc_selection_free>>;
using Model = std::unique_ptr<sc_forecaster, Deleter<sc_forecaster, sc_forecaster_free>>;
using Forecast = std::unique_ptr<sc_forecast, Deleter<sc_forecast, sc_forecast_free>>;
using Metrics = std::unique_ptr<sc_metrics, Deleter<sc_metrics, sc_metrics_free>>;

struct Options {
  std::string config;
  std::vector<std::string> strategies;
  std::optional<double> fraction;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> members;
  std::optional<std::size_t> steps;
  std::optional<std::size_t> jobs;
  std::string out;
  bool flat_grid = false;
  std::string selection;
  std::string model;
  std::string forecast;
  std::string metrics;
  std::string method = "forecast";
  std::vector<int> leads{5, 10};
};

Experiment load_experiment(const Options& o) {
  sc_experiment* raw = nullptr;
  check(sc_experiment_load(o.config.c_str(), &raw));
  Experiment exp(raw);
  if (o.seed) check(sc_experiment_set_seed(exp.get(), *o.seed));
  if (o.fraction) check(sc_experiment_set_fraction(exp.get(), *o.fraction));
  if (o.members) check(sc_experiment_set_members(exp.get(), *o.members));
  if (o.steps) check(sc_experiment_set_steps(exp.get(), *o.steps));
  if (o.jobs) check(sc_experiment_set_jobs(exp.get(), *o.jobs));
  if (o.flat_grid) check(sc_experiment_set_flat_grid(exp.get(), 1));
  return exp;
}

std::string out_file(const Options& o, const char* name) {
  std::filesystem::create_directories(o.out);
  return (std::filesystem::path(o.out) / name).string();
}

void cmd_generate(const Options& o) {
  check(sc_generate_dataset(o.config.c_str(), o.out.c_str(), o.seed ? &*o.seed : nullptr));
}

void cmd_select(const Options& o) {
  auto exp = load_experiment(o);
  sc_selection* raw = nullptr;
  check(sc_select(exp.get(), o.strategies.front().c_str(), sc_experiment_seed(exp.get()), &raw));
  Selection sel(raw);
  check(sc_selection_save(sel.get(), out_file(o, "selection.json").c_str()));
}

void cmd_train(const Options& o) {
  auto exp = load_experiment(o);
  sc_selection* raw_sel = nullptr;
  check(sc_selection_load(o.selection.c_str(), &raw_sel));
  Selection sel(raw_sel);
  sc_forecaster* raw_model = nullptr;
  check(sc_train(exp.get(), sel.get(), sc_experiment_seed(exp.get()), &raw_model));
  Model model(raw_model);
  check(sc_forecaster_save(model.get(), out_file(o, "model.json").c_str()));
}

void cmd_rollout(const Options& o) {
  auto exp = load_experiment(o);
  sc_forecaster* raw_model = nullptr;
  check(sc_forecaster_load(o.model.c_str(), &raw_model));
  Model model(raw_model);
  sc_forecast* raw_fc = nullptr;
  check(sc_rollout(exp.get(), model.get(), sc_experiment_seed(exp.get()), &raw_fc));
  Forecast fc(raw_fc);
  check(sc_forecast_save(fc.get(), out_file(o, "forecast.json").c_str()));
}

void cmd_evaluate(const Options& o) {
  auto exp = load_experiment(o);
  sc_forecast* raw_fc = nullptr;
  check(sc_forecast_load(o.forecast.c_str(), &raw_fc));
  Forecast fc(raw_fc);
  sc_metrics* raw_m = nullptr;
  check(sc_evaluate(exp.get(), fc.get(), o.method.c_str(), &raw_m));
  Metrics m(raw_m);
  check(sc_metrics_save(m.get(), out_file(o, "metrics.csv").c_str()));
}

void cmd_run(const Options& o) {
  auto exp = load_experiment(o);
  if (!o.strategies.empty()) {
    std::vector<const char*> names;
    for (const auto& s : o.strategies) names.push_back(s.c_str());
    check(sc_experiment_set_strategies(exp.get(), names.data(), names.size()));
  }
  if (!o.out.empty()) check(sc_experiment_set_output_dir(exp.get(), o.out.c_str()));
  check(sc_run_experiment(exp.get(), nullptr));
}

void cmd_report(const Options& o) {
  sc_metrics* raw = nullptr;
  check(sc_metrics_load(o.metrics.c_str(), &raw));
  Metrics m(raw);
  check(sc_emit_report(m.get(), o.leads.data(), o.leads.size(), o.out.c_str()));
}

void add_seed(CLI::App* cmd, Options& o, const char* what) {
  cmd->add_option("--seed", o.seed, what);
}

}  // namespace

int main(int argc, char** argv) {
  sc_init_logging();
  Options o;
  CLI::App app{"Training-subset selection and ensemble forecast verification toolkit"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate-data", "Generate a synthetic seasonal dataset");
  gen->add_option("--config", o.config, "Synthetic config JSON (bare, or under a \"synthetic\" key)")
      ->required()
      ->check(CLI::ExistingFile);
  add_seed(gen, o, "Override the generator seed");
  gen->add_option("--out", o.out, "Output directory for dataset.ften")->required();

  auto* sel = app.add_subcommand("select", "Select a training subset");
  sel->add_option("--config", o.config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  sel->add_option("--strategy", o.strategies, "Strategy id, e.g. stratified_time")->required()->expected(1);
  sel->add_option("--fraction", o.fraction, "Subset fraction in (0, 1]");
  add_seed(sel, o, "Selection seed");
  sel->add_option("--out", o.out, "Output directory for selection.json")->required();
  sel->add_flag("--flat-grid", o.flat_grid, "Uniform area weights");

  auto* trn = app.add_subcommand("train", "Train a forecaster on a selection");
  trn->add_option("--config", o.config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  trn->add_option("--selection", o.selection, "selection.json from `select`")->required()->check(CLI::ExistingFile);
  add_seed(trn, o, "Training seed");
  trn->add_option("--out", o.out, "Output directory for model.json")->required();

  auto* rol = app.add_subcommand("rollout", "Roll out an ensemble over the test inits");
  rol->add_option("--config", o.config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  rol->add_option("--model", o.model, "model.json from `train`")->required()->check(CLI::ExistingFile);
  rol->add_option("--members", o.members, "Ensemble size");
  rol->add_option("--steps", o.steps, "Autoregressive 24 h steps");
  add_seed(rol, o, "Rollout seed");
  rol->add_option("--jobs", o.jobs, "Worker threads");
  rol->add_option("--out", o.out, "Output directory for forecast.json")->required();

  auto* evl = app.add_subcommand("evaluate", "Score a forecast against the dataset");
  evl->add_option("--config", o.config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  evl->add_option("--forecast", o.forecast, "forecast.json from `rollout`")->required()->check(CLI::ExistingFile);
  evl->add_option("--method", o.method, "Method name written to the metrics rows");
  add_seed(evl, o, "Unused; accepted for uniformity");
  evl->add_option("--out", o.out, "Output directory for metrics.csv")->required();
  evl->add_flag("--flat-grid", o.flat_grid, "Uniform area weights");

  auto* run = app.add_subcommand("run", "Run the full select/train/rollout/evaluate experiment");
  run->add_option("--config", o.config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--strategy", o.strategies, "Strategy ids (repeatable); Full Data is always included");
  run->add_option("--fraction", o.fraction, "Subset fraction in (0, 1]");
  add_seed(run, o, "Base seed; seeds used are seed, seed + 1, ...");
  run->add_option("--members", o.members, "Ensemble size");
  run->add_option("--steps", o.steps, "Autoregressive 24 h steps");
  run->add_option("--jobs", o.jobs, "Worker threads");
  run->add_option("--out", o.out, "Output directory (default: the config's output_dir)");
  run->add_flag("--flat-grid", o.flat_grid, "Uniform area weights");

  auto* rep = app.add_subcommand("report", "Tabulate a metrics CSV");
  rep->add_option("--metrics", o.metrics, "metrics_raw.csv or metrics.csv")->required()->check(CLI::ExistingFile);
  rep->add_option("--leads", o.leads, "Report leads in days")->delimiter(',');
  add_seed(rep, o, "Unused; accepted for uniformity");
  rep->add_option("--out", o.out, "Output directory for the report files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) cmd_generate(o);
    else if (sel->parsed()) cmd_select(o);
    else if (trn->parsed()) cmd_train(o);
    else if (rol->parsed()) cmd_rollout(o);
    else if (evl->parsed()) cmd_evaluate(o);
    else if (run->parsed()) cmd_run(o);
    else if (rep->parsed()) cmd_report(o);
  } catch (const Failure& f) {
    return f.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return 0;
}
