#include <doctest.h>

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "stratacast/stratacast.h"

namespace {

using nlohmann::json;

std::string write_config(const std::filesystem::path& dir, json extra = json::object()) {
  json j = {{"synthetic", fixtures::small_synthetic(3, 4).to_json()},
            {"split", {{"train", {2000, 2001}}, {"test", {2002, 2002}}}},
            {"strategies", {"random", "stratified_time"}},
            {"n_members", 2},
            {"n_steps", 3},
            {"leads", {1, 3}},
            {"eval_stride_hours", 24 * 30},
            {"seed", 11},
            {"output_dir", "out"}};
  j.update(extra);
  const auto path = dir / "exp.json";
  std::ofstream(path) << j.dump(1);
  return path.string();
}

}  // namespace

TEST_CASE("C API: version and error reporting") {
  CHECK(std::string(sc_version()).size() > 0);
  sc_experiment* exp = nullptr;
  CHECK(sc_experiment_load(nullptr, &exp) == SC_ERR_INVALID_ARGUMENT);
  CHECK(std::string(sc_last_error()).size() > 0);
  CHECK(sc_experiment_load("/nonexistent/exp.json", &exp) == SC_ERR_IO);
  CHECK(exp == nullptr);
  CHECK(std::string(sc_last_error()).find("/nonexistent/exp.json") != std::string::npos);

  const auto dir = fixtures::temp_dir("capi_errors");
  std::ofstream(dir / "bad.json") << R"({"split": {}})";
  CHECK(sc_experiment_load((dir / "bad.json").string().c_str(), &exp) == SC_ERR_INVALID_ARGUMENT);

  // Free functions accept null.
  sc_experiment_free(nullptr);
  sc_dataset_free(nullptr);
  sc_selection_free(nullptr);
  sc_forecaster_free(nullptr);
  sc_forecast_free(nullptr);
  sc_metrics_free(nullptr);
}

TEST_CASE("C API: experiment setters validate their input") {
  const auto dir = fixtures::temp_dir("capi_setters");
  sc_experiment* exp = nullptr;
  REQUIRE(sc_experiment_load(write_config(dir).c_str(), &exp) == SC_OK);
  CHECK(sc_experiment_seed(exp) == 11);
  CHECK(sc_experiment_set_seed(exp, 42) == SC_OK);
  CHECK(sc_experiment_seed(exp) == 42);
  CHECK(sc_experiment_set_fraction(exp, 0.0) == SC_ERR_INVALID_ARGUMENT);
  CHECK(sc_experiment_set_fraction(exp, 0.3) == SC_OK);
  CHECK(sc_experiment_set_members(exp, 0) == SC_ERR_INVALID_ARGUMENT);
  CHECK(sc_experiment_set_jobs(exp, 0) == SC_ERR_INVALID_ARGUMENT);
  CHECK(sc_experiment_set_steps(exp, 2) == SC_OK);
  CHECK(sc_experiment_set_flat_grid(exp, 1) == SC_OK);

  const char* good[] = {"kmeans"};
  const char* bad[] = {"coin_flip"};
  CHECK(sc_experiment_set_strategies(exp, good, 1) == SC_OK);
  CHECK(sc_experiment_set_strategies(exp, bad, 1) == SC_ERR_INVALID_ARGUMENT);

  CHECK(sc_experiment_set_output_dir(exp, (dir / "elsewhere").string().c_str()) == SC_OK);
  char buf[512];
  CHECK(sc_experiment_output_dir(exp, buf, sizeof buf) == SC_OK);
  CHECK(std::string(buf) == (dir / "elsewhere").string());
  CHECK(sc_experiment_output_dir(exp, buf, 3) == SC_ERR_INVALID_ARGUMENT);
  sc_experiment_free(exp);
}

TEST_CASE("C API: select, train, rollout, evaluate and report") {
  const auto dir = fixtures::temp_dir("capi_pipeline");
  sc_experiment* exp = nullptr;
  REQUIRE(sc_experiment_load(write_config(dir).c_str(), &exp) == SC_OK);

  sc_selection* sel = nullptr;
  REQUIRE(sc_select(exp, "stratified_time", 7, &sel) == SC_OK);
  const auto n = sc_selection_count(sel);
  CHECK(n > 0);
  std::vector<size_t> idx(n);
  CHECK(sc_selection_indices(sel, idx.data(), idx.size()) == n);
  CHECK(sc_selection_indices(sel, idx.data(), 2) == 2);
  CHECK(sc_selection_indices(sel, nullptr, 0) == 0);
  const auto sel_path = (dir / "sel.json").string();
  CHECK(sc_selection_save(sel, sel_path.c_str()) == SC_OK);
  sc_selection* again = nullptr;
  REQUIRE(sc_selection_load(sel_path.c_str(), &again) == SC_OK);
  CHECK(sc_selection_count(again) == n);
  CHECK(sc_select(exp, "coin_flip", 7, &again) == SC_ERR_INVALID_ARGUMENT);
  sc_selection_free(again);

  sc_forecaster* model = nullptr;
  REQUIRE(sc_train(exp, sel, 7, &model) == SC_OK);
  CHECK(std::string(sc_forecaster_kind(model)) == "stochastic_linear");
  const auto model_path = (dir / "model.json").string();
  CHECK(sc_forecaster_save(model, model_path.c_str()) == SC_OK);
  sc_forecaster* loaded = nullptr;
  REQUIRE(sc_forecaster_load(model_path.c_str(), &loaded) == SC_OK);

  sc_forecast* fc = nullptr;
  REQUIRE(sc_rollout(exp, loaded, 7, &fc) == SC_OK);
  CHECK(sc_forecast_n_inits(fc) > 0);
  CHECK(sc_forecast_n_members(fc) == 2);
  CHECK(sc_forecast_n_steps(fc) == 3);
  const auto fc_path = (dir / "fc.json").string();
  CHECK(sc_forecast_save(fc, fc_path.c_str()) == SC_OK);
  sc_forecast* fc2 = nullptr;
  REQUIRE(sc_forecast_load(fc_path.c_str(), &fc2) == SC_OK);

  sc_metrics* m = nullptr;
  REQUIRE(sc_evaluate(exp, fc2, "stratified_time", &m) == SC_OK);
  CHECK(sc_metrics_count(m) == 2 * 3);
  const auto csv = (dir / "metrics.csv").string();
  CHECK(sc_metrics_save(m, csv.c_str()) == SC_OK);
  sc_metrics* m2 = nullptr;
  REQUIRE(sc_metrics_load(csv.c_str(), &m2) == SC_OK);
  CHECK(sc_metrics_count(m2) == 6);

  const int leads[] = {1, 3};
  CHECK(sc_emit_report(m2, leads, 2, (dir / "report").string().c_str()) == SC_OK);
  CHECK(std::filesystem::exists(dir / "report" / "report_synthetic_0.csv"));
  CHECK(sc_emit_report(m2, leads, 0, (dir / "report").string().c_str()) == SC_ERR_INVALID_ARGUMENT);

  CHECK(sc_train(exp, nullptr, 7, &model) == SC_ERR_INVALID_ARGUMENT);
  CHECK(sc_rollout(exp, nullptr, 7, &fc) == SC_ERR_INVALID_ARGUMENT);

  sc_metrics_free(m2);
  sc_metrics_free(m);
  sc_forecast_free(fc2);
  sc_forecast_free(fc);
  sc_forecaster_free(loaded);
  sc_forecaster_free(model);
  sc_selection_free(sel);
  sc_experiment_free(exp);
}

TEST_CASE("C API: run an experiment and generate a dataset") {
  const auto dir = fixtures::temp_dir("capi_run");
  sc_experiment* exp = nullptr;
  REQUIRE(sc_experiment_load(write_config(dir).c_str(), &exp) == SC_OK);
  sc_metrics* m = nullptr;
  REQUIRE(sc_run_experiment(exp, &m) == SC_OK);
  // 3 strategies x 1 seed x 2 variables x 3 leads
  CHECK(sc_metrics_count(m) == 18);
  CHECK(std::filesystem::exists(dir / "out" / "metrics.csv"));
  sc_metrics_free(m);
  CHECK(sc_run_experiment(exp, nullptr) == SC_OK);
  sc_experiment_free(exp);

  std::ofstream(dir / "synth.json") << fixtures::small_synthetic(1, 3).to_json().dump();
  CHECK(sc_generate_dataset((dir / "synth.json").string().c_str(), (dir / "data").string().c_str(), nullptr) == SC_OK);
  sc_dataset* ds = nullptr;
  REQUIRE(sc_dataset_load((dir / "data" / "dataset.ften").string().c_str(), &ds) == SC_OK);
  CHECK(sc_dataset_n_var(ds) == 2);
  CHECK(sc_dataset_n_cells(ds) == 32);
  CHECK(sc_dataset_n_time(ds) == 366);
  sc_dataset_free(ds);

  std::ofstream(dir / "corrupt.ften") << "FTEN garbage";
  CHECK(sc_dataset_load((dir / "corrupt.ften").string().c_str(), &ds) == SC_ERR_IO);
}
