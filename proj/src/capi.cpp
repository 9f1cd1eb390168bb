#include "stratacast/stratacast.h"

#include <algorithm>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "stratacast/error.hpp"
#include "stratacast/experiment.hpp"
#include "stratacast/logging.hpp"

using namespace stratacast;

struct sc_experiment {
  ExperimentConfig cfg;
  std::optional<PreparedData> data;
  std::mutex mu;

  const PreparedData& prepared() {
    std::lock_guard lock(mu);
    if (!data) data = prepare_data(cfg);
    return *data;
  }
};

struct sc_dataset {
  GriddedDataset ds;
};

struct sc_selection {
  SubsetSelection sel;
};

struct sc_forecaster {
  ForecasterPtr model;
};

struct sc_forecast {
  EnsembleForecast fc;
};

struct sc_metrics {
  std::vector<MetricRecord> records;
};

namespace {

thread_local std::string g_last_error;

sc_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return SC_ERR_INVALID_ARGUMENT;
    case ErrorKind::io: return SC_ERR_IO;
    case ErrorKind::data: return SC_ERR_DATA;
    case ErrorKind::numeric: return SC_ERR_NUMERIC;
  }
  return SC_ERR_INTERNAL;
}

template <typename F>
sc_status guarded(F&& f) {
  init_logging();
  g_last_error.clear();
  try {
    f();
    return SC_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return SC_ERR_DATA;
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return SC_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SC_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SC_ERR_INTERNAL;
  }
}

template <typename T>
void require_arg(const T* p, const char* name) {
  require(p != nullptr, ErrorKind::invalid_argument, std::string(name) + " is null");
}

}  // namespace

extern "C" {

const char* sc_last_error(void) { return g_last_error.c_str(); }

const char* sc_version(void) { return "0.1.0"; }

void sc_init_logging(void) { init_logging(); }

sc_status sc_experiment_load(const char* config_path, sc_experiment** out) {
  return guarded([&] {
    require_arg(config_path, "config_path");
    require_arg(out, "out");
    auto exp = std::make_unique<sc_experiment>();
    exp->cfg = ExperimentConfig::load(config_path);
    *out = exp.release();
  });
}

void sc_experiment_free(sc_experiment* exp) { delete exp; }

sc_status sc_experiment_set_seed(sc_experiment* exp, uint64_t seed) {
  return guarded([&] {
    require_arg(exp, "exp");
    exp->cfg.seed = seed;
  });
}

sc_status sc_experiment_set_fraction(sc_experiment* exp, double fraction) {
  return guarded([&] {
    require_arg(exp, "exp");
    auto cfg = exp->cfg;
    cfg.fraction = fraction;
    cfg.validate();
    exp->cfg = std::move(cfg);
  });
}

sc_status sc_experiment_set_members(sc_experiment* exp, size_t n_members) {
  return guarded([&] {
    require_arg(exp, "exp");
    auto cfg = exp->cfg;
    cfg.n_members = n_members;
    cfg.validate();
    exp->cfg = std::move(cfg);
  });
}

sc_status sc_experiment_set_steps(sc_experiment* exp, size_t n_steps) {
  return guarded([&] {
    require_arg(exp, "exp");
    auto cfg = exp->cfg;
    cfg.n_steps = n_steps;
    // Report leads beyond the new horizon are dropped.
    std::erase_if(cfg.leads, [&](int l) { return static_cast<std::size_t>(l) > n_steps; });
    if (cfg.leads.empty() && n_steps >= 1) cfg.leads.push_back(static_cast<int>(std::min<std::size_t>(n_steps, 10)));
    cfg.validate();
    exp->cfg = std::move(cfg);
  });
}

sc_status sc_experiment_set_jobs(sc_experiment* exp, size_t jobs) {
  return guarded([&] {
    require_arg(exp, "exp");
    require(jobs >= 1, ErrorKind::invalid_argument, "jobs must be at least 1");
    exp->cfg.jobs = jobs;
  });
}

sc_status sc_experiment_set_flat_grid(sc_experiment* exp, int flat) {
  return guarded([&] {
    require_arg(exp, "exp");
    exp->cfg.flat_grid = flat != 0;
  });
}

sc_status sc_experiment_set_output_dir(sc_experiment* exp, const char* dir) {
  return guarded([&] {
    require_arg(exp, "exp");
    require_arg(dir, "dir");
    exp->cfg.output_dir = dir;
  });
}

sc_status sc_experiment_set_strategies(sc_experiment* exp, const char* const* names, size_t n) {
  return guarded([&] {
    require_arg(exp, "exp");
    require(n == 0 || names != nullptr, ErrorKind::invalid_argument, "names is null");
    std::vector<Strategy> list{Strategy::full};
    for (size_t i = 0; i < n; ++i) {
      require_arg(names[i], "strategy name");
      const auto s = parse_strategy(names[i]);
      if (std::find(list.begin(), list.end(), s) == list.end()) list.push_back(s);
    }
    exp->cfg.strategies = std::move(list);
  });
}

uint64_t sc_experiment_seed(const sc_experiment* exp) { return exp ? exp->cfg.seed : 0; }

sc_status sc_experiment_output_dir(const sc_experiment* exp, char* buf, size_t cap) {
  return guarded([&] {
    require_arg(exp, "exp");
    require_arg(buf, "buf");
    const auto s = exp->cfg.output_dir.string();
    require(s.size() < cap, ErrorKind::invalid_argument, "buffer too small for the output directory");
    std::memcpy(buf, s.c_str(), s.size() + 1);
  });
}

sc_status sc_generate_dataset(const char* synthetic_config_path, const char* out_dir, const uint64_t* seed) {
  return guarded([&] {
    require_arg(synthetic_config_path, "synthetic_config_path");
    require_arg(out_dir, "out_dir");
    std::ifstream in(synthetic_config_path);
    require(static_cast<bool>(in), ErrorKind::io,
            std::string("cannot open config '") + synthetic_config_path + "'");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorKind::io, std::string("bad JSON in '") + synthetic_config_path + "': " + e.what());
    }
    // Accept either a bare synthetic config or an experiment config embedding one.
    auto cfg = SyntheticConfig::from_json(j.contains("synthetic") ? j["synthetic"] : j);
    if (seed) cfg.seed = *seed;
    std::filesystem::create_directories(out_dir);
    save_dataset(generate(cfg), std::filesystem::path(out_dir) / "dataset.ften");
  });
}

sc_status sc_dataset_load(const char* path, sc_dataset** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new sc_dataset{load_dataset(path)};
  });
}

void sc_dataset_free(sc_dataset* ds) { delete ds; }
size_t sc_dataset_n_time(const sc_dataset* ds) { return ds ? ds->ds.n_time() : 0; }
size_t sc_dataset_n_var(const sc_dataset* ds) { return ds ? ds->ds.n_var() : 0; }
size_t sc_dataset_n_cells(const sc_dataset* ds) { return ds ? ds->ds.n_cells() : 0; }

sc_status sc_select(sc_experiment* exp, const char* strategy, uint64_t seed, sc_selection** out) {
  return guarded([&] {
    require_arg(exp, "exp");
    require_arg(strategy, "strategy");
    require_arg(out, "out");
    const auto s = parse_strategy(strategy);
    const auto& ds = exp->prepared().standardized;
    const auto candidates = training_candidates(ds, exp->cfg.split);
    require(!candidates.empty(), ErrorKind::data, "the training split has no usable samples");
    SelectionOptions opts;
    opts.flat_grid = exp->cfg.flat_grid;
    const SelectionBudget budget{s == Strategy::full ? 1.0 : exp->cfg.fraction};
    *out = new sc_selection{select(s, ds, candidates, budget, seed, opts)};
  });
}

sc_status sc_selection_load(const char* path, sc_selection** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new sc_selection{SubsetSelection::load(path)};
  });
}

sc_status sc_selection_save(const sc_selection* sel, const char* path) {
  return guarded([&] {
    require_arg(sel, "sel");
    require_arg(path, "path");
    sel->sel.save(path);
  });
}

size_t sc_selection_count(const sc_selection* sel) { return sel ? sel->sel.indices.size() : 0; }

size_t sc_selection_indices(const sc_selection* sel, size_t* buf, size_t cap) {
  if (!sel || !buf) return 0;
  const auto n = std::min(cap, sel->sel.indices.size());
  std::copy_n(sel->sel.indices.begin(), n, buf);
  return n;
}

void sc_selection_free(sc_selection* sel) { delete sel; }

sc_status sc_train(sc_experiment* exp, const sc_selection* sel, uint64_t seed, sc_forecaster** out) {
  return guarded([&] {
    require_arg(exp, "exp");
    require_arg(sel, "sel");
    require_arg(out, "out");
    auto result = train(exp->cfg.forecaster, exp->prepared().standardized, exp->cfg.split, sel->sel, seed);
    *out = new sc_forecaster{std::move(result.model)};
  });
}

sc_status sc_forecaster_load(const char* path, sc_forecaster** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new sc_forecaster{load_forecaster(path)};
  });
}

sc_status sc_forecaster_save(const sc_forecaster* model, const char* path) {
  return guarded([&] {
    require_arg(model, "model");
    require_arg(path, "path");
    model->model->save(path);
  });
}

const char* sc_forecaster_kind(const sc_forecaster* model) {
  return model ? forecaster_kind_name(model->model->kind()).data() : "";
}

void sc_forecaster_free(sc_forecaster* model) { delete model; }

sc_status sc_rollout(sc_experiment* exp, const sc_forecaster* model, uint64_t seed, sc_forecast** out) {
  return guarded([&] {
    require_arg(exp, "exp");
    require_arg(model, "model");
    require_arg(out, "out");
    const auto& ds = exp->prepared().standardized;
    require(model->model->state_size() == ds.state_size(), ErrorKind::invalid_argument,
            "forecaster state size does not match the dataset");
    const auto inits = evaluation_inits(ds, exp->cfg);
    require(!inits.empty(), ErrorKind::data, "the test split is too short for the forecast horizon");
    *out = new sc_forecast{
        rollout(*model->model, ds, inits, exp->cfg.n_members, exp->cfg.n_steps, seed, exp->cfg.jobs)};
  });
}

sc_status sc_forecast_load(const char* path, sc_forecast** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new sc_forecast{load_forecast(path)};
  });
}

sc_status sc_forecast_save(const sc_forecast* fc, const char* path) {
  return guarded([&] {
    require_arg(fc, "fc");
    require_arg(path, "path");
    save_forecast(fc->fc, path);
  });
}

size_t sc_forecast_n_inits(const sc_forecast* fc) { return fc ? fc->fc.init_indices.size() : 0; }
size_t sc_forecast_n_members(const sc_forecast* fc) { return fc ? fc->fc.n_members : 0; }
size_t sc_forecast_n_steps(const sc_forecast* fc) { return fc ? fc->fc.n_steps : 0; }
void sc_forecast_free(sc_forecast* fc) { delete fc; }

sc_status sc_evaluate(sc_experiment* exp, const sc_forecast* fc, const char* method, sc_metrics** out) {
  return guarded([&] {
    require_arg(exp, "exp");
    require_arg(fc, "fc");
    require_arg(method, "method");
    require_arg(out, "out");
    const auto& data = exp->prepared();
    std::vector<int> leads;
    for (std::size_t l = 1; l <= std::min<std::size_t>(fc->fc.n_steps, 10); ++l) leads.push_back(static_cast<int>(l));
    const auto w = area_weights(data.standardized.grid(), exp->cfg.flat_grid);
    *out = new sc_metrics{evaluate_forecast(fc->fc, data.standardized, leads, w, method, &data.stats)};
  });
}

sc_status sc_metrics_load(const char* csv_path, sc_metrics** out) {
  return guarded([&] {
    require_arg(csv_path, "csv_path");
    require_arg(out, "out");
    *out = new sc_metrics{read_metrics_csv(csv_path)};
  });
}

sc_status sc_metrics_save(const sc_metrics* m, const char* csv_path) {
  return guarded([&] {
    require_arg(m, "m");
    require_arg(csv_path, "csv_path");
    const bool with_seed = std::any_of(m->records.begin(), m->records.end(), [](const auto& r) { return r.seed; });
    write_metrics_csv(std::filesystem::path(csv_path), m->records, with_seed);
  });
}

size_t sc_metrics_count(const sc_metrics* m) { return m ? m->records.size() : 0; }
void sc_metrics_free(sc_metrics* m) { delete m; }

sc_status sc_run_experiment(sc_experiment* exp, sc_metrics** out) {
  return guarded([&] {
    require_arg(exp, "exp");
    auto result = run_experiment(exp->cfg);
    if (out) *out = new sc_metrics{std::move(result.records)};
  });
}

sc_status sc_emit_report(const sc_metrics* m, const int* leads, size_t n_leads, const char* out_dir) {
  return guarded([&] {
    require_arg(m, "m");
    require_arg(out_dir, "out_dir");
    require(n_leads > 0 && leads != nullptr, ErrorKind::invalid_argument, "no report leads given");
    emit_report(m->records, std::span<const int>(leads, n_leads), out_dir);
  });
}

}  // extern "C"
