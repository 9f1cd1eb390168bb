#include "stratacast/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "stratacast/error.hpp"

namespace stratacast {

namespace {

using json = nlohmann::json;

YearRange parse_years(const json& j) {
  const auto v = j.get<std::vector<int>>();
  require(v.size() == 2, ErrorKind::invalid_argument, "year ranges are [first, last]");
  return {v[0], v[1]};
}

struct GroupStats {
  double mean[3] = {0, 0, 0};
  double std[3] = {0, 0, 0};
};

using GroupKey = std::tuple<std::string, std::string, int>;  // method, variable, lead

std::map<GroupKey, GroupStats> group_stats(std::span<const MetricRecord> records) {
  std::map<GroupKey, std::vector<const MetricRecord*>> groups;
  for (const auto& r : records) groups[{r.method, r.variable, r.lead_days}].push_back(&r);
  std::map<GroupKey, GroupStats> out;
  for (const auto& [key, rs] : groups) {
    GroupStats g;
    const auto n = static_cast<double>(rs.size());
    for (const auto* r : rs) {
      g.mean[0] += r->crps / n;
      g.mean[1] += r->rmse / n;
      g.mean[2] += r->ssr / n;
    }
    if (rs.size() > 1) {
      for (const auto* r : rs) {
        const double vals[3] = {r->crps, r->rmse, r->ssr};
        for (int m = 0; m < 3; ++m) g.std[m] += (vals[m] - g.mean[m]) * (vals[m] - g.mean[m]) / (n - 1.0);
      }
      for (double& s : g.std) s = std::sqrt(s);
    }
    out.emplace(key, g);
  }
  return out;
}

// Full Data first, then alphabetical by label.
std::vector<std::string> ordered_methods(std::span<const MetricRecord> records) {
  std::vector<std::string> methods;
  for (const auto& r : records) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  }
  std::sort(methods.begin(), methods.end(), [](const std::string& a, const std::string& b) {
    const auto la = method_label(a), lb = method_label(b);
    const bool fa = la == "Full Data", fb = lb == "Full Data";
    if (fa != fb) return fa;
    return la < lb;
  });
  return methods;
}

std::vector<std::string> ordered_variables(std::span<const MetricRecord> records) {
  std::vector<std::string> vars;
  for (const auto& r : records) {
    if (std::find(vars.begin(), vars.end(), r.variable) == vars.end()) vars.push_back(r.variable);
  }
  return vars;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::io, fmt::format("cannot write '{}'", path.string()));
  out << text;
}

// Rethrows any failure tagged with the pipeline stage it came from.
template <typename F>
auto staged(const char* stage, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.kind(), fmt::format("[{}] {}", stage, e.what()));
  }
}

struct Cell {
  Strategy strategy;
  std::uint64_t seed;
  std::vector<MetricRecord> records;
  std::optional<SubsetSelection> selection;
  std::exception_ptr error;
};

}  // namespace

void ExperimentConfig::validate() const {
  require(dataset_path.has_value() != synthetic.has_value(), ErrorKind::invalid_argument,
          "experiment needs exactly one of 'dataset' or 'synthetic'");
  split.validate();
  require(!split.test.empty(), ErrorKind::invalid_argument, "test year range is empty");
  require(!strategies.empty(), ErrorKind::invalid_argument, "no strategies configured");
  require(fraction > 0.0 && fraction <= 1.0, ErrorKind::invalid_argument, "fraction must lie in (0, 1]");
  require(n_seeds >= 1, ErrorKind::invalid_argument, "n_seeds must be at least 1");
  require(n_members >= 1, ErrorKind::invalid_argument, "n_members must be at least 1");
  require(n_steps >= 1, ErrorKind::invalid_argument, "n_steps must be at least 1");
  require(eval_stride_hours >= 1, ErrorKind::invalid_argument, "eval_stride_hours must be positive");
  require(jobs >= 1, ErrorKind::invalid_argument, "jobs must be at least 1");
  require(!leads.empty(), ErrorKind::invalid_argument, "no report leads configured");
  for (int l : leads) {
    require(l >= 1 && static_cast<std::size_t>(l) <= n_steps && l <= 10, ErrorKind::invalid_argument,
            fmt::format("lead {} d outside 1..min(10, n_steps)", l));
  }
  forecaster.validate();
}

ExperimentConfig ExperimentConfig::from_json(const json& j, const std::filesystem::path& base_dir) {
  ExperimentConfig c;
  try {
    if (j.contains("dataset")) {
      std::filesystem::path p = j["dataset"].get<std::string>();
      c.dataset_path = p.is_absolute() ? p : base_dir / p;
    }
    if (j.contains("synthetic")) c.synthetic = SyntheticConfig::from_json(j["synthetic"]);
    const auto& s = j.at("split");
    c.split.train = parse_years(s.at("train"));
    if (s.contains("val")) c.split.val = parse_years(s["val"]);
    c.split.test = parse_years(s.at("test"));
    const auto& names = j.at("strategies");
    require(names.is_array() && !names.empty(), ErrorKind::invalid_argument, "'strategies' must be a non-empty list");
    for (const auto& name : names) c.strategies.push_back(parse_strategy(name.get<std::string>()));
    c.fraction = j.value("fraction", c.fraction);
    c.forecaster = j.contains("forecaster") ? ForecasterSpec::from_json(j["forecaster"]) : ForecasterSpec{};
    c.n_members = j.value("n_members", c.n_members);
    c.n_seeds = j.value("n_seeds", c.n_seeds);
    c.seed = j.value("seed", c.seed);
    c.leads = j.value("leads", c.leads);
    c.n_steps = j.value("n_steps", c.n_steps);
    c.eval_stride_hours = j.value("eval_stride_hours", c.eval_stride_hours);
    c.flat_grid = j.value("flat_grid", c.flat_grid);
    c.jobs = j.value("jobs", c.jobs);
    std::filesystem::path out = j.value("output_dir", std::string("out"));
    c.output_dir = out.is_absolute() ? out : base_dir / out;
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_argument, fmt::format("bad experiment config: {}", e.what()));
  }
  if (std::find(c.strategies.begin(), c.strategies.end(), Strategy::full) == c.strategies.end()) {
    c.strategies.insert(c.strategies.begin(), Strategy::full);
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, fmt::format("cannot open config '{}'", path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::io, fmt::format("bad JSON in '{}': {}", path.string(), e.what()));
  }
  return from_json(j, path.parent_path());
}

PreparedData prepare_data(const ExperimentConfig& cfg) {
  GriddedDataset raw = cfg.dataset_path ? load_dataset(*cfg.dataset_path) : generate(*cfg.synthetic);
  auto stats = fit_standardization(raw, cfg.split);
  return {standardize(raw, stats), std::move(stats)};
}

std::vector<std::size_t> training_candidates(const GriddedDataset& ds, const SplitSpec& split) {
  return valid_init_times(ds, split.train, 24, 0);
}

std::vector<std::size_t> evaluation_inits(const GriddedDataset& ds, const ExperimentConfig& cfg) {
  const auto all = valid_init_times(ds, cfg.split.test, static_cast<std::int64_t>(cfg.n_steps) * 24, 24);
  std::vector<std::size_t> out;
  if (all.empty()) return out;
  const HourStamp first = ds.timestamps()[all.front()];
  for (auto t : all) {
    if ((ds.timestamps()[t] - first) % cfg.eval_stride_hours == 0) out.push_back(t);
  }
  return out;
}

std::vector<MetricRecord> seed_means(std::span<const MetricRecord> records) {
  std::vector<MetricRecord> out;
  const auto stats = group_stats(records);
  for (const auto& method : ordered_methods(records)) {
    for (const auto& var : ordered_variables(records)) {
      for (const auto& [key, g] : stats) {
        if (std::get<0>(key) != method || std::get<1>(key) != var) continue;
        MetricRecord r;
        r.method = method;
        r.variable = var;
        r.lead_days = std::get<2>(key);
        r.crps = g.mean[0];
        r.rmse = g.mean[1];
        r.ssr = g.mean[2];
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto data = staged("load", [&] { return prepare_data(cfg); });
  const auto& ds = data.standardized;
  const auto candidates = training_candidates(ds, cfg.split);
  const auto inits = evaluation_inits(ds, cfg);
  require(!candidates.empty(), ErrorKind::data, "[select] the training split has no usable samples");
  require(!inits.empty(), ErrorKind::data, "[rollout] the test split is too short for the forecast horizon");
  spdlog::info("experiment: {} training candidates, {} evaluation inits, {} strategies x {} seeds", candidates.size(),
               inits.size(), cfg.strategies.size(), cfg.n_seeds);

  std::vector<int> all_leads;
  for (std::size_t l = 1; l <= std::min<std::size_t>(cfg.n_steps, 10); ++l) all_leads.push_back(static_cast<int>(l));
  const auto weights = area_weights(ds.grid(), cfg.flat_grid);
  SelectionOptions sel_opts;
  sel_opts.flat_grid = cfg.flat_grid;

  std::vector<Cell> cells;
  for (auto s : cfg.strategies) {
    for (std::size_t k = 0; k < cfg.n_seeds; ++k) cells.push_back({s, cfg.seed + k, {}, std::nullopt, nullptr});
  }

  const auto run_cell = [&](Cell& cell) {
    try {
      auto sel = staged("select", [&] {
        return select(cell.strategy, ds, candidates, {cell.strategy == Strategy::full ? 1.0 : cfg.fraction}, cell.seed,
                      sel_opts);
      });
      auto trained = staged("train", [&] { return train(cfg.forecaster, ds, cfg.split, sel, cell.seed); });
      // Rollout streams depend on the seed only, so strategies share member noise.
      auto fc = staged("rollout", [&] {
        return rollout(*trained.model, ds, inits, cfg.n_members, cfg.n_steps, cell.seed);
      });
      cell.records = staged("evaluate", [&] {
        return evaluate_forecast(fc, ds, all_leads, weights, std::string(strategy_name(cell.strategy)), &data.stats);
      });
      for (auto& r : cell.records) r.seed = cell.seed;
      cell.selection = std::move(sel);
      spdlog::debug("experiment: finished {} seed {}", strategy_name(cell.strategy), cell.seed);
    } catch (...) {
      cell.error = std::current_exception();
    }
  };

  const auto workers = std::clamp<std::size_t>(cfg.jobs, 1, cells.size());
  if (workers == 1) {
    for (auto& c : cells) run_cell(c);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          std::size_t i;
          {
            std::lock_guard lock(mu);
            if (next == cells.size()) return;
            i = next++;
          }
          run_cell(cells[i]);
        }
      });
    }
  }

  ExperimentResult result;
  for (const auto& c : cells) {
    if (c.selection) result.selections.push_back(*c.selection);
    result.records.insert(result.records.end(), c.records.begin(), c.records.end());
  }
  // Cells are laid out in (strategy, seed) order; sort the rest of the key stably.
  std::stable_sort(result.records.begin(), result.records.end(), [&](const MetricRecord& a, const MetricRecord& b) {
    const auto rank = [&](const std::string& m) {
      return std::find_if(cfg.strategies.begin(), cfg.strategies.end(),
                          [&](Strategy s) { return strategy_name(s) == m; }) -
             cfg.strategies.begin();
    };
    return std::tuple(rank(a.method), a.variable, a.lead_days, a.seed.value_or(0)) <
           std::tuple(rank(b.method), b.variable, b.lead_days, b.seed.value_or(0));
  });
  result.seed_means = seed_means(result.records);

  std::filesystem::create_directories(cfg.output_dir / "selections");
  for (const auto& s : result.selections) {
    s.save(cfg.output_dir / "selections" / fmt::format("{}_seed{}.json", s.strategy, s.seed));
  }
  write_metrics_csv(cfg.output_dir / "metrics_raw.csv", result.records, true);
  write_metrics_csv(cfg.output_dir / "metrics.csv", result.seed_means);
  if (!result.records.empty()) emit_report(result.records, cfg.leads, cfg.output_dir);

  for (const auto& c : cells) {
    if (c.error) std::rethrow_exception(c.error);
  }
  return result;
}

std::string method_label(const std::string& method) {
  for (auto s : all_strategies()) {
    if (strategy_name(s) == method) return std::string(strategy_label(s));
  }
  return method;
}

std::string format_table_value(double x) {
  auto s = fmt::format("{:.2f}", x);
  if (s == "-0.00") s = "0.00";
  while (s.back() == '0') s.pop_back();
  if (s.back() == '.') s.pop_back();
  return s;
}

std::string report_table_csv(std::span<const MetricRecord> records, const std::string& variable,
                             std::span<const int> leads, bool seed_std) {
  const auto stats = group_stats(records);
  std::ostringstream out;
  out << "method";
  for (const char* metric : {"crps", "rmse", "ssr"}) {
    for (int l : leads) out << ',' << metric << '_' << l << 'd';
  }
  out << '\n';
  for (const auto& method : ordered_methods(records)) {
    bool any = false;
    for (int l : leads) any = any || stats.contains({method, variable, l});
    if (!any) continue;
    out << method_label(method);
    for (int m = 0; m < 3; ++m) {
      for (int l : leads) {
        out << ',';
        const auto it = stats.find({method, variable, l});
        if (it != stats.end()) out << format_table_value(seed_std ? it->second.std[m] : it->second.mean[m]);
      }
    }
    out << '\n';
  }
  return out.str();
}

void emit_report(std::span<const MetricRecord> records, std::span<const int> leads,
                 const std::filesystem::path& out_dir) {
  require(!records.empty(), ErrorKind::invalid_argument, "no records to report");
  std::filesystem::create_directories(out_dir);
  const auto stats = group_stats(records);
  const auto methods = ordered_methods(records);
  json summary = json::object();

  for (const auto& var : ordered_variables(records)) {
    write_text(out_dir / fmt::format("report_{}.csv", var), report_table_csv(records, var, leads));
    write_text(out_dir / fmt::format("report_{}_std.csv", var), report_table_csv(records, var, leads, true));

    std::vector<int> curve_leads;
    for (const auto& r : records) {
      if (r.variable == var && std::find(curve_leads.begin(), curve_leads.end(), r.lead_days) == curve_leads.end()) {
        curve_leads.push_back(r.lead_days);
      }
    }
    std::sort(curve_leads.begin(), curve_leads.end());
    std::ostringstream curve;
    curve << "lead_days";
    for (const auto& m : methods) curve << ',' << method_label(m);
    curve << '\n';
    for (int l : curve_leads) {
      curve << l;
      for (const auto& m : methods) {
        curve << ',';
        const auto it = stats.find({m, var, l});
        if (it != stats.end()) curve << fmt::format("{:.6g}", it->second.mean[2]);
      }
      curve << '\n';
    }
    write_text(out_dir / fmt::format("ssr_curve_{}.csv", var), curve.str());

    json& jv = summary[var];
    for (const auto& m : methods) {
      json row = json::object();
      for (int metric = 0; metric < 3; ++metric) {
        static const char* names[] = {"crps", "rmse", "ssr"};
        for (int l : leads) {
          const auto it = stats.find({m, var, l});
          if (it == stats.end()) continue;
          row[fmt::format("{}_{}d", names[metric], l)] = {{"mean", it->second.mean[metric]},
                                                          {"std", it->second.std[metric]}};
        }
      }
      if (!row.empty()) jv[method_label(m)] = std::move(row);
    }
  }
  write_text(out_dir / "report.json", summary.dump(1) + "\n");
}

}  // namespace stratacast
