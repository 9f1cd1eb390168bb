#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stratacast/dataset.hpp"
#include "stratacast/forecast.hpp"
#include "stratacast/metrics.hpp"
#include "stratacast/selection.hpp"
#include "stratacast/synthetic.hpp"

namespace stratacast {

struct ExperimentConfig {
  // Exactly one of the two data sources.
  std::optional<std::filesystem::path> dataset_path;
  std::optional<SyntheticConfig> synthetic;

  SplitSpec split;
  std::vector<Strategy> strategies;  // full is always added
  double fraction = 0.2;
  ForecasterSpec forecaster;
  std::size_t n_members = 8;
  std::size_t n_seeds = 1;
  std::uint64_t seed = 0;  // seeds used are seed, seed + 1, ...
  std::vector<int> leads{5, 10};
  std::size_t n_steps = 10;
  std::int64_t eval_stride_hours = 24;
  bool flat_grid = false;
  std::filesystem::path output_dir = "out";
  std::size_t jobs = 1;

  void validate() const;

  /// Relative paths resolve against `base_dir`.
  static ExperimentConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static ExperimentConfig load(const std::filesystem::path& path);
};

struct PreparedData {
  GriddedDataset standardized;
  StandardizationStats stats;
};

/// Loads or generates the dataset and standardizes it with training-split stats.
PreparedData prepare_data(const ExperimentConfig& cfg);

/// Training-split times whose 24 h successor is also in the training split.
std::vector<std::size_t> training_candidates(const GriddedDataset& ds, const SplitSpec& split);

/// Valid test-split inits (24 h history, n_steps * 24 h lead), every
/// eval_stride_hours.
std::vector<std::size_t> evaluation_inits(const GriddedDataset& ds, const ExperimentConfig& cfg);

struct ExperimentResult {
  std::vector<MetricRecord> records;     // one per strategy x seed x variable x lead
  std::vector<MetricRecord> seed_means;  // one per strategy x variable x lead
  std::vector<SubsetSelection> selections;
};

/// select -> train -> rollout -> evaluate for every (strategy, seed), on up to
/// cfg.jobs workers. Writes selections/, metrics_raw.csv, metrics.csv and the
/// report into cfg.output_dir. Stage failures are rethrown tagged with the
/// stage; outputs finished so far are still written.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Seed mean of every (method, variable, lead) group.
std::vector<MetricRecord> seed_means(std::span<const MetricRecord> records);

/// Two decimals with trailing zeros dropped: 335.20 -> "335.2".
std::string format_table_value(double x);

/// Table text for one variable: `method,crps_<L>d...,rmse_<L>d...,ssr_<L>d...`,
/// rows ordered Full Data first then by label, values are seed means.
std::string report_table_csv(std::span<const MetricRecord> records, const std::string& variable,
                             std::span<const int> leads, bool seed_std = false);

/// report_<var>.csv (means), report_<var>_std.csv (sample std over seeds),
/// ssr_curve_<var>.csv (every lead present) and report.json.
void emit_report(std::span<const MetricRecord> records, std::span<const int> leads,
                 const std::filesystem::path& out_dir);

/// Display label for a strategy id; other names pass through unchanged.
std::string method_label(const std::string& method);

}  // namespace stratacast
