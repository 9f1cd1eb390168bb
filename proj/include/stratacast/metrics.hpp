#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stratacast/dataset.hpp"

namespace stratacast {

struct EnsembleForecast;

/// Per-cell verification weights, normalised to mean 1 over the grid.
struct AreaWeights {
  std::size_t n_lat = 0;
  std::size_t n_lon = 0;
  std::vector<double> w;  // [lat][lon]

  double at(std::size_t cell) const { return w[cell]; }
  std::size_t n_cells() const { return w.size(); }
};

/// cos(latitude) weights; `flat` gives uniform weights for synthetic grids.
/// Pole rows get a 1e-6 floor so every weight stays positive.
AreaWeights area_weights(const GridSpec& grid, bool flat = false);

/// Row-major [case][cell].
struct FieldSeries {
  std::size_t n_case = 0;
  std::size_t n_cells = 0;
  std::vector<double> values;

  double at(std::size_t c, std::size_t cell) const { return values[c * n_cells + cell]; }
};

/// Row-major [case][member][cell].
struct EnsembleSeries {
  std::size_t n_case = 0;
  std::size_t n_member = 0;
  std::size_t n_cells = 0;
  std::vector<double> values;

  double at(std::size_t c, std::size_t m, std::size_t cell) const {
    return values[(c * n_member + m) * n_cells + cell];
  }
};

FieldSeries ensemble_mean(const EnsembleSeries& members);

/// sqrt of the weighted mean squared error over cases and cells.
double rmse(const FieldSeries& ens_mean, const FieldSeries& truth, const AreaWeights& w);

/// Fair ensemble CRPS for one scalar observation. M = 1 reduces to |x - y|.
double crps_ensemble(std::span<const double> members, double y);

/// Weighted mean of pointwise fair CRPS over cases and cells.
double crps_field(const EnsembleSeries& members, const FieldSeries& truth, const AreaWeights& w);

/// sqrt of the weighted mean unbiased (M - 1) ensemble variance.
double ensemble_spread(const EnsembleSeries& members, const AreaWeights& w);

/// sqrt((M + 1) / M) * spread / rmse(ensemble mean). Requires M >= 2 and nonzero skill.
double ssr(const EnsembleSeries& members, const FieldSeries& truth, const AreaWeights& w);

struct MetricRecord {
  std::string method;
  std::string variable;
  int lead_days = 0;
  double crps = 0.0;
  double rmse = 0.0;
  double ssr = 0.0;
  std::optional<std::uint64_t> seed;  // unset on seed-aggregated rows
};

/// One record per (variable, lead). Forecast and truth are compared in the
/// forecast's space; with `stats` the scores are rescaled to physical units
/// and ws10 is added when u10 and v10 are both present. SSR is reported as 0
/// when it is undefined (a single member, or zero error).
std::vector<MetricRecord> evaluate_forecast(const EnsembleForecast& forecast, const GriddedDataset& truth,
                                            std::span<const int> lead_days, const AreaWeights& w,
                                            const std::string& method,
                                            const StandardizationStats* stats = nullptr);

/// `method,variable,lead_days,crps,rmse,ssr`, six significant digits. With
/// `with_seed` a `seed` column follows `method`.
void write_metrics_csv(std::ostream& out, std::span<const MetricRecord> records, bool with_seed = false);
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricRecord> records,
                       bool with_seed = false);
/// Reads either layout.
std::vector<MetricRecord> read_metrics_csv(const std::filesystem::path& path);

}  // namespace stratacast
