#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stratacast/dataset.hpp"

namespace stratacast {

// Seasonal toy climate: per-cell sinusoid in day-of-year, plus a fixed spatial
// pattern per calendar month, plus an AR(1) anomaly.
struct SyntheticConfig {
  GridSpec grid;
  int start_year = 1979;
  std::size_t n_years = 1;
  std::int64_t stride_hours = 24;
  std::size_t n_variables = 1;
  double seasonal_amplitude = 1.0;
  std::size_t n_regimes = 12;  // month m uses pattern (m - 1) % n_regimes; 0 disables
  double regime_amplitude = 1.0;
  double ar1_coefficient = 0.0;
  double noise_std = 0.0;
  bool static_fields = true;
  std::uint64_t seed = 0;

  void validate() const;

  static SyntheticConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// The fixed, seed-determined parts of the generator.
struct SyntheticComponents {
  std::size_t n_cells = 0;
  std::size_t n_regimes = 0;
  std::vector<double> phase;     // [var][cell]
  std::vector<double> patterns;  // [var][regime][cell]; orthogonal, unit mean-square per pattern

  double phase_at(std::size_t v, std::size_t cell) const { return phase[v * n_cells + cell]; }
  double pattern_at(std::size_t v, std::size_t regime, std::size_t cell) const {
    return patterns[(v * n_regimes + regime) * n_cells + cell];
  }
};

SyntheticComponents synthetic_components(const SyntheticConfig& cfg);

// Noise-free part of the field: seasonal term plus the active month pattern.
double synthetic_mean_value(const SyntheticConfig& cfg, const SyntheticComponents& comp, HourStamp h, std::size_t v,
                            std::size_t cell);

GriddedDataset generate(const SyntheticConfig& cfg);

}  // namespace stratacast
