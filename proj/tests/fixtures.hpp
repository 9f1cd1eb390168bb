#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "stratacast/dataset.hpp"
#include "stratacast/synthetic.hpp"

namespace fixtures {

inline stratacast::GridSpec grid(std::size_t n_lat, std::size_t n_lon) {
  stratacast::GridSpec g;
  for (std::size_t i = 0; i < n_lat; ++i) {
    g.lats.push_back(-90.0 + (static_cast<double>(i) + 0.5) * 180.0 / static_cast<double>(n_lat));
  }
  for (std::size_t j = 0; j < n_lon; ++j) g.lons.push_back(static_cast<double>(j) * 360.0 / static_cast<double>(n_lon));
  return g;
}

inline std::vector<std::string> synthetic_names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t v = 0; v < n; ++v) out.push_back("synthetic_" + std::to_string(v));
  return out;
}

// Standard-normal fields on a regular time axis.
inline stratacast::GriddedDataset random_dataset(std::size_t n_time, std::size_t n_var, std::size_t n_lat,
                                                 std::size_t n_lon, std::uint64_t seed,
                                                 stratacast::HourStamp start = stratacast::hour_stamp(2000, 1, 1),
                                                 std::int64_t stride = 24) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> z;
  std::vector<stratacast::HourStamp> times;
  for (std::size_t t = 0; t < n_time; ++t) times.push_back(start + static_cast<std::int64_t>(t) * stride);
  std::vector<float> data(n_time * n_var * n_lat * n_lon);
  for (float& v : data) v = z(rng);
  return {grid(n_lat, n_lon), synthetic_names(n_var), std::move(times), std::move(data)};
}

// Every cell of every variable equals `value` at every time.
inline stratacast::GriddedDataset constant_dataset(std::size_t n_time, std::size_t n_var, float value,
                                                   stratacast::HourStamp start = stratacast::hour_stamp(2000, 1, 1)) {
  std::vector<stratacast::HourStamp> times;
  for (std::size_t t = 0; t < n_time; ++t) times.push_back(start + static_cast<std::int64_t>(t) * 24);
  return {grid(2, 4), synthetic_names(n_var), std::move(times), std::vector<float>(n_time * n_var * 8, value)};
}

inline stratacast::SyntheticConfig small_synthetic(std::size_t n_years, std::uint64_t seed) {
  stratacast::SyntheticConfig c;
  c.grid = grid(4, 8);
  c.start_year = 2000;
  c.n_years = n_years;
  c.n_variables = 2;
  c.regime_amplitude = 2.0;
  c.ar1_coefficient = 0.7;
  c.noise_std = 0.5;
  c.seed = seed;
  return c;
}

// A fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("stratacast_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace fixtures
