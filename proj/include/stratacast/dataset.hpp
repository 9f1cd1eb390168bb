#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stratacast {

// Hours since 1970-01-01T00:00Z on the proleptic Gregorian calendar.
using HourStamp = std::int64_t;

struct CalendarInfo {
  int year;
  unsigned month;      // 1..12
  double day_of_year;  // 0-based, fractional (hour / 24 included)
};

CalendarInfo calendar_of(HourStamp h);
HourStamp hour_stamp(int year, unsigned month, unsigned day, unsigned hour = 0);

// Accepts "YYYY-MM-DDTHH[:MM[:SS]][Z]" with zero minutes and seconds.
HourStamp parse_iso8601(const std::string& text);
std::string format_iso8601(HourStamp h);

struct GridSpec {
  std::vector<double> lats;
  std::vector<double> lons;

  std::size_t n_lat() const { return lats.size(); }
  std::size_t n_lon() const { return lons.size(); }
  std::size_t n_cells() const { return lats.size() * lons.size(); }

  // Throws Error(data) when an invariant is violated.
  void validate() const;

  // Evenly spaced cell-centre grid covering the globe at `resolution_deg`.
  static GridSpec regular(double resolution_deg);
};

// Variable names are validated against the known set: z500, t850, t2m, u10,
// v10, and synthetic_<k>. ws10 is derived on demand and never stored.
bool is_storable_variable(const std::string& name);

struct YearRange {
  int first = 0;
  int last = -1;  // inclusive

  bool contains(int year) const { return year >= first && year <= last; }
  bool empty() const { return last < first; }
};

struct SplitSpec {
  YearRange train;
  YearRange val;
  YearRange test;

  void validate() const;
};

class GriddedDataset {
 public:
  GriddedDataset() = default;
  // Validates every invariant; the first non-finite value is reported by (t, var) index.
  GriddedDataset(GridSpec grid, std::vector<std::string> variables, std::vector<HourStamp> timestamps,
                 std::vector<float> data, std::map<std::string, std::vector<float>> static_fields = {});

  const GridSpec& grid() const { return grid_; }
  const std::vector<std::string>& variables() const { return variables_; }
  const std::vector<HourStamp>& timestamps() const { return timestamps_; }
  const std::map<std::string, std::vector<float>>& static_fields() const { return static_fields_; }

  std::size_t n_time() const { return timestamps_.size(); }
  std::size_t n_var() const { return variables_.size(); }
  std::size_t n_cells() const { return grid_.n_cells(); }
  std::size_t state_size() const { return n_var() * n_cells(); }
  // 0 when fewer than two timestamps exist.
  std::int64_t stride_hours() const { return stride_hours_; }

  std::span<const float> data() const { return data_; }
  std::span<const float> state(std::size_t t) const;
  std::span<const float> field(std::size_t t, std::size_t v) const;
  float at(std::size_t t, std::size_t v, std::size_t i, std::size_t j) const;

  std::optional<std::size_t> variable_index(const std::string& name) const;
  std::optional<std::size_t> time_index(HourStamp h) const;
  // Contiguous [begin, end) range of time indices whose calendar year is in `years`.
  std::pair<std::size_t, std::size_t> year_span(const YearRange& years) const;

 private:
  GridSpec grid_;
  std::vector<std::string> variables_;
  std::vector<HourStamp> timestamps_;
  std::vector<float> data_;
  std::map<std::string, std::vector<float>> static_fields_;
  std::int64_t stride_hours_ = 0;
};

// Field-tensor container: "FTEN", u32 version, u32 dims[4], little-endian f32
// payload, plus a `<stem>.meta.json` sidecar next to the tensor file.
void save_dataset(const GriddedDataset& ds, const std::filesystem::path& path);
GriddedDataset load_dataset(const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path);

struct VariableStats {
  std::string name;
  double mean = 0.0;
  double std = 1.0;
};

struct StandardizationStats {
  std::vector<VariableStats> variables;

  const VariableStats* find(const std::string& name) const;
};

// Population mean/std per variable over the training years only. A constant
// variable gets std 1 so that it is centred but not rescaled.
StandardizationStats fit_standardization(const GriddedDataset& ds, const SplitSpec& split);
GriddedDataset standardize(const GriddedDataset& ds, const StandardizationStats& stats);

std::vector<float> normalize_static(std::span<const float> field);

// All indices of the split except the first `history_hours` and the final
// `max_lead_hours` of it. Empty when the split is too short.
std::vector<std::size_t> valid_init_times(const GriddedDataset& ds, const YearRange& years,
                                          std::int64_t max_lead_hours = 240, std::int64_t history_hours = 24);

std::vector<float> derive_wind_speed(std::span<const float> u, std::span<const float> v);

}  // namespace stratacast
