#include "stratacast/dataset.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "binary_io.hpp"
#include "stratacast/error.hpp"

namespace stratacast {

namespace {

using json = nlohmann::json;
namespace chr = std::chrono;

constexpr char kMagic[4] = {'F', 'T', 'E', 'N'};
constexpr std::uint32_t kVersion = 1;

using detail::read_u32;
using detail::write_u32;

void write_tensor(const std::filesystem::path& path, const std::array<std::uint32_t, 4>& dims,
                  std::span<const float> payload) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::io, fmt::format("cannot open '{}' for writing", path.string()));
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  for (auto d : dims) write_u32(out, d);
  detail::write_f32(out, payload);
  require(static_cast<bool>(out), ErrorKind::io, fmt::format("write failed for '{}'", path.string()));
}

std::vector<float> read_tensor(const std::filesystem::path& path, std::array<std::uint32_t, 4>& dims) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, fmt::format("cannot open '{}'", path.string()));
  char magic[4] = {};
  in.read(magic, 4);
  require(in && std::memcmp(magic, kMagic, 4) == 0, ErrorKind::io,
          fmt::format("'{}' is not a field-tensor file", path.string()));
  const auto version = read_u32(in);
  require(version == kVersion, ErrorKind::io, fmt::format("unsupported field-tensor version {}", version));
  std::uint64_t count = 1;
  for (auto& d : dims) {
    d = read_u32(in);
    count *= d;
  }
  require(static_cast<bool>(in), ErrorKind::io, "truncated field-tensor header");

  const auto header = static_cast<std::uint64_t>(in.tellg());
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::uint64_t>(in.tellg());
  require(size - header == count * 4, ErrorKind::io,
          fmt::format("'{}': header declares {} values but payload holds {} bytes", path.string(), count,
                      size - header));
  in.seekg(static_cast<std::streamoff>(header));

  auto payload = detail::read_f32(in, count);
  require(static_cast<bool>(in), ErrorKind::io, "truncated field-tensor payload");
  return payload;
}

bool strictly_monotone(const std::vector<double>& xs) {
  if (xs.size() < 2) return true;
  const bool up = xs[1] > xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (up ? !(xs[i] > xs[i - 1]) : !(xs[i] < xs[i - 1])) return false;
  }
  return true;
}

}  // namespace

CalendarInfo calendar_of(HourStamp h) {
  const auto day = static_cast<std::int64_t>(std::floor(static_cast<double>(h) / 24.0));
  const chr::sys_days d{chr::days{day}};
  const chr::year_month_day ymd{d};
  const chr::sys_days jan1{ymd.year() / chr::January / 1};
  const auto hour_of_day = h - day * 24;
  return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
          static_cast<double>((d - jan1).count()) + static_cast<double>(hour_of_day) / 24.0};
}

HourStamp hour_stamp(int year, unsigned month, unsigned day, unsigned hour) {
  const chr::year_month_day ymd{chr::year{year}, chr::month{month}, chr::day{day}};
  require(ymd.ok() && hour < 24, ErrorKind::invalid_argument,
          fmt::format("invalid date {:04d}-{:02d}-{:02d}T{:02d}", year, month, day, hour));
  return static_cast<HourStamp>(chr::sys_days{ymd}.time_since_epoch().count()) * 24 + hour;
}

HourStamp parse_iso8601(const std::string& text) {
  int y = 0;
  unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
  int consumed = 0;
  const int n = std::sscanf(text.c_str(), "%d-%u-%uT%u:%u:%u%n", &y, &mo, &d, &h, &mi, &s, &consumed);
  if (n < 4) {
    // Also accept "YYYY-MM-DDTHH" and "YYYY-MM-DD HH".
    if (std::sscanf(text.c_str(), "%d-%u-%u%*[T ]%u", &y, &mo, &d, &h) != 4) {
      fail(ErrorKind::io, fmt::format("unparseable timestamp '{}'", text));
    }
  }
  require(mi == 0 && s == 0, ErrorKind::io, fmt::format("timestamp '{}' is not on a whole hour", text));
  return hour_stamp(y, mo, d, h);
}

std::string format_iso8601(HourStamp h) {
  const auto day = static_cast<std::int64_t>(std::floor(static_cast<double>(h) / 24.0));
  const chr::year_month_day ymd{chr::sys_days{chr::days{day}}};
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:00:00Z", static_cast<int>(ymd.year()),
                     static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), h - day * 24);
}

void GridSpec::validate() const {
  require(!lats.empty() && !lons.empty(), ErrorKind::data, "grid needs at least one latitude and one longitude");
  require(strictly_monotone(lats), ErrorKind::data, "latitudes must be strictly monotone");
  require(strictly_monotone(lons), ErrorKind::data, "longitudes must be strictly monotone");
  for (double lat : lats) {
    require(lat >= -90.0 && lat <= 90.0, ErrorKind::data, fmt::format("latitude {} outside [-90, 90]", lat));
  }
  const bool east = std::all_of(lons.begin(), lons.end(), [](double x) { return x >= 0.0 && x < 360.0; });
  const bool centred = std::all_of(lons.begin(), lons.end(), [](double x) { return x >= -180.0 && x < 180.0; });
  require(east || centred, ErrorKind::data, "longitudes must all lie in [0, 360) or all in [-180, 180)");
}

GridSpec GridSpec::regular(double resolution_deg) {
  require(resolution_deg > 0.0 && resolution_deg <= 180.0, ErrorKind::invalid_argument, "bad grid resolution");
  GridSpec g;
  const auto n_lat = static_cast<std::size_t>(std::lround(180.0 / resolution_deg));
  const auto n_lon = static_cast<std::size_t>(std::lround(360.0 / resolution_deg));
  for (std::size_t i = 0; i < n_lat; ++i) g.lats.push_back(-90.0 + (static_cast<double>(i) + 0.5) * resolution_deg);
  for (std::size_t j = 0; j < n_lon; ++j) g.lons.push_back(static_cast<double>(j) * resolution_deg);
  return g;
}

bool is_storable_variable(const std::string& name) {
  static const char* known[] = {"z500", "t850", "t2m", "u10", "v10"};
  for (const char* k : known) {
    if (name == k) return true;
  }
  constexpr std::string_view prefix = "synthetic_";
  if (name.size() > prefix.size() && name.compare(0, prefix.size(), prefix) == 0) {
    return std::all_of(name.begin() + static_cast<std::ptrdiff_t>(prefix.size()), name.end(),
                       [](char c) { return c >= '0' && c <= '9'; });
  }
  return false;
}

void SplitSpec::validate() const {
  const auto overlap = [](const YearRange& a, const YearRange& b) {
    return !a.empty() && !b.empty() && a.first <= b.last && b.first <= a.last;
  };
  require(!train.empty(), ErrorKind::invalid_argument, "training year range is empty");
  require(!overlap(train, val) && !overlap(train, test) && !overlap(val, test), ErrorKind::invalid_argument,
          "train/val/test year ranges must be pairwise disjoint");
}

GriddedDataset::GriddedDataset(GridSpec grid, std::vector<std::string> variables, std::vector<HourStamp> timestamps,
                               std::vector<float> data, std::map<std::string, std::vector<float>> static_fields)
    : grid_(std::move(grid)),
      variables_(std::move(variables)),
      timestamps_(std::move(timestamps)),
      data_(std::move(data)),
      static_fields_(std::move(static_fields)) {
  grid_.validate();
  require(!variables_.empty(), ErrorKind::data, "dataset has no variables");
  for (const auto& v : variables_) {
    require(v != "ws10", ErrorKind::data, "ws10 is derived from u10/v10 and cannot be stored");
    require(is_storable_variable(v), ErrorKind::data, fmt::format("unknown variable '{}'", v));
  }
  for (std::size_t a = 0; a < variables_.size(); ++a) {
    for (std::size_t b = a + 1; b < variables_.size(); ++b) {
      require(variables_[a] != variables_[b], ErrorKind::data, fmt::format("duplicate variable '{}'", variables_[a]));
    }
  }
  require(!timestamps_.empty(), ErrorKind::data, "dataset has no timestamps");
  if (timestamps_.size() >= 2) {
    stride_hours_ = timestamps_[1] - timestamps_[0];
    require(stride_hours_ > 0, ErrorKind::data, "timestamps must be strictly increasing");
    for (std::size_t t = 2; t < timestamps_.size(); ++t) {
      require(timestamps_[t] - timestamps_[t - 1] == stride_hours_, ErrorKind::data,
              fmt::format("timestamp {} breaks the constant {}h stride", t, stride_hours_));
    }
  }
  require(data_.size() == n_time() * state_size(), ErrorKind::data,
          fmt::format("data holds {} values, expected {}", data_.size(), n_time() * state_size()));
  for (std::size_t k = 0; k < data_.size(); ++k) {
    if (!std::isfinite(data_[k])) {
      const auto t = k / state_size();
      const auto v = (k % state_size()) / n_cells();
      fail(ErrorKind::data, fmt::format("non-finite value at (t={}, var={})", t, v));
    }
  }
  for (const auto& [name, values] : static_fields_) {
    require(values.size() == n_cells(), ErrorKind::data, fmt::format("static field '{}' has wrong size", name));
    for (float x : values) {
      require(x >= 0.0f && x <= 1.0f, ErrorKind::data, fmt::format("static field '{}' leaves [0, 1]", name));
    }
  }
}

std::span<const float> GriddedDataset::state(std::size_t t) const {
  return std::span<const float>(data_).subspan(t * state_size(), state_size());
}

std::span<const float> GriddedDataset::field(std::size_t t, std::size_t v) const {
  return std::span<const float>(data_).subspan(t * state_size() + v * n_cells(), n_cells());
}

float GriddedDataset::at(std::size_t t, std::size_t v, std::size_t i, std::size_t j) const {
  return data_[t * state_size() + v * n_cells() + i * grid_.n_lon() + j];
}

std::optional<std::size_t> GriddedDataset::variable_index(const std::string& name) const {
  const auto it = std::find(variables_.begin(), variables_.end(), name);
  if (it == variables_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - variables_.begin());
}

std::optional<std::size_t> GriddedDataset::time_index(HourStamp h) const {
  const auto it = std::lower_bound(timestamps_.begin(), timestamps_.end(), h);
  if (it == timestamps_.end() || *it != h) return std::nullopt;
  return static_cast<std::size_t>(it - timestamps_.begin());
}

std::pair<std::size_t, std::size_t> GriddedDataset::year_span(const YearRange& years) const {
  if (years.empty()) return {0, 0};
  const auto lo = std::lower_bound(timestamps_.begin(), timestamps_.end(), hour_stamp(years.first, 1, 1));
  const auto hi = std::lower_bound(timestamps_.begin(), timestamps_.end(), hour_stamp(years.last + 1, 1, 1));
  return {static_cast<std::size_t>(lo - timestamps_.begin()), static_cast<std::size_t>(hi - timestamps_.begin())};
}

std::filesystem::path sidecar_path(const std::filesystem::path& tensor_path) {
  auto p = tensor_path;
  p.replace_extension(".meta.json");
  return p;
}

void save_dataset(const GriddedDataset& ds, const std::filesystem::path& path) {
  const auto& g = ds.grid();
  write_tensor(path,
               {static_cast<std::uint32_t>(ds.n_time()), static_cast<std::uint32_t>(ds.n_var()),
                static_cast<std::uint32_t>(g.n_lat()), static_cast<std::uint32_t>(g.n_lon())},
               ds.data());

  json meta;
  meta["timestamps"] = json::array();
  for (auto h : ds.timestamps()) meta["timestamps"].push_back(format_iso8601(h));
  meta["variables"] = ds.variables();
  meta["lats"] = g.lats;
  meta["lons"] = g.lons;
  meta["static"] = json::object();
  for (const auto& [name, values] : ds.static_fields()) {
    auto file = path.stem();
    file += ".static." + name + ".ften";
    write_tensor(path.parent_path() / file,
                 {1, 1, static_cast<std::uint32_t>(g.n_lat()), static_cast<std::uint32_t>(g.n_lon())}, values);
    meta["static"][name] = file.string();
  }
  std::ofstream out(sidecar_path(path), std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::io, fmt::format("cannot write sidecar for '{}'", path.string()));
  out << meta.dump(1) << '\n';
}

GriddedDataset load_dataset(const std::filesystem::path& path) {
  const auto meta_path = sidecar_path(path);
  require(std::filesystem::exists(meta_path), ErrorKind::io,
          fmt::format("missing sidecar '{}' for '{}'", meta_path.string(), path.string()));
  json meta;
  try {
    std::ifstream in(meta_path);
    meta = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::io, fmt::format("bad sidecar '{}': {}", meta_path.string(), e.what()));
  }

  GridSpec grid;
  std::vector<std::string> variables;
  std::vector<HourStamp> stamps;
  std::map<std::string, std::filesystem::path> static_paths;
  try {
    grid.lats = meta.at("lats").get<std::vector<double>>();
    grid.lons = meta.at("lons").get<std::vector<double>>();
    variables = meta.at("variables").get<std::vector<std::string>>();
    for (const auto& s : meta.at("timestamps")) stamps.push_back(parse_iso8601(s.get<std::string>()));
    if (meta.contains("static")) {
      for (const auto& [name, p] : meta["static"].items()) static_paths[name] = p.get<std::string>();
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::io, fmt::format("bad sidecar '{}': {}", meta_path.string(), e.what()));
  }

  std::array<std::uint32_t, 4> dims{};
  auto payload = read_tensor(path, dims);
  require(dims[0] == stamps.size() && dims[1] == variables.size() && dims[2] == grid.n_lat() &&
              dims[3] == grid.n_lon(),
          ErrorKind::io,
          fmt::format("header dims ({}, {}, {}, {}) disagree with sidecar ({}, {}, {}, {})", dims[0], dims[1], dims[2],
                      dims[3], stamps.size(), variables.size(), grid.n_lat(), grid.n_lon()));

  std::map<std::string, std::vector<float>> statics;
  for (const auto& [name, rel] : static_paths) {
    std::array<std::uint32_t, 4> sdims{};
    auto values = read_tensor(rel.is_absolute() ? rel : path.parent_path() / rel, sdims);
    require(sdims[2] == grid.n_lat() && sdims[3] == grid.n_lon() && values.size() == grid.n_cells(), ErrorKind::io,
            fmt::format("static field '{}' does not match the grid", name));
    statics.emplace(name, std::move(values));
  }
  return GriddedDataset(std::move(grid), std::move(variables), std::move(stamps), std::move(payload),
                        std::move(statics));
}

const VariableStats* StandardizationStats::find(const std::string& name) const {
  for (const auto& v : variables) {
    if (v.name == name) return &v;
  }
  return nullptr;
}

StandardizationStats fit_standardization(const GriddedDataset& ds, const SplitSpec& split) {
  split.validate();
  const auto [begin, end] = ds.year_span(split.train);
  require(end > begin, ErrorKind::data, "training split holds no timestamps");

  StandardizationStats stats;
  const auto count = static_cast<double>((end - begin) * ds.n_cells());
  for (std::size_t v = 0; v < ds.n_var(); ++v) {
    double sum = 0.0;
    for (std::size_t t = begin; t < end; ++t) {
      for (float x : ds.field(t, v)) sum += x;
    }
    const double mean = sum / count;
    double ss = 0.0;
    for (std::size_t t = begin; t < end; ++t) {
      for (float x : ds.field(t, v)) ss += (x - mean) * (x - mean);
    }
    double sd = std::sqrt(ss / count);
    if (!(sd > 0.0)) {
      spdlog::warn("variable '{}' is constant over the training split; it is centred but not rescaled",
                   ds.variables()[v]);
      sd = 1.0;
    }
    stats.variables.push_back({ds.variables()[v], mean, sd});
  }
  return stats;
}

GriddedDataset standardize(const GriddedDataset& ds, const StandardizationStats& stats) {
  std::vector<float> out(ds.data().size());
  const auto cells = ds.n_cells();
  for (std::size_t v = 0; v < ds.n_var(); ++v) {
    const auto* s = stats.find(ds.variables()[v]);
    require(s != nullptr, ErrorKind::invalid_argument,
            fmt::format("standardization stats lack variable '{}'", ds.variables()[v]));
    for (std::size_t t = 0; t < ds.n_time(); ++t) {
      const auto offset = t * ds.state_size() + v * cells;
      for (std::size_t c = 0; c < cells; ++c) {
        out[offset + c] = static_cast<float>((static_cast<double>(ds.data()[offset + c]) - s->mean) / s->std);
      }
    }
  }
  return GriddedDataset(ds.grid(), ds.variables(), ds.timestamps(), std::move(out), ds.static_fields());
}

std::vector<float> normalize_static(std::span<const float> field) {
  require(!field.empty(), ErrorKind::invalid_argument, "static field is empty");
  for (float x : field) require(std::isfinite(x), ErrorKind::data, "static field contains non-finite values");
  const auto [lo, hi] = std::minmax_element(field.begin(), field.end());
  const double min = *lo, max = *hi;
  require(max > min, ErrorKind::numeric, "static field is constant and cannot be rescaled");
  std::vector<float> out(field.size());
  for (std::size_t k = 0; k < field.size(); ++k) {
    out[k] = static_cast<float>((field[k] - min) / (max - min));
  }
  return out;
}

std::vector<std::size_t> valid_init_times(const GriddedDataset& ds, const YearRange& years,
                                          std::int64_t max_lead_hours, std::int64_t history_hours) {
  require(max_lead_hours >= 0 && history_hours >= 0, ErrorKind::invalid_argument, "negative exclusion window");
  const auto [begin, end] = ds.year_span(years);
  std::vector<std::size_t> out;
  if (end <= begin) return out;
  const auto& ts = ds.timestamps();
  const HourStamp first_ok = ts[begin] + history_hours;
  const HourStamp last_ok = ts[end - 1] - max_lead_hours;
  for (std::size_t t = begin; t < end; ++t) {
    if (ts[t] >= first_ok && ts[t] <= last_ok) out.push_back(t);
  }
  return out;
}

std::vector<float> derive_wind_speed(std::span<const float> u, std::span<const float> v) {
  require(u.size() == v.size(), ErrorKind::invalid_argument, "u and v fields differ in shape");
  std::vector<float> ws(u.size());
  for (std::size_t k = 0; k < u.size(); ++k) {
    ws[k] = static_cast<float>(std::hypot(static_cast<double>(u[k]), static_cast<double>(v[k])));
  }
  return ws;
}

}  // namespace stratacast
