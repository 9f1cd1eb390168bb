#include "stratacast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "stratacast/error.hpp"
#include "stratacast/forecast.hpp"

namespace stratacast {

namespace {

void check_shapes(const EnsembleSeries& m, const FieldSeries& truth, const AreaWeights& w) {
  require(m.n_case == truth.n_case && m.n_cells == truth.n_cells && m.n_cells == w.n_cells(),
          ErrorKind::invalid_argument, "ensemble, truth and weights disagree in shape");
  require(m.values.size() == m.n_case * m.n_member * m.n_cells && truth.values.size() == truth.n_case * truth.n_cells,
          ErrorKind::invalid_argument, "series storage does not match its declared shape");
  require(m.n_case > 0 && m.n_member > 0, ErrorKind::invalid_argument, "empty ensemble");
}

double unbiased_variance(std::span<const double> xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

// Weighted accumulators for one (variable, lead) cell of the output table.
struct ScoreSums {
  double crps = 0.0;
  double sq_err = 0.0;
  double var = 0.0;
  double count = 0.0;

  void add(std::span<const double> members, double y, double weight) {
    double mean = 0.0;
    for (double x : members) mean += x;
    mean /= static_cast<double>(members.size());
    crps += weight * crps_ensemble(members, y);
    sq_err += weight * (mean - y) * (mean - y);
    if (members.size() >= 2) var += weight * unbiased_variance(members);
    count += 1.0;
  }

  MetricRecord finish(std::string method, std::string variable, int lead, std::size_t n_member) const {
    MetricRecord r;
    r.method = std::move(method);
    r.variable = std::move(variable);
    r.lead_days = lead;
    r.crps = crps / count;
    r.rmse = std::sqrt(sq_err / count);
    const double spread = std::sqrt(var / count);
    const auto m = static_cast<double>(n_member);
    r.ssr = (n_member >= 2 && r.rmse > 0.0) ? std::sqrt((m + 1.0) / m) * spread / r.rmse : 0.0;
    return r;
  }
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

AreaWeights area_weights(const GridSpec& grid, bool flat) {
  grid.validate();
  AreaWeights aw;
  aw.n_lat = grid.n_lat();
  aw.n_lon = grid.n_lon();
  aw.w.assign(grid.n_cells(), 1.0);
  if (flat) return aw;

  std::vector<double> c(grid.n_lat());
  double mean = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i] = std::max(std::cos(grid.lats[i] * std::numbers::pi / 180.0), 1e-6);
    mean += c[i];
  }
  mean /= static_cast<double>(c.size());
  for (std::size_t i = 0; i < aw.n_lat; ++i) {
    for (std::size_t j = 0; j < aw.n_lon; ++j) aw.w[i * aw.n_lon + j] = c[i] / mean;
  }
  return aw;
}

FieldSeries ensemble_mean(const EnsembleSeries& members) {
  FieldSeries out{members.n_case, members.n_cells, std::vector<double>(members.n_case * members.n_cells, 0.0)};
  for (std::size_t c = 0; c < members.n_case; ++c) {
    for (std::size_t m = 0; m < members.n_member; ++m) {
      for (std::size_t k = 0; k < members.n_cells; ++k) out.values[c * members.n_cells + k] += members.at(c, m, k);
    }
  }
  for (auto& x : out.values) x /= static_cast<double>(members.n_member);
  return out;
}

double rmse(const FieldSeries& ens_mean, const FieldSeries& truth, const AreaWeights& w) {
  require(ens_mean.n_case == truth.n_case && ens_mean.n_cells == truth.n_cells && truth.n_cells == w.n_cells() &&
              ens_mean.values.size() == truth.values.size(),
          ErrorKind::invalid_argument, "rmse: shape mismatch");
  require(truth.n_case > 0, ErrorKind::invalid_argument, "rmse: no cases");
  double sum = 0.0;
  for (std::size_t c = 0; c < truth.n_case; ++c) {
    for (std::size_t k = 0; k < truth.n_cells; ++k) {
      const double e = ens_mean.at(c, k) - truth.at(c, k);
      sum += w.at(k) * e * e;
    }
  }
  return std::sqrt(sum / static_cast<double>(truth.n_case * truth.n_cells));
}

double crps_ensemble(std::span<const double> members, double y) {
  require(!members.empty(), ErrorKind::invalid_argument, "crps: empty ensemble");
  const auto m = members.size();
  double skill = 0.0;
  for (double x : members) skill += std::abs(x - y);
  skill /= static_cast<double>(m);
  if (m == 1) return skill;

  // sum_{i<j} |x_i - x_j| from the order statistics.
  std::vector<double> sorted(members.begin(), members.end());
  std::sort(sorted.begin(), sorted.end());
  double pair_sum = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    pair_sum += sorted[k] * (2.0 * static_cast<double>(k) - static_cast<double>(m) + 1.0);
  }
  const double spread = pair_sum / (static_cast<double>(m) * static_cast<double>(m - 1));
  return std::max(skill - spread, 0.0);
}

double crps_field(const EnsembleSeries& members, const FieldSeries& truth, const AreaWeights& w) {
  check_shapes(members, truth, w);
  std::vector<double> buf(members.n_member);
  double sum = 0.0;
  for (std::size_t c = 0; c < truth.n_case; ++c) {
    for (std::size_t k = 0; k < truth.n_cells; ++k) {
      for (std::size_t m = 0; m < members.n_member; ++m) buf[m] = members.at(c, m, k);
      sum += w.at(k) * crps_ensemble(buf, truth.at(c, k));
    }
  }
  return sum / static_cast<double>(truth.n_case * truth.n_cells);
}

double ensemble_spread(const EnsembleSeries& members, const AreaWeights& w) {
  require(members.n_member >= 2, ErrorKind::invalid_argument, "spread needs at least two members");
  require(members.n_cells == w.n_cells() && members.n_case > 0, ErrorKind::invalid_argument, "spread: bad shape");
  std::vector<double> buf(members.n_member);
  double sum = 0.0;
  for (std::size_t c = 0; c < members.n_case; ++c) {
    for (std::size_t k = 0; k < members.n_cells; ++k) {
      for (std::size_t m = 0; m < members.n_member; ++m) buf[m] = members.at(c, m, k);
      sum += w.at(k) * unbiased_variance(buf);
    }
  }
  return std::sqrt(sum / static_cast<double>(members.n_case * members.n_cells));
}

double ssr(const EnsembleSeries& members, const FieldSeries& truth, const AreaWeights& w) {
  check_shapes(members, truth, w);
  require(members.n_member >= 2, ErrorKind::invalid_argument, "SSR needs at least two members");
  const double skill = rmse(ensemble_mean(members), truth, w);
  require(skill > 0.0, ErrorKind::numeric, "SSR is undefined when the ensemble-mean error is zero");
  const auto m = static_cast<double>(members.n_member);
  return std::sqrt((m + 1.0) / m) * ensemble_spread(members, w) / skill;
}

std::vector<MetricRecord> evaluate_forecast(const EnsembleForecast& fc, const GriddedDataset& truth,
                                            std::span<const int> lead_days, const AreaWeights& w,
                                            const std::string& method, const StandardizationStats* stats) {
  require(fc.variables == truth.variables(), ErrorKind::invalid_argument, "forecast and truth variables differ");
  require(fc.n_cells == truth.n_cells() && fc.n_cells == w.n_cells(), ErrorKind::invalid_argument,
          "forecast, truth and weights grids differ");
  require(fc.lead_stride_hours == 24, ErrorKind::invalid_argument, "forecast lead stride must be 24 h");
  require(!fc.init_times.empty() && fc.n_members > 0, ErrorKind::invalid_argument, "empty forecast");

  // Truth time index per (lead, init).
  std::vector<std::vector<std::size_t>> truth_idx;
  for (int lead : lead_days) {
    require(lead >= 1 && static_cast<std::size_t>(lead) <= fc.n_steps, ErrorKind::invalid_argument,
            fmt::format("lead {} d is outside the forecast's {} steps", lead, fc.n_steps));
    auto& row = truth_idx.emplace_back();
    for (auto init : fc.init_times) {
      const HourStamp valid = init + static_cast<HourStamp>(lead) * 24;
      const auto t = truth.time_index(valid);
      require(t.has_value(), ErrorKind::data, fmt::format("truth lacks timestamp {}", format_iso8601(valid)));
      row.push_back(*t);
    }
  }

  const auto n_var = fc.variables.size();
  const auto cells = fc.n_cells;
  std::vector<double> buf(fc.n_members);
  std::vector<MetricRecord> out;

  for (std::size_t v = 0; v < n_var; ++v) {
    double scale = 1.0;
    if (stats) {
      const auto* s = stats->find(fc.variables[v]);
      require(s != nullptr, ErrorKind::invalid_argument, fmt::format("no stats for '{}'", fc.variables[v]));
      scale = s->std;
    }
    for (std::size_t l = 0; l < lead_days.size(); ++l) {
      const auto step = static_cast<std::size_t>(lead_days[l] - 1);
      ScoreSums sums;
      for (std::size_t c = 0; c < fc.init_times.size(); ++c) {
        const auto y = truth.field(truth_idx[l][c], v);
        for (std::size_t k = 0; k < cells; ++k) {
          for (std::size_t m = 0; m < fc.n_members; ++m) {
            buf[m] = scale * static_cast<double>(fc.state(c, m, step)[v * cells + k]);
          }
          sums.add(buf, scale * static_cast<double>(y[k]), w.at(k));
        }
      }
      out.push_back(sums.finish(method, fc.variables[v], lead_days[l], fc.n_members));
    }
  }

  // Wind speed is derived in physical units from the destandardized components.
  if (stats) {
    const auto u_it = std::find(fc.variables.begin(), fc.variables.end(), "u10");
    const auto v_it = std::find(fc.variables.begin(), fc.variables.end(), "v10");
    if (u_it != fc.variables.end() && v_it != fc.variables.end()) {
      const auto ui = static_cast<std::size_t>(u_it - fc.variables.begin());
      const auto vi = static_cast<std::size_t>(v_it - fc.variables.begin());
      const auto* su = stats->find("u10");
      const auto* sv = stats->find("v10");
      const auto raw = [](const VariableStats* s, float x) { return static_cast<double>(x) * s->std + s->mean; };
      for (std::size_t l = 0; l < lead_days.size(); ++l) {
        const auto step = static_cast<std::size_t>(lead_days[l] - 1);
        ScoreSums sums;
        for (std::size_t c = 0; c < fc.init_times.size(); ++c) {
          const auto yu = truth.field(truth_idx[l][c], ui);
          const auto yv = truth.field(truth_idx[l][c], vi);
          for (std::size_t k = 0; k < cells; ++k) {
            for (std::size_t m = 0; m < fc.n_members; ++m) {
              const auto s = fc.state(c, m, step);
              buf[m] = std::hypot(raw(su, s[ui * cells + k]), raw(sv, s[vi * cells + k]));
            }
            sums.add(buf, std::hypot(raw(su, yu[k]), raw(sv, yv[k])), w.at(k));
          }
        }
        out.push_back(sums.finish(method, "ws10", lead_days[l], fc.n_members));
      }
    }
  }
  return out;
}

void write_metrics_csv(std::ostream& out, std::span<const MetricRecord> records, bool with_seed) {
  out << (with_seed ? "method,seed,variable,lead_days,crps,rmse,ssr\n" : "method,variable,lead_days,crps,rmse,ssr\n");
  for (const auto& r : records) {
    out << r.method << ',';
    if (with_seed) out << (r.seed ? std::to_string(*r.seed) : std::string()) << ',';
    out << fmt::format("{},{},{:.6g},{:.6g},{:.6g}\n", r.variable, r.lead_days, r.crps, r.rmse, r.ssr);
  }
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricRecord> records, bool with_seed) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::io, fmt::format("cannot write '{}'", path.string()));
  write_metrics_csv(out, records, with_seed);
}

std::vector<MetricRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, fmt::format("cannot open '{}'", path.string()));
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::io, fmt::format("'{}' is empty", path.string()));
  const auto header = split_csv_line(line);
  const bool with_seed = header.size() == 7 && header[1] == "seed";
  require(with_seed || (header.size() == 6 && header[0] == "method"), ErrorKind::io,
          fmt::format("'{}' is not a metrics CSV", path.string()));

  std::vector<MetricRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    require(cells.size() == header.size(), ErrorKind::io, fmt::format("{}:{}: wrong column count", path.string(), line_no));
    try {
      MetricRecord r;
      std::size_t k = 0;
      r.method = cells[k++];
      if (with_seed) {
        const auto& s = cells[k++];
        if (!s.empty()) r.seed = std::stoull(s);
      }
      r.variable = cells[k++];
      r.lead_days = std::stoi(cells[k++]);
      r.crps = std::stod(cells[k++]);
      r.rmse = std::stod(cells[k++]);
      r.ssr = std::stod(cells[k++]);
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      fail(ErrorKind::io, fmt::format("{}:{}: unparseable number", path.string(), line_no));
    }
  }
  return out;
}

}  // namespace stratacast
