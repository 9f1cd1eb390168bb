#include "stratacast/synthetic.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "stratacast/error.hpp"
#include "stratacast/rng.hpp"

namespace stratacast {

namespace {

enum StreamTag : std::uint64_t { kPhase = 1, kPattern = 2, kNoise = 3, kStatic = 4 };

// Modified Gram-Schmidt over grid cells, rescaled to unit mean-square.
void orthogonalize(std::vector<double>& vecs, std::size_t count, std::size_t n) {
  for (std::size_t a = 0; a < count; ++a) {
    double* va = vecs.data() + a * n;
    for (std::size_t b = 0; b < a; ++b) {
      const double* vb = vecs.data() + b * n;
      double dot = 0.0;
      for (std::size_t k = 0; k < n; ++k) dot += va[k] * vb[k];
      dot /= static_cast<double>(n);
      for (std::size_t k = 0; k < n; ++k) va[k] -= dot * vb[k];
    }
    double ms = 0.0;
    for (std::size_t k = 0; k < n; ++k) ms += va[k] * va[k];
    ms /= static_cast<double>(n);
    require(ms > 1e-12, ErrorKind::numeric, "regime patterns are linearly dependent");
    const double scale = 1.0 / std::sqrt(ms);
    for (std::size_t k = 0; k < n; ++k) va[k] *= scale;
  }
}

}  // namespace

void SyntheticConfig::validate() const {
  grid.validate();
  require(n_years >= 1, ErrorKind::invalid_argument, "n_years must be at least 1");
  require(stride_hours >= 1 && stride_hours <= 24 && 24 % stride_hours == 0, ErrorKind::invalid_argument,
          "stride_hours must divide 24");
  require(n_variables >= 1, ErrorKind::invalid_argument, "n_variables must be at least 1");
  require(n_regimes <= 12, ErrorKind::invalid_argument, "at most 12 monthly regimes");
  require(n_regimes <= grid.n_cells(), ErrorKind::invalid_argument,
          fmt::format("{} regime patterns cannot be orthogonal on {} cells", n_regimes, grid.n_cells()));
  require(ar1_coefficient >= 0.0 && ar1_coefficient < 1.0, ErrorKind::invalid_argument,
          "ar1_coefficient must lie in [0, 1)");
  require(noise_std >= 0.0, ErrorKind::invalid_argument, "noise_std must be non-negative");
  require(std::isfinite(seasonal_amplitude) && std::isfinite(regime_amplitude), ErrorKind::invalid_argument,
          "amplitudes must be finite");
}

SyntheticConfig SyntheticConfig::from_json(const nlohmann::json& j) {
  SyntheticConfig c;
  try {
    if (j.contains("grid")) {
      const auto& g = j["grid"];
      if (g.contains("resolution_deg")) {
        c.grid = GridSpec::regular(g["resolution_deg"].get<double>());
      } else {
        c.grid.lats = g.at("lats").get<std::vector<double>>();
        c.grid.lons = g.at("lons").get<std::vector<double>>();
      }
    } else {
      c.grid = GridSpec::regular(45.0);
    }
    c.start_year = j.value("start_year", c.start_year);
    c.n_years = j.value("n_years", c.n_years);
    c.stride_hours = j.value("stride_hours", c.stride_hours);
    c.n_variables = j.value("n_variables", c.n_variables);
    c.seasonal_amplitude = j.value("seasonal_amplitude", c.seasonal_amplitude);
    c.n_regimes = j.value("n_regimes", c.n_regimes);
    c.regime_amplitude = j.value("regime_amplitude", c.regime_amplitude);
    c.ar1_coefficient = j.value("ar1_coefficient", c.ar1_coefficient);
    c.noise_std = j.value("noise_std", c.noise_std);
    c.static_fields = j.value("static_fields", c.static_fields);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::invalid_argument, fmt::format("bad synthetic config: {}", e.what()));
  }
  c.validate();
  return c;
}

nlohmann::json SyntheticConfig::to_json() const {
  return {{"grid", {{"lats", grid.lats}, {"lons", grid.lons}}},
          {"start_year", start_year},
          {"n_years", n_years},
          {"stride_hours", stride_hours},
          {"n_variables", n_variables},
          {"seasonal_amplitude", seasonal_amplitude},
          {"n_regimes", n_regimes},
          {"regime_amplitude", regime_amplitude},
          {"ar1_coefficient", ar1_coefficient},
          {"noise_std", noise_std},
          {"static_fields", static_fields},
          {"seed", seed}};
}

SyntheticComponents synthetic_components(const SyntheticConfig& cfg) {
  cfg.validate();
  SyntheticComponents comp;
  comp.n_cells = cfg.grid.n_cells();
  comp.n_regimes = cfg.n_regimes;
  comp.phase.resize(cfg.n_variables * comp.n_cells);
  comp.patterns.resize(cfg.n_variables * comp.n_regimes * comp.n_cells);

  for (std::size_t v = 0; v < cfg.n_variables; ++v) {
    auto rng = make_rng(cfg.seed, {kPhase, v});
    std::uniform_real_distribution<double> uni(0.0, 2.0 * std::numbers::pi);
    for (std::size_t c = 0; c < comp.n_cells; ++c) comp.phase[v * comp.n_cells + c] = uni(rng);

    if (comp.n_regimes == 0) continue;
    auto prng = make_rng(cfg.seed, {kPattern, v});
    std::normal_distribution<double> normal;
    std::vector<double> block(comp.n_regimes * comp.n_cells);
    for (auto& x : block) x = normal(prng);
    orthogonalize(block, comp.n_regimes, comp.n_cells);
    std::copy(block.begin(), block.end(),
              comp.patterns.begin() + static_cast<std::ptrdiff_t>(v * comp.n_regimes * comp.n_cells));
  }
  return comp;
}

double synthetic_mean_value(const SyntheticConfig& cfg, const SyntheticComponents& comp, HourStamp h, std::size_t v,
                            std::size_t cell) {
  const auto cal = calendar_of(h);
  double x = cfg.seasonal_amplitude *
             std::sin(2.0 * std::numbers::pi * cal.day_of_year / 365.25 + comp.phase_at(v, cell));
  if (comp.n_regimes > 0) {
    x += cfg.regime_amplitude * comp.pattern_at(v, (cal.month - 1) % comp.n_regimes, cell);
  }
  return x;
}

GriddedDataset generate(const SyntheticConfig& cfg) {
  const auto comp = synthetic_components(cfg);
  const auto n_cells = comp.n_cells;

  std::vector<HourStamp> stamps;
  const HourStamp begin = hour_stamp(cfg.start_year, 1, 1);
  const HourStamp end = hour_stamp(cfg.start_year + static_cast<int>(cfg.n_years), 1, 1);
  for (HourStamp h = begin; h < end; h += cfg.stride_hours) stamps.push_back(h);

  const auto n_time = stamps.size();
  const auto state = cfg.n_variables * n_cells;
  std::vector<float> data(n_time * state);

  const double stationary_std =
      cfg.noise_std / std::sqrt(1.0 - cfg.ar1_coefficient * cfg.ar1_coefficient);
  std::normal_distribution<double> normal;
  for (std::size_t v = 0; v < cfg.n_variables; ++v) {
    for (std::size_t c = 0; c < n_cells; ++c) {
      auto rng = make_rng(cfg.seed, {kNoise, v, c});
      double anomaly = stationary_std * normal(rng);
      for (std::size_t t = 0; t < n_time; ++t) {
        if (t > 0) anomaly = cfg.ar1_coefficient * anomaly + cfg.noise_std * normal(rng);
        data[t * state + v * n_cells + c] =
            static_cast<float>(synthetic_mean_value(cfg, comp, stamps[t], v, c) + anomaly);
      }
    }
  }

  std::vector<std::string> names;
  for (std::size_t v = 0; v < cfg.n_variables; ++v) names.push_back(fmt::format("synthetic_{}", v));

  std::map<std::string, std::vector<float>> statics;
  if (cfg.static_fields && n_cells >= 2) {
    auto rng = make_rng(cfg.seed, {kStatic});
    std::normal_distribution<double> g;
    std::vector<float> orography(n_cells), mask(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) {
      orography[c] = static_cast<float>(std::exp(0.5 * g(rng)));
      mask[c] = g(rng) > 0.0 ? 1.0f : 0.0f;
    }
    mask.front() = 0.0f;
    mask.back() = 1.0f;
    statics.emplace("orography", normalize_static(orography));
    statics.emplace("land_sea_mask", normalize_static(mask));
  }

  return GriddedDataset(cfg.grid, std::move(names), std::move(stamps), std::move(data), std::move(statics));
}

}  // namespace stratacast
