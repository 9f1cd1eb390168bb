#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numbers>

#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "stratacast/error.hpp"
#include "stratacast/synthetic.hpp"

using namespace stratacast;

namespace {

double lag1_autocorrelation(const GriddedDataset& ds, std::size_t cell) {
  const auto n = ds.n_time();
  double mean = 0.0;
  for (std::size_t t = 0; t < n; ++t) mean += ds.state(t)[cell];
  mean /= static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    const double a = ds.state(t)[cell] - mean;
    den += a * a;
    if (t + 1 < n) num += a * (ds.state(t + 1)[cell] - mean);
  }
  return num / den;
}

}  // namespace

TEST_CASE("config validation") {
  auto c = fixtures::small_synthetic(1, 0);
  CHECK_NOTHROW(c.validate());
  c.ar1_coefficient = 1.0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = fixtures::small_synthetic(1, 0);
  c.noise_std = -0.1;
  CHECK_THROWS_AS(c.validate(), Error);
  c = fixtures::small_synthetic(0, 0);
  CHECK_THROWS_AS(c.validate(), Error);

  const auto j = fixtures::small_synthetic(2, 9).to_json();
  const auto back = SyntheticConfig::from_json(j);
  CHECK(back.to_json() == j);
}

TEST_CASE("without regimes or noise each cell is the seasonal sinusoid") {
  auto c = fixtures::small_synthetic(1, 4);
  c.regime_amplitude = 0.0;
  c.noise_std = 0.0;
  c.ar1_coefficient = 0.0;
  c.seasonal_amplitude = 2.5;
  const auto ds = generate(c);
  const auto comp = synthetic_components(c);
  for (std::size_t t = 0; t < ds.n_time(); ++t) {
    const double doy = calendar_of(ds.timestamps()[t]).day_of_year;
    for (std::size_t v = 0; v < ds.n_var(); ++v) {
      const auto f = ds.field(t, v);
      for (std::size_t k = 0; k < f.size(); ++k) {
        const double expect = 2.5 * std::sin(2.0 * std::numbers::pi * doy / 365.25 + comp.phase_at(v, k));
        CHECK(f[k] == doctest::Approx(expect).epsilon(1e-6).scale(1.0));
      }
    }
  }
  SUBCASE("zero where the sine term vanishes") {
    SyntheticComponents zero = comp;
    std::fill(zero.phase.begin(), zero.phase.end(), 0.0);
    CHECK(synthetic_mean_value(c, zero, hour_stamp(2000, 1, 1), 0, 0) == 0.0);
  }
}

TEST_CASE("generation is deterministic per seed") {
  const auto a = generate(fixtures::small_synthetic(1, 17));
  const auto b = generate(fixtures::small_synthetic(1, 17));
  const auto c = generate(fixtures::small_synthetic(1, 18));
  REQUIRE(a.data().size() == b.data().size());
  CHECK(std::memcmp(a.data().data(), b.data().data(), a.data().size() * sizeof(float)) == 0);
  CHECK(std::memcmp(a.data().data(), c.data().data(), a.data().size() * sizeof(float)) != 0);
  CHECK(a.static_fields() == b.static_fields());
  CHECK(a.static_fields().size() == 2);
}

TEST_CASE("regime patterns are orthogonal with unit mean square") {
  const auto c = fixtures::small_synthetic(1, 23);
  const auto comp = synthetic_components(c);
  const auto n = static_cast<double>(comp.n_cells);
  for (std::size_t v = 0; v < c.n_variables; ++v) {
    for (std::size_t a = 0; a < comp.n_regimes; ++a) {
      for (std::size_t b = a; b < comp.n_regimes; ++b) {
        double s = 0.0;
        for (std::size_t k = 0; k < comp.n_cells; ++k) s += comp.pattern_at(v, a, k) * comp.pattern_at(v, b, k);
        CHECK(s / n == doctest::Approx(a == b ? 1.0 : 0.0).scale(1.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("monthly climatology over 20 years recovers the regime patterns") {
  auto c = fixtures::small_synthetic(20, 31);
  c.grid = fixtures::grid(3, 4);
  c.n_variables = 1;
  c.seasonal_amplitude = 0.0;
  c.ar1_coefficient = 0.0;
  c.noise_std = 1.0;
  const auto ds = generate(c);
  const auto comp = synthetic_components(c);

  std::vector<double> sum(12 * comp.n_cells, 0.0);
  std::vector<std::size_t> count(12, 0);
  for (std::size_t t = 0; t < ds.n_time(); ++t) {
    const auto m = calendar_of(ds.timestamps()[t]).month - 1;
    ++count[m];
    for (std::size_t k = 0; k < comp.n_cells; ++k) sum[m * comp.n_cells + k] += ds.state(t)[k];
  }
  std::size_t beyond_3se = 0, checks = 0;
  double max_z = 0.0;
  for (std::size_t m = 0; m < 12; ++m) {
    const double se = c.noise_std / std::sqrt(static_cast<double>(count[m]));
    for (std::size_t k = 0; k < comp.n_cells; ++k) {
      const double est = sum[m * comp.n_cells + k] / static_cast<double>(count[m]);
      const double z = std::abs(est - c.regime_amplitude * comp.pattern_at(0, m, k)) / se;
      max_z = std::max(max_z, z);
      beyond_3se += z > 3.0;
      ++checks;
    }
  }
  // 3 SE per cell, with the family-wise bound for all 144 cells.
  CHECK(beyond_3se <= checks / 100);
  CHECK(max_z < 4.5);
}

TEST_CASE("anomaly lag-1 autocorrelation matches ar1") {
  for (double phi : {0.0, 0.9}) {
    SyntheticConfig c;
    c.grid = fixtures::grid(1, 2);
    c.n_years = 30;
    c.n_variables = 1;
    c.seasonal_amplitude = 0.0;
    c.n_regimes = 0;
    c.regime_amplitude = 0.0;
    c.ar1_coefficient = phi;
    c.noise_std = 1.0;
    c.seed = 77;
    const auto ds = generate(c);
    REQUIRE(ds.n_time() >= 10000);
    for (std::size_t cell = 0; cell < 2; ++cell) CHECK(std::abs(lag1_autocorrelation(ds, cell) - phi) < 0.05);
  }
}
