#include <doctest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "fixtures.hpp"
#include "stratacast/dataset.hpp"
#include "stratacast/error.hpp"

using namespace stratacast;

namespace {

GriddedDataset values_123() {
  // One variable, three daily times in 2000 (train) plus one in 2001 (test).
  std::vector<HourStamp> times{hour_stamp(2000, 12, 29), hour_stamp(2000, 12, 30), hour_stamp(2000, 12, 31),
                               hour_stamp(2001, 1, 1)};
  return {fixtures::grid(1, 1), {"t2m"}, times, {1.0f, 2.0f, 3.0f, 100.0f}};
}

SplitSpec split_2000_2001() { return {{2000, 2000}, {}, {2001, 2001}}; }

void poke_payload(const std::filesystem::path& path, std::size_t index, float value) {
  std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
  f.seekp(static_cast<std::streamoff>(24 + 4 * index));
  f.write(reinterpret_cast<const char*>(&value), 4);
}

}  // namespace

TEST_CASE("calendar arithmetic round-trips through ISO strings") {
  CHECK(hour_stamp(1970, 1, 1) == 0);
  CHECK(hour_stamp(1970, 1, 2, 3) == 27);
  CHECK(format_iso8601(hour_stamp(2000, 2, 29, 6)) == "2000-02-29T06:00:00Z");
  CHECK(parse_iso8601("2000-02-29T06:00:00Z") == hour_stamp(2000, 2, 29, 6));
  CHECK(parse_iso8601("1979-01-01T00") == hour_stamp(1979, 1, 1));
  CHECK_THROWS_AS(parse_iso8601("2000-02-29T06:30:00Z"), Error);
  CHECK_THROWS_AS(parse_iso8601("not a date"), Error);

  for (HourStamp h = hour_stamp(1899, 12, 1); h < hour_stamp(2101, 1, 1); h += 997) {
    CHECK(parse_iso8601(format_iso8601(h)) == h);
  }
  const auto c = calendar_of(hour_stamp(2000, 3, 1, 12));
  CHECK(c.year == 2000);
  CHECK(c.month == 3u);
  CHECK(c.day_of_year == doctest::Approx(31 + 29 + 0.5));
}

TEST_CASE("grid and variable validation") {
  GridSpec g = fixtures::grid(2, 4);
  CHECK_NOTHROW(g.validate());
  g.lats = {10.0, 10.0};
  CHECK_THROWS_AS(g.validate(), Error);
  g = fixtures::grid(2, 4);
  g.lats[1] = 95.0;
  CHECK_THROWS_AS(g.validate(), Error);

  CHECK(is_storable_variable("z500"));
  CHECK(is_storable_variable("synthetic_3"));
  CHECK_FALSE(is_storable_variable("ws10"));
  CHECK_FALSE(is_storable_variable("synthetic_"));
  CHECK_THROWS_AS(GriddedDataset(fixtures::grid(1, 1), {"ws10"}, {0}, {1.0f}), Error);
  CHECK_THROWS_AS(GriddedDataset(fixtures::grid(1, 1), {"t2m"}, {0, 24, 72}, {1.0f, 2.0f, 3.0f}), Error);
  CHECK_THROWS_AS(GriddedDataset(fixtures::grid(1, 1), {"t2m"}, {0, 24}, {1.0f}), Error);
}

TEST_CASE("non-finite data is reported by time and variable") {
  std::vector<float> data(2 * 2 * 4, 0.5f);
  data[1 * 8 + 1 * 4 + 2] = std::numeric_limits<float>::quiet_NaN();
  try {
    GriddedDataset(fixtures::grid(2, 2), {"u10", "v10"}, {0, 24}, data);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::data);
    CHECK(std::string(e.what()).find("t=1, var=1") != std::string::npos);
  }
}

TEST_CASE("save then load is a bitwise round trip") {
  const auto dir = fixtures::temp_dir("dataset_roundtrip");
  auto cfg = fixtures::small_synthetic(1, 5);
  const auto ds = generate(cfg);
  save_dataset(ds, dir / "d.ften");
  CHECK(std::filesystem::exists(sidecar_path(dir / "d.ften")));
  const auto back = load_dataset(dir / "d.ften");
  REQUIRE(back.data().size() == ds.data().size());
  CHECK(std::memcmp(back.data().data(), ds.data().data(), ds.data().size() * sizeof(float)) == 0);
  CHECK(back.timestamps() == ds.timestamps());
  CHECK(back.variables() == ds.variables());
  CHECK(back.grid().lats == ds.grid().lats);
  CHECK(back.grid().lons == ds.grid().lons);
  CHECK(back.static_fields() == ds.static_fields());

  SUBCASE("2x1x2x2 header with 8 values") {
    GriddedDataset small(fixtures::grid(2, 2), {"z500"}, {0, 24}, {1, 2, 3, 4, 5, 6, 7, 8});
    save_dataset(small, dir / "s.ften");
    const auto s = load_dataset(dir / "s.ften");
    CHECK(s.n_time() == 2);
    CHECK(s.n_var() == 1);
    CHECK(s.grid().n_lat() == 2);
    CHECK(s.grid().n_lon() == 2);
    CHECK(s.at(1, 0, 1, 1) == 8.0f);
  }
  SUBCASE("NaN payload names its index") {
    GriddedDataset small(fixtures::grid(2, 2), {"z500"}, {0, 24}, {1, 2, 3, 4, 5, 6, 7, 8});
    save_dataset(small, dir / "n.ften");
    poke_payload(dir / "n.ften", 5, std::numeric_limits<float>::quiet_NaN());
    try {
      load_dataset(dir / "n.ften");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("t=1, var=0") != std::string::npos);
    }
  }
  SUBCASE("missing sidecar") {
    GriddedDataset small(fixtures::grid(1, 1), {"z500"}, {0}, {1});
    save_dataset(small, dir / "m.ften");
    std::filesystem::remove(sidecar_path(dir / "m.ften"));
    CHECK_THROWS_AS(load_dataset(dir / "m.ften"), Error);
  }
  SUBCASE("truncated payload") {
    GriddedDataset small(fixtures::grid(2, 2), {"z500"}, {0, 24}, {1, 2, 3, 4, 5, 6, 7, 8});
    save_dataset(small, dir / "t.ften");
    std::filesystem::resize_file(dir / "t.ften", 24 + 4 * 7);
    CHECK_THROWS_AS(load_dataset(dir / "t.ften"), Error);
  }
}

TEST_CASE("standardization uses training-year population statistics") {
  const auto ds = values_123();
  const auto stats = fit_standardization(ds, split_2000_2001());
  REQUIRE(stats.variables.size() == 1);
  CHECK(stats.variables[0].mean == doctest::Approx(2.0));
  CHECK(stats.variables[0].std == doctest::Approx(std::sqrt(2.0 / 3.0)));
  CHECK(stats.variables[0].std == doctest::Approx(0.8165).epsilon(1e-4));

  const auto z = standardize(ds, stats);
  CHECK(z.at(0, 0, 0, 0) == doctest::Approx(-1.2247).epsilon(1e-4));
  CHECK(z.at(1, 0, 0, 0) == doctest::Approx(0.0));
  CHECK(z.at(2, 0, 0, 0) == doctest::Approx(1.2247).epsilon(1e-4));

  SUBCASE("test years do not influence the stats") {
    GriddedDataset mutated(ds.grid(), ds.variables(), ds.timestamps(), {1.0f, 2.0f, 3.0f, -5000.0f});
    const auto s2 = fit_standardization(mutated, split_2000_2001());
    CHECK(s2.variables[0].mean == stats.variables[0].mean);
    CHECK(s2.variables[0].std == stats.variables[0].std);
  }
  SUBCASE("identity stats") {
    StandardizationStats id{{{"t2m", 0.0, 1.0}}};
    const auto same = standardize(ds, id);
    for (std::size_t k = 0; k < ds.data().size(); ++k) CHECK(same.data()[k] == ds.data()[k]);
  }
  SUBCASE("a constant field is centred with unit scale") {
    GriddedDataset flat(ds.grid(), ds.variables(), ds.timestamps(), {4, 4, 4, 4});
    const auto s = fit_standardization(flat, split_2000_2001());
    CHECK(s.variables[0].mean == 4.0);
    CHECK(s.variables[0].std == 1.0);
    CHECK(standardize(flat, s).data()[0] == 0.0f);
  }
  SUBCASE("missing variable") {
    StandardizationStats other{{{"z500", 0.0, 1.0}}};
    CHECK_THROWS_AS(standardize(ds, other), Error);
  }
}

TEST_CASE("standardized training split has zero mean and unit std; inverse recovers the input") {
  const auto ds = generate(fixtures::small_synthetic(3, 11));
  const SplitSpec split{{2000, 2001}, {}, {2002, 2002}};
  const auto stats = fit_standardization(ds, split);
  const auto z = standardize(ds, stats);
  const auto [b, e] = z.year_span(split.train);
  for (std::size_t v = 0; v < z.n_var(); ++v) {
    double s = 0.0, ss = 0.0;
    std::size_t n = 0;
    for (std::size_t t = b; t < e; ++t) {
      for (float x : z.field(t, v)) {
        s += x;
        ss += static_cast<double>(x) * x;
        ++n;
      }
    }
    const double mean = s / n;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::sqrt(ss / n - mean * mean) == doctest::Approx(1.0).epsilon(1e-6));
  }
  for (std::size_t t = 0; t < z.n_time(); t += 37) {
    for (std::size_t v = 0; v < z.n_var(); ++v) {
      const auto zf = z.field(t, v);
      const auto xf = ds.field(t, v);
      for (std::size_t k = 0; k < zf.size(); ++k) {
        const double back = zf[k] * stats.variables[v].std + stats.variables[v].mean;
        CHECK(back == doctest::Approx(xf[k]).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("normalize_static") {
  const std::vector<float> a{0, 5, 10};
  CHECK(normalize_static(a) == std::vector<float>{0, 0.5f, 1});
  const std::vector<float> b{0, 1};
  CHECK(normalize_static(b) == b);
  CHECK_THROWS_AS(normalize_static(std::vector<float>{3, 3}), Error);

  std::mt19937_64 rng(3);
  std::normal_distribution<float> z(100.0f, 40.0f);
  std::vector<float> oro(64);
  for (float& x : oro) x = z(rng);
  const auto n = normalize_static(oro);
  CHECK(*std::min_element(n.begin(), n.end()) == 0.0f);
  CHECK(*std::max_element(n.begin(), n.end()) == 1.0f);
}

TEST_CASE("valid_init_times excludes history and lead windows") {
  const auto hourly = fixtures::random_dataset(8760 + 48, 1, 1, 1, 1, hour_stamp(2001, 1, 1), 1);
  const auto inits = valid_init_times(hourly, {2001, 2001}, 240, 24);
  CHECK(inits.size() == 8496);
  CHECK(inits.front() == 24);
  for (std::size_t i = 1; i < inits.size(); ++i) CHECK(inits[i] == inits[i - 1] + 1);
  CHECK(valid_init_times(hourly, {2001, 2001}, 0, 0).size() == 8760);

  const auto short_split = fixtures::random_dataset(100, 1, 1, 1, 1, hour_stamp(2001, 1, 1), 1);
  CHECK(valid_init_times(short_split, {2001, 2001}, 240, 24).empty());

  const auto daily = fixtures::random_dataset(366 + 365, 1, 1, 1, 1, hour_stamp(2000, 1, 1), 24);
  CHECK(valid_init_times(daily, {2000, 2000}, 240, 24).size() == 366 - 1 - 10);
}

TEST_CASE("split validation") {
  CHECK_NOTHROW((SplitSpec{{1979, 2015}, {2016, 2017}, {2018, 2018}}.validate()));
  CHECK_THROWS_AS((SplitSpec{{1979, 2015}, {2015, 2017}, {2018, 2018}}.validate()), Error);
  CHECK_THROWS_AS((SplitSpec{{1979, 2015}, {}, {2010, 2010}}.validate()), Error);
}

TEST_CASE("derive_wind_speed") {
  const std::vector<float> u{3, 0, 1}, v{4, 0, 1};
  const auto ws = derive_wind_speed(u, v);
  CHECK(ws[0] == doctest::Approx(5.0));
  CHECK(ws[1] == 0.0f);
  CHECK(ws[2] == doctest::Approx(1.41421).epsilon(1e-5));
  CHECK_THROWS_AS(derive_wind_speed(u, std::vector<float>{1, 2}), Error);

  std::mt19937_64 rng(9);
  std::normal_distribution<float> z(0.0f, 10.0f);
  std::vector<float> a(200), b(200);
  for (auto& x : a) x = z(rng);
  for (auto& x : b) x = z(rng);
  const auto w = derive_wind_speed(a, b);
  for (std::size_t i = 0; i < w.size(); ++i) {
    CHECK(w[i] >= 0.0f);
    const double expect = static_cast<double>(a[i]) * a[i] + static_cast<double>(b[i]) * b[i];
    CHECK(static_cast<double>(w[i]) * w[i] == doctest::Approx(expect).epsilon(1e-6));
  }
}
