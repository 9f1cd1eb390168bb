#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "stratacast/error.hpp"
#include "stratacast/features.hpp"

using namespace stratacast;

namespace {

// Correlated columns with a spread-out spectrum.
FeatureMatrix random_matrix(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
  std::normal_distribution<double> z;
  FeatureMatrix base(n, d), mix(d, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) base(i, j) = z(rng) * (1.0 + 0.7 * static_cast<double>(j));
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) mix(i, j) = z(rng);
  }
  return base * mix + Eigen::MatrixXd::Constant(n, d, 3.0);
}

oracle::Rows to_rows(const FeatureMatrix& x) {
  oracle::Rows rows(static_cast<std::size_t>(x.rows()), oracle::Row(static_cast<std::size_t>(x.cols())));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = x(i, j);
  }
  return rows;
}

}  // namespace

TEST_CASE("PCA matches a covariance eigendecomposition oracle on random matrices") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> dims(2, 10);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index d = dims(rng);
    const Eigen::Index n = d + 2 + dims(rng) * 3;
    const auto x = random_matrix(rng, n, d);
    const auto m = static_cast<std::size_t>(d);
    const auto model = pca_fit(x, m);
    const auto [values, vectors] = oracle::jacobi_eigen(oracle::covariance(to_rows(x)));

    CAPTURE(trial);
    REQUIRE(model.dims() == m);
    for (std::size_t k = 0; k < m; ++k) {
      const auto ki = static_cast<Eigen::Index>(k);
      CHECK(std::abs(model.explained_variance(ki) - values[k]) < 1e-6 * std::max(1.0, values[k]));
      double dot = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) dot += model.axes(ki, j) * vectors[k][static_cast<std::size_t>(j)];
      const double sign = dot >= 0 ? 1.0 : -1.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        CHECK(std::abs(model.axes(ki, j) - sign * vectors[k][static_cast<std::size_t>(j)]) < 1e-6);
      }
    }
    const Eigen::MatrixXd gram = model.axes * model.axes.transpose();
    CHECK((gram - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-6);
    for (Eigen::Index k = 1; k < d; ++k) CHECK(model.explained_variance(k) <= model.explained_variance(k - 1));
  }
}

TEST_CASE("PCA sign convention and projection") {
  std::mt19937_64 rng(7);
  const auto x = random_matrix(rng, 30, 5);
  const auto model = pca_fit(x, 3);
  for (Eigen::Index k = 0; k < 3; ++k) {
    Eigen::Index j = 0;
    while (std::abs(model.axes(k, j)) <= 1e-9) ++j;
    CHECK(model.axes(k, j) > 0.0);
  }
  const auto proj = pca_transform(model, x);
  CHECK(proj.rows() == 30);
  CHECK(proj.cols() == 3);
  CHECK(proj.colwise().mean().cwiseAbs().maxCoeff() < 1e-9);
  for (Eigen::Index k = 0; k < 3; ++k) {
    CHECK(proj.col(k).squaredNorm() / 30.0 == doctest::Approx(model.explained_variance(k)));
  }
  CHECK_THROWS_AS(pca_transform(model, FeatureMatrix::Zero(2, 4)), Error);
}

TEST_CASE("a full orthonormal basis preserves distances") {
  std::mt19937_64 rng(8);
  const auto x = random_matrix(rng, 20, 6);
  const auto proj = pca_transform(pca_fit(x, 6), x);
  for (Eigen::Index a = 0; a < 20; ++a) {
    for (Eigen::Index b = a + 1; b < 20; ++b) {
      CHECK(std::abs((x.row(a) - x.row(b)).norm() - (proj.row(a) - proj.row(b)).norm()) < 1e-6);
    }
  }
}

TEST_CASE("PCA rank handling") {
  FeatureMatrix x(4, 3);
  x << 1, 2, 3, 2, 4, 6, 3, 6, 9, 4, 8, 12;  // rank 1 after centring
  CHECK(centered_rank(x) == 1);
  CHECK_NOTHROW(pca_fit(x, 1));
  CHECK_THROWS_AS(pca_fit(x, 2), Error);
  CHECK(pca_fit_clamped(x, 3).dims() == 1);
  CHECK(pca_fit_clamped(FeatureMatrix::Constant(5, 2, 1.0), 2).dims() == 0);
  CHECK_THROWS_AS(pca_fit(x, 0), Error);
  CHECK(default_pca_dims(1000, 5000) == 64);
  CHECK(default_pca_dims(10, 5000) == 10);
  CHECK(default_pca_dims(1000, 7) == 7);
}

TEST_CASE("flatten and spatial means") {
  const auto ds = fixtures::random_dataset(5, 2, 3, 4, 1);
  const std::vector<std::size_t> times{4, 1};
  const auto flat = flatten_samples(ds, times);
  CHECK(flat.rows() == 2);
  CHECK(flat.cols() == 24);
  CHECK(flat(0, 13) == ds.state(4)[13]);

  const auto w = area_weights(ds.grid());
  const auto sm = spatial_mean_features(ds, times, w);
  for (std::size_t v = 0; v < 2; ++v) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      const double wl = std::cos(ds.grid().lats[i] * std::numbers::pi / 180.0);
      for (std::size_t j = 0; j < 4; ++j) {
        num += wl * ds.at(1, v, i, j);
        den += wl;
      }
    }
    CHECK(sm(1, static_cast<Eigen::Index>(v)) == doctest::Approx(num / den));
  }
}

TEST_CASE("cosine distance") {
  Eigen::VectorXd a(2), b(2), c(2);
  a << 1, 0;
  b << 0, 3;
  c << -2, 0;
  CHECK(cosine_distance(a, a) == doctest::Approx(0.0));
  CHECK(cosine_distance(a, b) == doctest::Approx(1.0));
  CHECK(cosine_distance(a, c) == doctest::Approx(2.0));
  CHECK_THROWS_AS(cosine_distance(a, Eigen::VectorXd::Zero(2)), Error);
}
