#include "stratacast/features.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "stratacast/error.hpp"

namespace stratacast {

namespace {

constexpr double kRankTolerance = 1e-10;

struct CenteredSvd {
  Eigen::VectorXd center;
  Eigen::VectorXd singular;
  Eigen::MatrixXd v;  // D x r
};

CenteredSvd centered_svd(const FeatureMatrix& x) {
  require(x.rows() >= 1 && x.cols() >= 1, ErrorKind::invalid_argument, "feature matrix must be non-empty");
  require(x.allFinite(), ErrorKind::data, "feature matrix contains non-finite values");
  CenteredSvd out;
  out.center = x.colwise().mean().transpose();
  const Eigen::MatrixXd centered = x.rowwise() - out.center.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  out.singular = svd.singularValues();
  out.v = svd.matrixV();
  return out;
}

std::size_t rank_of(const Eigen::VectorXd& singular) {
  if (singular.size() == 0 || singular(0) <= 0.0) return 0;
  const double cutoff = kRankTolerance * singular(0);
  std::size_t r = 0;
  while (r < static_cast<std::size_t>(singular.size()) && singular(static_cast<Eigen::Index>(r)) > cutoff) ++r;
  return r;
}

PcaModel build_model(const CenteredSvd& svd, std::size_t m, std::size_t n_rows) {
  PcaModel model;
  model.center = svd.center;
  const auto d = svd.center.size();
  const auto mi = static_cast<Eigen::Index>(m);
  model.axes.resize(mi, d);
  model.explained_variance.resize(mi);
  for (Eigen::Index k = 0; k < mi; ++k) {
    Eigen::RowVectorXd axis = svd.v.col(k).transpose();
    const double scale = axis.cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < d; ++j) {
      if (std::abs(axis(j)) > 1e-9 * scale) {
        if (axis(j) < 0.0) axis = -axis;
        break;
      }
    }
    model.axes.row(k) = axis;
    model.explained_variance(k) = svd.singular(k) * svd.singular(k) / static_cast<double>(n_rows);
  }
  return model;
}

}  // namespace

FeatureMatrix flatten_samples(const GriddedDataset& ds, std::span<const std::size_t> times) {
  require(!times.empty(), ErrorKind::invalid_argument, "flatten_samples: no times");
  FeatureMatrix x(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(ds.state_size()));
  for (std::size_t i = 0; i < times.size(); ++i) {
    require(times[i] < ds.n_time(), ErrorKind::invalid_argument, fmt::format("time index {} out of range", times[i]));
    const auto s = ds.state(times[i]);
    for (std::size_t k = 0; k < s.size(); ++k) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = s[k];
    }
  }
  return x;
}

std::size_t centered_rank(const FeatureMatrix& x) { return rank_of(centered_svd(x).singular); }

PcaModel pca_fit(const FeatureMatrix& x, std::size_t m) {
  const auto limit = static_cast<std::size_t>(std::min(x.rows(), x.cols()));
  require(m >= 1 && m <= limit, ErrorKind::invalid_argument,
          fmt::format("PCA dimension {} outside [1, {}]", m, limit));
  const auto svd = centered_svd(x);
  const auto rank = rank_of(svd.singular);
  require(m <= rank, ErrorKind::numeric, fmt::format("PCA dimension {} exceeds the data rank {}", m, rank));
  return build_model(svd, m, static_cast<std::size_t>(x.rows()));
}

PcaModel pca_fit_clamped(const FeatureMatrix& x, std::size_t max_m) {
  const auto svd = centered_svd(x);
  const auto m = std::min({max_m, rank_of(svd.singular), static_cast<std::size_t>(std::min(x.rows(), x.cols()))});
  return build_model(svd, m, static_cast<std::size_t>(x.rows()));
}

FeatureMatrix pca_transform(const PcaModel& model, const FeatureMatrix& x) {
  require(x.cols() == model.center.size(), ErrorKind::invalid_argument,
          fmt::format("PCA expects {} columns, got {}", model.center.size(), x.cols()));
  return (x.rowwise() - model.center.transpose()) * model.axes.transpose();
}

std::size_t default_pca_dims(std::size_t n, std::size_t d) { return std::min<std::size_t>({64, n, d}); }

Eigen::VectorXd spatial_mean_vector(const GriddedDataset& ds, std::size_t t, const AreaWeights& w) {
  require(t < ds.n_time(), ErrorKind::invalid_argument, fmt::format("time index {} out of range", t));
  require(w.n_cells() == ds.n_cells(), ErrorKind::invalid_argument, "weights do not match the grid");
  Eigen::VectorXd out(static_cast<Eigen::Index>(ds.n_var()));
  for (std::size_t v = 0; v < ds.n_var(); ++v) {
    const auto f = ds.field(t, v);
    double sum = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) sum += w.at(k) * f[k];
    out(static_cast<Eigen::Index>(v)) = sum / static_cast<double>(f.size());
  }
  return out;
}

FeatureMatrix spatial_mean_features(const GriddedDataset& ds, std::span<const std::size_t> times,
                                    const AreaWeights& w) {
  FeatureMatrix x(static_cast<Eigen::Index>(times.size()), static_cast<Eigen::Index>(ds.n_var()));
  for (std::size_t i = 0; i < times.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = spatial_mean_vector(ds, times[i], w).transpose();
  }
  return x;
}

double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  require(a.size() == b.size(), ErrorKind::invalid_argument, "cosine_distance: length mismatch");
  const double na = a.norm(), nb = b.norm();
  require(na > 0.0 && nb > 0.0, ErrorKind::invalid_argument, "cosine_distance of a zero vector");
  const double cos = std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
  return 1.0 - cos;
}

}  // namespace stratacast
