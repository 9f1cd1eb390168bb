#pragma once

#include <cstddef>
#include <span>

#include <Eigen/Dense>

#include "stratacast/dataset.hpp"
#include "stratacast/metrics.hpp"

namespace stratacast {

// N samples x D features.
using FeatureMatrix = Eigen::MatrixXd;

struct PcaModel {
  Eigen::VectorXd center;              // D
  Eigen::MatrixXd axes;                // M_pca x D, orthonormal rows
  Eigen::VectorXd explained_variance;  // M_pca, non-increasing

  std::size_t dims() const { return static_cast<std::size_t>(axes.rows()); }
  std::size_t input_dims() const { return static_cast<std::size_t>(center.size()); }
};

/// Row i is the full state at times[i], variable-major then [lat][lon].
FeatureMatrix flatten_samples(const GriddedDataset& ds, std::span<const std::size_t> times);

/// Number of singular values of the centred matrix above 1e-10 of the largest.
std::size_t centered_rank(const FeatureMatrix& x);

/// Top-m principal axes via SVD of the centred matrix. Each axis is signed so
/// its first nonzero component is positive. Throws when m exceeds the rank.
PcaModel pca_fit(const FeatureMatrix& x, std::size_t m);

/// As pca_fit with m clamped to the numerical rank (possibly 0 axes).
PcaModel pca_fit_clamped(const FeatureMatrix& x, std::size_t max_m);

FeatureMatrix pca_transform(const PcaModel& model, const FeatureMatrix& x);

/// Default reduced dimension min(64, N, D).
std::size_t default_pca_dims(std::size_t n, std::size_t d);

/// Per-variable area-weighted spatial mean of the state at t.
Eigen::VectorXd spatial_mean_vector(const GriddedDataset& ds, std::size_t t, const AreaWeights& w);
/// One spatial_mean_vector row per time.
FeatureMatrix spatial_mean_features(const GriddedDataset& ds, std::span<const std::size_t> times,
                                    const AreaWeights& w);

/// 1 - a.b / (|a| |b|), in [0, 2]. Throws for zero vectors.
double cosine_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace stratacast
