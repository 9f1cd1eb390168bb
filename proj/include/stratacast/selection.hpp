#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stratacast/dataset.hpp"
#include "stratacast/features.hpp"
#include "stratacast/rng.hpp"

namespace stratacast {

enum class Strategy {
  full,
  random,
  stratified_time,
  kmeans,
  greedy_diverse,
  herding,
  spatial_stratified,
  stratified_kmeans,
  stratified_kmeanspp,
  stratified_entropy,
  stratified_spatial_diversity,
};

std::span<const Strategy> all_strategies();
std::string_view strategy_name(Strategy s);   // e.g. "stratified_time"
std::string_view strategy_label(Strategy s);  // e.g. "Stratified Time"
Strategy parse_strategy(std::string_view name);

struct SelectionBudget {
  double fraction = 0.2;

  /// round(fraction * n), validated to lie in [1, n].
  std::size_t target_count(std::size_t n) const;
};

struct SubsetSelection {
  std::string strategy;
  std::vector<std::size_t> indices;  // dataset time indices
  double fraction = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> excluded;  // candidates a strategy could not score

  nlohmann::json to_json() const;
  static SubsetSelection from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static SubsetSelection load(const std::filesystem::path& path);
};

struct SelectionOptions {
  bool flat_grid = false;        // uniform weights for spatial means
  std::size_t max_pca_dims = 64;
};

/// Dispatches to the strategy. `ds` should already be standardized.
SubsetSelection select(Strategy strategy, const GriddedDataset& ds, std::span<const std::size_t> candidates,
                       SelectionBudget budget, std::uint64_t seed, const SelectionOptions& opts = {});

SubsetSelection select_full(const GriddedDataset& ds, std::span<const std::size_t> candidates);
SubsetSelection select_random(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                              SelectionBudget budget, std::uint64_t seed);
SubsetSelection select_stratified_time(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                                       SelectionBudget budget, std::uint64_t seed);
SubsetSelection select_kmeans_coreset(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                                      SelectionBudget budget, std::uint64_t seed, const SelectionOptions& opts = {});
SubsetSelection select_greedy_diverse(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                                      SelectionBudget budget, std::uint64_t seed, const SelectionOptions& opts = {});
SubsetSelection select_herding(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                               SelectionBudget budget, std::uint64_t seed, const SelectionOptions& opts = {});
SubsetSelection select_spatial_stratified(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                                          SelectionBudget budget, std::uint64_t seed,
                                          const SelectionOptions& opts = {});
SubsetSelection select_stratified_kmeans(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                                         SelectionBudget budget, std::uint64_t seed, bool plusplus_init,
                                         const SelectionOptions& opts = {});
SubsetSelection select_stratified_entropy(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                                          SelectionBudget budget, std::uint64_t seed);
SubsetSelection select_stratified_spatial_diversity(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                                                    SelectionBudget budget, std::uint64_t seed,
                                                    const SelectionOptions& opts = {});

// Building blocks. Indices below are row positions in the feature matrix.

/// Quotas for `target` items over bins: equal shares, largest remainder with
/// ties to the lowest bin. Bins over capacity are capped and the rest of the
/// budget is re-shared among the open bins the same way. Throws when the bins
/// cannot hold `target` in total.
std::vector<std::size_t> allocate_quotas(std::span<const std::size_t> bin_sizes, std::size_t target);

/// Calendar month (0..11) of each candidate.
std::vector<std::size_t> month_bins(const GriddedDataset& ds, std::span<const std::size_t> candidates);

/// Quantile bin per score: edges at sorted positions floor(b n / n_bins).
std::vector<std::size_t> quantile_bins(std::span<const double> scores, std::size_t n_bins);

enum class KMeansInit { uniform, plusplus };

struct KMeansResult {
  Eigen::MatrixXd centroids;           // k x d
  std::vector<std::size_t> assignment;  // per row
  std::size_t iterations = 0;
};

/// Lloyd iterations (at most 100, or until every centroid moves < 1e-6).
/// Ties go to the lowest centroid; empty clusters are re-seeded at the point
/// farthest from its centroid.
KMeansResult kmeans(const FeatureMatrix& x, std::size_t k, KMeansInit init, Rng& rng);

/// Per non-empty cluster, in cluster order: the member nearest its centroid
/// (ties to the lowest row).
std::vector<std::size_t> nearest_to_centroids(const FeatureMatrix& x, const KMeansResult& km);

/// k distinct representative rows: nearest_to_centroids, topped up with the
/// unpicked rows farthest from their centroid if clusters ended empty.
std::vector<std::size_t> kmeans_coreset(const FeatureMatrix& x, std::size_t k, KMeansInit init, Rng& rng);

enum class Metric { euclidean, cosine };

/// Max-min greedy: starts at `first`, then repeatedly takes the row whose
/// distance to the chosen set is largest. Distances within a relative 1e-9
/// of each other count as ties, which go to the lowest row.
std::vector<std::size_t> greedy_maxmin(const FeatureMatrix& x, std::size_t k, Metric metric, std::size_t first);

/// greedy_maxmin under Euclidean distance, starting at the row farthest
/// from the feature mean.
std::vector<std::size_t> greedy_diverse_order(const FeatureMatrix& x, std::size_t k);

/// Linear-kernel herding without replacement: w0 = mean, pick argmax <w, x>,
/// then w += mean - x.
std::vector<std::size_t> herding_order(const FeatureMatrix& x, std::size_t k);

/// |x(t + 24 h) - x(t)| per candidate; -inf when t + 24 h is not in `ds`.
std::vector<double> persistence_scores(const GriddedDataset& ds, std::span<const std::size_t> candidates);

}  // namespace stratacast
