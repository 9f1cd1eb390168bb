#include "stratacast/selection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "stratacast/error.hpp"

namespace stratacast {

namespace {

constexpr std::size_t kMonths = 12;
constexpr std::size_t kSpatialBins = 12;
constexpr std::size_t kMaxIterations = 100;
constexpr double kShiftTolerance = 1e-6;

struct StrategyInfo {
  Strategy id;
  std::string_view name;
  std::string_view label;
};

constexpr std::array<StrategyInfo, 11> kStrategies{{
    {Strategy::full, "full", "Full Data"},
    {Strategy::random, "random", "Random"},
    {Strategy::stratified_time, "stratified_time", "Stratified Time"},
    {Strategy::kmeans, "kmeans", "KMeans"},
    {Strategy::greedy_diverse, "greedy_diverse", "Greedy Diverse"},
    {Strategy::herding, "herding", "Herding"},
    {Strategy::spatial_stratified, "spatial_stratified", "Spatial"},
    {Strategy::stratified_kmeans, "stratified_kmeans", "Stratified KMeans"},
    {Strategy::stratified_kmeanspp, "stratified_kmeanspp", "Stratified KMeans++"},
    {Strategy::stratified_entropy, "stratified_entropy", "Stratified Entropy"},
    {Strategy::stratified_spatial_diversity, "stratified_spatial_diversity", "Stratified Spatial Diversity"},
}};

const StrategyInfo& info(Strategy s) {
  for (const auto& i : kStrategies) {
    if (i.id == s) return i;
  }
  fail(ErrorKind::invalid_argument, "unknown strategy");
}

double sq_dist(const FeatureMatrix& x, Eigen::Index i, const Eigen::MatrixXd& c, Eigen::Index j) {
  return (x.row(i) - c.row(j)).squaredNorm();
}

// First `k` entries of a partial Fisher-Yates shuffle of `pool`.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(k);
  return pool;
}

void check_shared_pre(const GriddedDataset& ds, std::span<const std::size_t> candidates) {
  require(!candidates.empty(), ErrorKind::invalid_argument, "no candidate times to select from");
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    require(candidates[i] < ds.n_time(), ErrorKind::invalid_argument,
            fmt::format("candidate {} is not a dataset time index", candidates[i]));
    require(i == 0 || candidates[i] > candidates[i - 1], ErrorKind::invalid_argument,
            "candidates must be strictly increasing");
  }
}

SubsetSelection make_selection(Strategy s, std::vector<std::size_t> indices, SelectionBudget budget,
                               std::uint64_t seed) {
  SubsetSelection sel;
  sel.strategy = std::string(strategy_name(s));
  sel.indices = std::move(indices);
  sel.fraction = budget.fraction;
  sel.seed = seed;
  return sel;
}

std::vector<std::size_t> to_times(std::span<const std::size_t> candidates, std::span<const std::size_t> rows) {
  std::vector<std::size_t> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(candidates[r]);
  return out;
}

// Candidate rows grouped by bin, rows ascending inside each bin.
std::vector<std::vector<std::size_t>> group_rows(std::span<const std::size_t> bins, std::size_t n_bins) {
  std::vector<std::vector<std::size_t>> groups(n_bins);
  for (std::size_t r = 0; r < bins.size(); ++r) groups[bins[r]].push_back(r);
  return groups;
}

std::vector<std::size_t> group_quotas(const std::vector<std::vector<std::size_t>>& groups, std::size_t target) {
  std::vector<std::size_t> sizes;
  for (const auto& g : groups) sizes.push_back(g.size());
  return allocate_quotas(sizes, target);
}

// Stratified selection skeleton: quotas per bin, then `pick(rows, quota)`
// returns the chosen rows of that bin.
template <typename Pick>
std::vector<std::size_t> stratified_rows(std::span<const std::size_t> bins, std::size_t n_bins, std::size_t target,
                                         Pick&& pick) {
  const auto groups = group_rows(bins, n_bins);
  const auto quotas = group_quotas(groups, target);
  std::vector<std::size_t> rows;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (quotas[b] == 0) continue;
    auto chosen = pick(groups[b], quotas[b]);
    rows.insert(rows.end(), chosen.begin(), chosen.end());
  }
  return rows;
}

FeatureMatrix rows_of(const FeatureMatrix& x, std::span<const std::size_t> rows) {
  FeatureMatrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

FeatureMatrix pca_features(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                           const SelectionOptions& opts) {
  const auto flat = flatten_samples(ds, candidates);
  const auto dims = std::min(opts.max_pca_dims, default_pca_dims(candidates.size(), ds.state_size()));
  const auto model = pca_fit_clamped(flat, dims);
  return pca_transform(model, flat);
}

std::vector<std::size_t> sorted(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

std::span<const Strategy> all_strategies() {
  static const std::array<Strategy, 11> ids = [] {
    std::array<Strategy, 11> out{};
    for (std::size_t i = 0; i < kStrategies.size(); ++i) out[i] = kStrategies[i].id;
    return out;
  }();
  return ids;
}

std::string_view strategy_name(Strategy s) { return info(s).name; }
std::string_view strategy_label(Strategy s) { return info(s).label; }

Strategy parse_strategy(std::string_view name) {
  for (const auto& i : kStrategies) {
    if (i.name == name) return i.id;
  }
  fail(ErrorKind::invalid_argument, fmt::format("unknown strategy '{}'", name));
}

std::size_t SelectionBudget::target_count(std::size_t n) const {
  require(fraction > 0.0 && fraction <= 1.0, ErrorKind::invalid_argument,
          fmt::format("budget fraction {} outside (0, 1]", fraction));
  const auto count = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  require(count >= 1, ErrorKind::invalid_argument,
          fmt::format("budget {} of {} candidates selects nothing", fraction, n));
  require(count <= n, ErrorKind::invalid_argument, "budget exceeds the candidate count");
  return count;
}

nlohmann::json SubsetSelection::to_json() const {
  nlohmann::json j{{"strategy", strategy}, {"seed", seed}, {"fraction", fraction}, {"indices", indices}};
  if (!excluded.empty()) j["excluded"] = excluded;
  return j;
}

SubsetSelection SubsetSelection::from_json(const nlohmann::json& j) {
  SubsetSelection s;
  try {
    s.strategy = j.at("strategy").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.fraction = j.at("fraction").get<double>();
    s.indices = j.at("indices").get<std::vector<std::size_t>>();
    if (j.contains("excluded")) s.excluded = j["excluded"].get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::io, fmt::format("bad selection JSON: {}", e.what()));
  }
  return s;
}

void SubsetSelection::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::io, fmt::format("cannot write '{}'", path.string()));
  out << to_json().dump() << '\n';
}

SubsetSelection SubsetSelection::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, fmt::format("cannot open '{}'", path.string()));
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::io, fmt::format("bad selection file '{}': {}", path.string(), e.what()));
  }
}

std::vector<std::size_t> allocate_quotas(std::span<const std::size_t> bin_sizes, std::size_t target) {
  const std::size_t total = std::accumulate(bin_sizes.begin(), bin_sizes.end(), std::size_t{0});
  require(total >= target, ErrorKind::data,
          fmt::format("bins hold {} candidates but the budget needs {}", total, target));
  std::vector<std::size_t> quota(bin_sizes.size(), 0);
  std::vector<bool> open(bin_sizes.size(), true);
  std::size_t remaining = target;
  for (bool capped = true; capped && remaining > 0;) {
    std::vector<std::size_t> live;
    for (std::size_t b = 0; b < open.size(); ++b) {
      if (open[b]) live.push_back(b);
    }
    // Equal shares leave equal remainders, so the extra units go to the lowest bins.
    const auto base = remaining / live.size();
    const auto extra = remaining % live.size();
    capped = false;
    for (std::size_t i = 0; i < live.size(); ++i) {
      const auto b = live[i];
      quota[b] = base + (i < extra ? 1 : 0);
      if (quota[b] > bin_sizes[b]) {
        quota[b] = bin_sizes[b];
        open[b] = false;
        remaining -= bin_sizes[b];
        capped = true;
      }
    }
  }
  return quota;
}

std::vector<std::size_t> month_bins(const GriddedDataset& ds, std::span<const std::size_t> candidates) {
  std::vector<std::size_t> bins;
  bins.reserve(candidates.size());
  for (auto t : candidates) bins.push_back(calendar_of(ds.timestamps()[t]).month - 1);
  return bins;
}

std::vector<std::size_t> quantile_bins(std::span<const double> scores, std::size_t n_bins) {
  require(n_bins >= 1, ErrorKind::invalid_argument, "need at least one bin");
  std::vector<double> sorted_scores(scores.begin(), scores.end());
  std::sort(sorted_scores.begin(), sorted_scores.end());
  std::vector<double> edges;
  const auto n = scores.size();
  for (std::size_t b = 1; b < n_bins; ++b) edges.push_back(sorted_scores[b * n / n_bins]);
  std::vector<std::size_t> out;
  out.reserve(n);
  for (double s : scores) {
    out.push_back(static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), s) - edges.begin()));
  }
  return out;
}

KMeansResult kmeans(const FeatureMatrix& x, std::size_t k, KMeansInit init, Rng& rng) {
  const auto n = static_cast<std::size_t>(x.rows());
  require(k >= 1 && k <= n, ErrorKind::invalid_argument, fmt::format("k = {} clusters for {} points", k, n));
  const auto ki = static_cast<Eigen::Index>(k);

  KMeansResult km;
  km.centroids.resize(ki, x.cols());
  std::vector<std::size_t> seeds;
  if (init == KMeansInit::uniform) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    seeds = sample_without_replacement(std::move(all), k, rng);
  } else {
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    seeds.push_back(first(rng));
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    std::vector<bool> taken(n, false);
    taken[seeds[0]] = true;
    while (seeds.size() < k) {
      const auto last = static_cast<Eigen::Index>(seeds.back());
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        d2[i] = std::min(d2[i], (x.row(static_cast<Eigen::Index>(i)) - x.row(last)).squaredNorm());
        if (!taken[i]) total += d2[i];
      }
      std::size_t next = n;
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng);
        for (std::size_t i = 0; i < n; ++i) {
          if (taken[i] || d2[i] <= 0.0) continue;
          next = i;
          target -= d2[i];
          if (target < 0.0) break;
        }
      } else {
        // Only duplicates of existing seeds remain.
        for (std::size_t i = 0; i < n && next == n; ++i) {
          if (!taken[i]) next = i;
        }
      }
      taken[next] = true;
      seeds.push_back(next);
    }
  }
  for (Eigen::Index j = 0; j < ki; ++j) km.centroids.row(j) = x.row(static_cast<Eigen::Index>(seeds[static_cast<std::size_t>(j)]));

  km.assignment.assign(n, 0);
  std::vector<double> dist(n, 0.0);
  const auto assign = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      std::size_t best = 0;
      double best_d = sq_dist(x, ii, km.centroids, 0);
      for (Eigen::Index j = 1; j < ki; ++j) {
        const double d = sq_dist(x, ii, km.centroids, j);
        if (d < best_d) {
          best_d = d;
          best = static_cast<std::size_t>(j);
        }
      }
      km.assignment[i] = best;
      dist[i] = best_d;
    }
  };

  for (km.iterations = 1; km.iterations <= kMaxIterations; ++km.iterations) {
    assign();
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(ki, x.cols());
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums.row(static_cast<Eigen::Index>(km.assignment[i])) += x.row(static_cast<Eigen::Index>(i));
      ++counts[km.assignment[i]];
    }
    std::vector<bool> reseeded(n, false);
    double max_shift = 0.0;
    for (Eigen::Index j = 0; j < ki; ++j) {
      Eigen::RowVectorXd next;
      if (counts[static_cast<std::size_t>(j)] > 0) {
        next = sums.row(j) / static_cast<double>(counts[static_cast<std::size_t>(j)]);
      } else {
        std::size_t far = n;
        for (std::size_t i = 0; i < n; ++i) {
          if (!reseeded[i] && (far == n || dist[i] > dist[far])) far = i;
        }
        reseeded[far] = true;
        next = x.row(static_cast<Eigen::Index>(far));
        max_shift = std::numeric_limits<double>::infinity();
      }
      max_shift = std::max(max_shift, (next - km.centroids.row(j)).norm());
      km.centroids.row(j) = next;
    }
    if (max_shift < kShiftTolerance) break;
  }
  km.iterations = std::min(km.iterations, kMaxIterations);
  assign();
  return km;
}

std::vector<std::size_t> nearest_to_centroids(const FeatureMatrix& x, const KMeansResult& km) {
  const auto k = static_cast<std::size_t>(km.centroids.rows());
  const auto none = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> best(k, none);
  std::vector<double> best_d(k, 0.0);
  for (std::size_t i = 0; i < km.assignment.size(); ++i) {
    const auto c = km.assignment[i];
    const double d = sq_dist(x, static_cast<Eigen::Index>(i), km.centroids, static_cast<Eigen::Index>(c));
    // Members equidistant up to rounding keep the lowest index.
    if (best[c] == none || d < best_d[c] * (1.0 - 1e-9)) {
      best[c] = i;
      best_d[c] = d;
    }
  }
  std::vector<std::size_t> out;
  for (auto b : best) {
    if (b != none) out.push_back(b);
  }
  return out;
}

std::vector<std::size_t> kmeans_coreset(const FeatureMatrix& x, std::size_t k, KMeansInit init, Rng& rng) {
  const auto km = kmeans(x, k, init, rng);
  auto picks = nearest_to_centroids(x, km);
  if (picks.size() < k) {
    const auto n = static_cast<std::size_t>(x.rows());
    std::vector<bool> used(n, false);
    for (auto p : picks) used[p] = true;
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = sq_dist(x, static_cast<Eigen::Index>(i), km.centroids, static_cast<Eigen::Index>(km.assignment[i]));
    }
    while (picks.size() < k) {
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (!used[i] && (far == n || d[i] > d[far])) far = i;
      }
      used[far] = true;
      picks.push_back(far);
    }
  }
  return picks;
}

std::vector<std::size_t> greedy_maxmin(const FeatureMatrix& x, std::size_t k, Metric metric, std::size_t first) {
  const auto n = static_cast<std::size_t>(x.rows());
  require(k >= 1 && k <= n && first < n, ErrorKind::invalid_argument, "greedy_maxmin: bad k or start row");
  const auto distance = [&](std::size_t a, std::size_t b) {
    const Eigen::VectorXd va = x.row(static_cast<Eigen::Index>(a)).transpose();
    const Eigen::VectorXd vb = x.row(static_cast<Eigen::Index>(b)).transpose();
    return metric == Metric::euclidean ? (va - vb).norm() : cosine_distance(va, vb);
  };
  std::vector<std::size_t> picks{first};
  std::vector<bool> chosen(n, false);
  chosen[first] = true;
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  while (picks.size() < k) {
    const auto last = picks.back();
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      min_d[i] = std::min(min_d[i], distance(i, last));
      // Scores equal up to rounding keep the lowest index.
      if (best == n || min_d[i] > min_d[best] + 1e-9 * std::max(1.0, min_d[best])) best = i;
    }
    chosen[best] = true;
    picks.push_back(best);
  }
  return picks;
}

std::vector<std::size_t> greedy_diverse_order(const FeatureMatrix& x, std::size_t k) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  std::size_t first = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double d = (x.row(i) - mean).norm();
    if (d > best) {
      best = d;
      first = static_cast<std::size_t>(i);
    }
  }
  return greedy_maxmin(x, k, Metric::euclidean, first);
}

std::vector<std::size_t> herding_order(const FeatureMatrix& x, std::size_t k) {
  const auto n = static_cast<std::size_t>(x.rows());
  require(k >= 1 && k <= n, ErrorKind::invalid_argument, "herding: bad k");
  const Eigen::RowVectorXd mu = x.colwise().mean();
  Eigen::RowVectorXd w = mu;
  std::vector<bool> chosen(n, false);
  std::vector<std::size_t> picks;
  while (picks.size() < k) {
    std::size_t best = n;
    double best_score = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      const double s = w.dot(x.row(static_cast<Eigen::Index>(i)));
      if (best == n || s > best_score) {
        best = i;
        best_score = s;
      }
    }
    chosen[best] = true;
    picks.push_back(best);
    w += mu - x.row(static_cast<Eigen::Index>(best));
  }
  return picks;
}

std::vector<double> persistence_scores(const GriddedDataset& ds, std::span<const std::size_t> candidates) {
  std::vector<double> out;
  out.reserve(candidates.size());
  for (auto t : candidates) {
    const auto next = ds.time_index(ds.timestamps()[t] + 24);
    if (!next) {
      out.push_back(-std::numeric_limits<double>::infinity());
      continue;
    }
    const auto a = ds.state(t);
    const auto b = ds.state(*next);
    double ss = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double d = static_cast<double>(b[k]) - static_cast<double>(a[k]);
      ss += d * d;
    }
    out.push_back(std::sqrt(ss));
  }
  return out;
}

SubsetSelection select_full(const GriddedDataset& ds, std::span<const std::size_t> candidates) {
  check_shared_pre(ds, candidates);
  return make_selection(Strategy::full, {candidates.begin(), candidates.end()}, {1.0}, 0);
}

SubsetSelection select_random(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                              SelectionBudget budget, std::uint64_t seed) {
  check_shared_pre(ds, candidates);
  const auto k = budget.target_count(candidates.size());
  Rng rng(seed);
  auto picks = sample_without_replacement({candidates.begin(), candidates.end()}, k, rng);
  return make_selection(Strategy::random, sorted(std::move(picks)), budget, seed);
}

SubsetSelection select_stratified_time(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                                       SelectionBudget budget, std::uint64_t seed) {
  check_shared_pre(ds, candidates);
  const auto k = budget.target_count(candidates.size());
  Rng rng(seed);
  const auto rows = stratified_rows(month_bins(ds, candidates), kMonths, k,
                                    [&](const std::vector<std::size_t>& members, std::size_t quota) {
                                      return sample_without_replacement(members, quota, rng);
                                    });
  return make_selection(Strategy::stratified_time, sorted(to_times(candidates, rows)), budget, seed);
}

SubsetSelection select_kmeans_coreset(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                                      SelectionBudget budget, std::uint64_t seed, const SelectionOptions& opts) {
  check_shared_pre(ds, candidates);
  const auto k = budget.target_count(candidates.size());
  Rng rng(seed);
  const auto rows = kmeans_coreset(pca_features(ds, candidates, opts), k, KMeansInit::plusplus, rng);
  return make_selection(Strategy::kmeans, sorted(to_times(candidates, rows)), budget, seed);
}

SubsetSelection select_greedy_diverse(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                                      SelectionBudget budget, std::uint64_t seed, const SelectionOptions& opts) {
  check_shared_pre(ds, candidates);
  const auto k = budget.target_count(candidates.size());
  const auto features = spatial_mean_features(ds, candidates, area_weights(ds.grid(), opts.flat_grid));
  return make_selection(Strategy::greedy_diverse, to_times(candidates, greedy_diverse_order(features, k)), budget,
                        seed);
}

SubsetSelection select_herding(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                               SelectionBudget budget, std::uint64_t seed, const SelectionOptions& opts) {
  check_shared_pre(ds, candidates);
  const auto k = budget.target_count(candidates.size());
  return make_selection(Strategy::herding, to_times(candidates, herding_order(pca_features(ds, candidates, opts), k)),
                        budget, seed);
}

SubsetSelection select_spatial_stratified(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                                          SelectionBudget budget, std::uint64_t seed,
                                          const SelectionOptions& opts) {
  check_shared_pre(ds, candidates);
  const auto k = budget.target_count(candidates.size());
  const auto features = spatial_mean_features(ds, candidates, area_weights(ds.grid(), opts.flat_grid));
  std::vector<double> scores(candidates.size(), 0.0);
  const auto model = pca_fit_clamped(features, 1);
  if (model.dims() == 1) {
    const auto proj = pca_transform(model, features);
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = proj(static_cast<Eigen::Index>(i), 0);
  }
  Rng rng(seed);
  const auto rows = stratified_rows(quantile_bins(scores, kSpatialBins), kSpatialBins, k,
                                    [&](const std::vector<std::size_t>& members, std::size_t quota) {
                                      return sample_without_replacement(members, quota, rng);
                                    });
  return make_selection(Strategy::spatial_stratified, sorted(to_times(candidates, rows)), budget, seed);
}

SubsetSelection select_stratified_kmeans(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                                         SelectionBudget budget, std::uint64_t seed, bool plusplus_init,
                                         const SelectionOptions& opts) {
  check_shared_pre(ds, candidates);
  const auto k = budget.target_count(candidates.size());
  const auto features = spatial_mean_features(ds, candidates, area_weights(ds.grid(), opts.flat_grid));
  Rng rng(seed);
  const auto init = plusplus_init ? KMeansInit::plusplus : KMeansInit::uniform;
  const auto rows = stratified_rows(month_bins(ds, candidates), kMonths, k,
                                    [&](const std::vector<std::size_t>& members, std::size_t quota) {
                                      const auto local = kmeans_coreset(rows_of(features, members), quota, init, rng);
                                      return to_times(members, local);
                                    });
  return make_selection(plusplus_init ? Strategy::stratified_kmeanspp : Strategy::stratified_kmeans,
                        sorted(to_times(candidates, rows)), budget, seed);
}

SubsetSelection select_stratified_entropy(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                                          SelectionBudget budget, std::uint64_t seed) {
  check_shared_pre(ds, candidates);
  const auto k = budget.target_count(candidates.size());
  const auto scores = persistence_scores(ds, candidates);
  const auto rows = stratified_rows(month_bins(ds, candidates), kMonths, k,
                                    [&](std::vector<std::size_t> members, std::size_t quota) {
                                      std::stable_sort(members.begin(), members.end(), [&](auto a, auto b) {
                                        return scores[a] > scores[b];
                                      });
                                      members.resize(quota);
                                      return members;
                                    });
  return make_selection(Strategy::stratified_entropy, sorted(to_times(candidates, rows)), budget, seed);
}

SubsetSelection select_stratified_spatial_diversity(const GriddedDataset& ds, std::span<const std::size_t> candidates,
                                                    SelectionBudget budget, std::uint64_t seed,
                                                    const SelectionOptions& opts) {
  check_shared_pre(ds, candidates);
  const auto k = budget.target_count(candidates.size());
  const auto all_features = spatial_mean_features(ds, candidates, area_weights(ds.grid(), opts.flat_grid));

  // Zero spatial-mean vectors have no direction and cannot enter cosine selection.
  std::vector<std::size_t> usable, excluded;
  for (std::size_t r = 0; r < candidates.size(); ++r) {
    (all_features.row(static_cast<Eigen::Index>(r)).norm() > 0.0 ? usable : excluded).push_back(candidates[r]);
  }
  require(!usable.empty(), ErrorKind::data, "every candidate has a zero spatial-mean vector");
  const auto features = spatial_mean_features(ds, usable, area_weights(ds.grid(), opts.flat_grid));
  const auto rows = stratified_rows(month_bins(ds, usable), kMonths, k,
                                    [&](const std::vector<std::size_t>& members, std::size_t quota) {
                                      const auto local = greedy_maxmin(rows_of(features, members), quota,
                                                                       Metric::cosine, 0);
                                      return to_times(members, local);
                                    });
  auto sel = make_selection(Strategy::stratified_spatial_diversity, sorted(to_times(usable, rows)), budget, seed);
  sel.excluded = std::move(excluded);
  return sel;
}

SubsetSelection select(Strategy strategy, const GriddedDataset& ds, std::span<const std::size_t> candidates,
                       SelectionBudget budget, std::uint64_t seed, const SelectionOptions& opts) {
  switch (strategy) {
    case Strategy::full: {
      auto sel = select_full(ds, candidates);
      sel.seed = seed;
      return sel;
    }
    case Strategy::random:
      return select_random(ds, candidates, budget, seed);
    case Strategy::stratified_time:
      return select_stratified_time(ds, candidates, budget, seed);
    case Strategy::kmeans:
      return select_kmeans_coreset(ds, candidates, budget, seed, opts);
    case Strategy::greedy_diverse:
      return select_greedy_diverse(ds, candidates, budget, seed, opts);
    case Strategy::herding:
      return select_herding(ds, candidates, budget, seed, opts);
    case Strategy::spatial_stratified:
      return select_spatial_stratified(ds, candidates, budget, seed, opts);
    case Strategy::stratified_kmeans:
      return select_stratified_kmeans(ds, candidates, budget, seed, false, opts);
    case Strategy::stratified_kmeanspp:
      return select_stratified_kmeans(ds, candidates, budget, seed, true, opts);
    case Strategy::stratified_entropy:
      return select_stratified_entropy(ds, candidates, budget, seed);
    case Strategy::stratified_spatial_diversity:
      return select_stratified_spatial_diversity(ds, candidates, budget, seed, opts);
  }
  fail(ErrorKind::invalid_argument, "unknown strategy");
}

}  // namespace stratacast
