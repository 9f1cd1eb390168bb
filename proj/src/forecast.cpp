#include "stratacast/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "binary_io.hpp"
#include "stratacast/diffusion.hpp"
#include "stratacast/error.hpp"
#include "stratacast/selection.hpp"

namespace stratacast {

namespace {

using json = nlohmann::json;

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::io, fmt::format("cannot open '{}'", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::io, fmt::format("bad JSON in '{}': {}", path.string(), e.what()));
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::io, fmt::format("cannot write '{}'", path.string()));
  out << j.dump(1) << '\n';
}

class PersistenceForecaster final : public Forecaster {
 public:
  explicit PersistenceForecaster(std::size_t state_size) : state_size_(state_size) {}

  ForecasterKind kind() const override { return ForecasterKind::persistence; }
  std::size_t state_size() const override { return state_size_; }

  void step(std::span<const float> state, HourStamp, Rng&, std::span<float> next) const override {
    std::copy(state.begin(), state.end(), next.begin());
  }

  void save(const std::filesystem::path& path) const override {
    write_json(path, {{"kind", "persistence"}, {"state_size", state_size_}});
  }

 private:
  std::size_t state_size_;
};

class ClimatologyForecaster final : public Forecaster {
 public:
  ClimatologyForecaster(std::size_t state_size, std::vector<double> monthly)
      : state_size_(state_size), monthly_(std::move(monthly)) {
    require(monthly_.size() == 12 * state_size_, ErrorKind::invalid_argument, "climatology needs 12 monthly fields");
  }

  ForecasterKind kind() const override { return ForecasterKind::climatology; }
  std::size_t state_size() const override { return state_size_; }

  void step(std::span<const float>, HourStamp valid_time, Rng&, std::span<float> next) const override {
    const auto month = calendar_of(valid_time).month - 1;
    for (std::size_t k = 0; k < state_size_; ++k) next[k] = static_cast<float>(monthly_[month * state_size_ + k]);
  }

  void save(const std::filesystem::path& path) const override {
    write_json(path, {{"kind", "climatology"}, {"state_size", state_size_}, {"monthly_mean", monthly_}});
  }

 private:
  std::size_t state_size_;
  std::vector<double> monthly_;  // [month][state]
};

ForecasterPtr climatology_from_times(const GriddedDataset& ds, std::span<const std::size_t> times) {
  const auto n = ds.state_size();
  std::vector<double> sums(12 * n, 0.0);
  std::vector<std::size_t> counts(12, 0);
  for (auto t : times) {
    const auto month = calendar_of(ds.timestamps()[t]).month - 1;
    const auto s = ds.state(t);
    for (std::size_t k = 0; k < n; ++k) sums[month * n + k] += s[k];
    ++counts[month];
  }
  for (std::size_t m = 0; m < 12; ++m) {
    require(counts[m] > 0, ErrorKind::data, fmt::format("no training samples for month {}", m + 1));
    for (std::size_t k = 0; k < n; ++k) sums[m * n + k] /= static_cast<double>(counts[m]);
  }
  return std::make_shared<ClimatologyForecaster>(n, std::move(sums));
}

// Copy of the training years only, so that fitting cannot see other splits.
GriddedDataset training_view(const GriddedDataset& ds, const YearRange& years, std::size_t& offset) {
  const auto [begin, end] = ds.year_span(years);
  require(end > begin, ErrorKind::data, "training split holds no timestamps");
  offset = begin;
  const auto n = ds.state_size();
  std::vector<float> data(ds.data().begin() + static_cast<std::ptrdiff_t>(begin * n),
                          ds.data().begin() + static_cast<std::ptrdiff_t>(end * n));
  std::vector<HourStamp> stamps(ds.timestamps().begin() + static_cast<std::ptrdiff_t>(begin),
                                ds.timestamps().begin() + static_cast<std::ptrdiff_t>(end));
  return GriddedDataset(ds.grid(), ds.variables(), std::move(stamps), std::move(data), ds.static_fields());
}

std::shared_ptr<StochasticLinearForecaster> fit_stochastic_linear(const GriddedDataset& view,
                                                                  std::span<const std::pair<std::size_t, std::size_t>> pairs,
                                                                  double lambda) {
  const auto n = view.state_size();
  const auto count = static_cast<double>(pairs.size());
  std::vector<double> slope(n), intercept(n), resid(n);
  for (std::size_t k = 0; k < n; ++k) {
    double mx = 0.0, my = 0.0;
    for (const auto& [a, b] : pairs) {
      mx += view.data()[a * n + k];
      my += view.data()[b * n + k];
    }
    mx /= count;
    my /= count;
    double sxx = 0.0, sxy = 0.0;
    for (const auto& [a, b] : pairs) {
      const double dx = view.data()[a * n + k] - mx;
      sxx += dx * dx;
      sxy += dx * (view.data()[b * n + k] - my);
    }
    const double sl = (sxx + lambda) > 0.0 ? sxy / (sxx + lambda) : 0.0;
    const double ic = my - sl * mx;
    double ss = 0.0;
    for (const auto& [a, b] : pairs) {
      const double r = view.data()[b * n + k] - (sl * view.data()[a * n + k] + ic);
      ss += r * r;
    }
    slope[k] = sl;
    intercept[k] = ic;
    resid[k] = std::sqrt(ss / count);
  }
  return std::make_shared<StochasticLinearForecaster>(view.n_var(), view.n_cells(), std::move(slope),
                                                      std::move(intercept), std::move(resid));
}

}  // namespace

std::string_view forecaster_kind_name(ForecasterKind kind) {
  switch (kind) {
    case ForecasterKind::persistence:
      return "persistence";
    case ForecasterKind::climatology:
      return "climatology";
    case ForecasterKind::stochastic_linear:
      return "stochastic_linear";
    case ForecasterKind::toy_diffusion:
      return "toy_diffusion";
  }
  return "?";
}

ForecasterKind parse_forecaster_kind(std::string_view name) {
  for (auto k : {ForecasterKind::persistence, ForecasterKind::climatology, ForecasterKind::stochastic_linear,
                 ForecasterKind::toy_diffusion}) {
    if (forecaster_kind_name(k) == name) return k;
  }
  fail(ErrorKind::invalid_argument, fmt::format("unknown forecaster kind '{}'", name));
}

void ForecasterSpec::validate() const {
  require(ridge_lambda >= 0.0 && std::isfinite(ridge_lambda), ErrorKind::invalid_argument,
          "ridge_lambda must be non-negative");
  if (kind != ForecasterKind::toy_diffusion) return;
  const auto& d = diffusion;
  require(d.n_noise_levels >= 2 && d.n_sample_steps >= 1 && d.n_sample_steps <= d.n_noise_levels,
          ErrorKind::invalid_argument, "need n_noise_levels >= 2 and 1 <= n_sample_steps <= n_noise_levels");
  require(d.hidden_width >= 1 && d.n_epochs >= 1 && d.batch_size >= 1, ErrorKind::invalid_argument,
          "hidden_width, n_epochs and batch_size must be positive");
  require(d.learning_rate > 0.0, ErrorKind::invalid_argument, "learning_rate must be positive");
  require(d.sigma_min > 0.0 && d.sigma_max > d.sigma_min, ErrorKind::invalid_argument,
          "need 0 < sigma_min < sigma_max");
}

ForecasterSpec ForecasterSpec::from_json(const json& j) {
  ForecasterSpec s;
  try {
    s.kind = parse_forecaster_kind(j.at("kind").get<std::string>());
    s.ridge_lambda = j.value("ridge_lambda", s.ridge_lambda);
    auto& d = s.diffusion;
    d.n_noise_levels = j.value("n_noise_levels", d.n_noise_levels);
    d.n_sample_steps = j.value("n_sample_steps", d.n_sample_steps);
    d.hidden_width = j.value("hidden_width", d.hidden_width);
    d.learning_rate = j.value("learning_rate", d.learning_rate);
    d.n_epochs = j.value("n_epochs", d.n_epochs);
    d.batch_size = j.value("batch_size", d.batch_size);
    d.sigma_min = j.value("sigma_min", d.sigma_min);
    d.sigma_max = j.value("sigma_max", d.sigma_max);
  } catch (const json::exception& e) {
    fail(ErrorKind::invalid_argument, fmt::format("bad forecaster spec: {}", e.what()));
  }
  s.validate();
  return s;
}

json ForecasterSpec::to_json() const {
  const auto& d = diffusion;
  return {{"kind", forecaster_kind_name(kind)},   {"ridge_lambda", ridge_lambda},
          {"n_noise_levels", d.n_noise_levels},   {"n_sample_steps", d.n_sample_steps},
          {"hidden_width", d.hidden_width},       {"learning_rate", d.learning_rate},
          {"n_epochs", d.n_epochs},               {"batch_size", d.batch_size},
          {"sigma_min", d.sigma_min},             {"sigma_max", d.sigma_max}};
}

StochasticLinearForecaster::StochasticLinearForecaster(std::size_t n_var, std::size_t n_cells,
                                                       std::vector<double> slope, std::vector<double> intercept,
                                                       std::vector<double> residual_std)
    : n_var_(n_var),
      n_cells_(n_cells),
      slope_(std::move(slope)),
      intercept_(std::move(intercept)),
      residual_std_(std::move(residual_std)) {
  const auto n = n_var_ * n_cells_;
  require(slope_.size() == n && intercept_.size() == n && residual_std_.size() == n, ErrorKind::invalid_argument,
          "stochastic_linear coefficient arrays disagree with the state shape");
}

void StochasticLinearForecaster::step(std::span<const float> state, HourStamp, Rng& rng, std::span<float> next) const {
  std::normal_distribution<double> normal;
  for (std::size_t k = 0; k < slope_.size(); ++k) {
    next[k] = static_cast<float>(slope_[k] * state[k] + intercept_[k] + residual_std_[k] * normal(rng));
  }
}

void StochasticLinearForecaster::save(const std::filesystem::path& path) const {
  write_json(path, {{"kind", "stochastic_linear"},
                    {"n_var", n_var_},
                    {"n_cells", n_cells_},
                    {"a", slope_},
                    {"b", intercept_},
                    {"residual_std", residual_std_}});
}

std::shared_ptr<StochasticLinearForecaster> StochasticLinearForecaster::from_json(const json& j) {
  try {
    return std::make_shared<StochasticLinearForecaster>(
        j.at("n_var").get<std::size_t>(), j.at("n_cells").get<std::size_t>(), j.at("a").get<std::vector<double>>(),
        j.at("b").get<std::vector<double>>(), j.at("residual_std").get<std::vector<double>>());
  } catch (const json::exception& e) {
    fail(ErrorKind::io, fmt::format("bad stochastic_linear model: {}", e.what()));
  }
}

ForecasterPtr load_forecaster(const std::filesystem::path& path) {
  const auto j = read_json(path);
  try {
    const auto kind = parse_forecaster_kind(j.at("kind").get<std::string>());
    switch (kind) {
      case ForecasterKind::persistence:
        return persistence_forecaster(j.at("state_size").get<std::size_t>());
      case ForecasterKind::climatology:
        return std::make_shared<ClimatologyForecaster>(j.at("state_size").get<std::size_t>(),
                                                       j.at("monthly_mean").get<std::vector<double>>());
      case ForecasterKind::stochastic_linear:
        return StochasticLinearForecaster::from_json(j);
      case ForecasterKind::toy_diffusion:
        return ToyDiffusionForecaster::load(j, path);
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::io, fmt::format("bad model file '{}': {}", path.string(), e.what()));
  }
  fail(ErrorKind::io, "unreachable");
}

ForecasterPtr persistence_forecaster(std::size_t state_size) {
  return std::make_shared<PersistenceForecaster>(state_size);
}

ForecasterPtr climatology_forecaster(const GriddedDataset& ds, const SplitSpec& split) {
  split.validate();
  std::size_t offset = 0;
  const auto view = training_view(ds, split.train, offset);
  std::vector<std::size_t> times(view.n_time());
  for (std::size_t t = 0; t < times.size(); ++t) times[t] = t;
  return climatology_from_times(view, times);
}

TrainResult train(const ForecasterSpec& spec, const GriddedDataset& ds, const SplitSpec& split,
                  const SubsetSelection& subset, std::uint64_t seed) {
  spec.validate();
  split.validate();
  std::size_t offset = 0;
  const auto view = training_view(ds, split.train, offset);

  TrainResult result;
  std::vector<std::size_t> starts;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (auto t : subset.indices) {
    if (t < offset || t - offset >= view.n_time()) {
      ++result.dropped_pairs;
      continue;
    }
    const auto local = t - offset;
    starts.push_back(local);
    const auto next = view.time_index(view.timestamps()[local] + 24);
    if (next) {
      pairs.emplace_back(local, *next);
    } else {
      ++result.dropped_pairs;
    }
  }
  result.used_pairs = pairs.size();
  if (result.dropped_pairs > 0) {
    spdlog::info("train: dropped {} subset entries without a 24 h successor in the training years",
                 result.dropped_pairs);
  }

  switch (spec.kind) {
    case ForecasterKind::persistence:
      result.model = persistence_forecaster(view.state_size());
      break;
    case ForecasterKind::climatology:
      require(!starts.empty(), ErrorKind::data, "climatology needs at least one training sample");
      result.model = climatology_from_times(view, starts);
      break;
    case ForecasterKind::stochastic_linear:
      require(pairs.size() >= 2, ErrorKind::data,
              fmt::format("stochastic_linear needs at least 2 training pairs, got {}", pairs.size()));
      result.model = fit_stochastic_linear(view, pairs, spec.ridge_lambda);
      break;
    case ForecasterKind::toy_diffusion: {
      require(pairs.size() >= 2, ErrorKind::data,
              fmt::format("toy_diffusion needs at least 2 training pairs, got {}", pairs.size()));
      std::vector<std::vector<float>> cond, target, statics;
      for (const auto& [a, b] : pairs) {
        cond.emplace_back(view.state(a).begin(), view.state(a).end());
        target.emplace_back(view.state(b).begin(), view.state(b).end());
      }
      for (const auto& [name, values] : view.static_fields()) statics.push_back(values);
      auto trained = train_toy_diffusion(spec.diffusion, view.n_var(), view.n_cells(), std::move(statics), cond,
                                         target, seed);
      result.model = std::move(trained.model);
      result.epoch_losses = std::move(trained.epoch_losses);
      break;
    }
  }
  return result;
}

std::span<const float> EnsembleForecast::state(std::size_t init, std::size_t member, std::size_t step) const {
  const auto n = state_size();
  return std::span<const float>(trajectories).subspan(((init * n_members + member) * n_steps + step) * n, n);
}

std::span<float> EnsembleForecast::state(std::size_t init, std::size_t member, std::size_t step) {
  const auto n = state_size();
  return std::span<float>(trajectories).subspan(((init * n_members + member) * n_steps + step) * n, n);
}

EnsembleForecast rollout(const Forecaster& model, const GriddedDataset& ds, std::span<const std::size_t> init_indices,
                         std::size_t n_members, std::size_t n_steps, std::uint64_t seed, std::size_t jobs) {
  require(model.state_size() == ds.state_size(), ErrorKind::invalid_argument,
          fmt::format("model state size {} does not match dataset state size {}", model.state_size(), ds.state_size()));
  require(n_members >= 1 && n_steps >= 1, ErrorKind::invalid_argument, "need at least one member and one step");
  require(!init_indices.empty(), ErrorKind::invalid_argument, "no init times");

  EnsembleForecast fc;
  fc.init_indices.assign(init_indices.begin(), init_indices.end());
  for (auto t : init_indices) {
    require(t < ds.n_time(), ErrorKind::invalid_argument, fmt::format("init index {} out of range", t));
    fc.init_times.push_back(ds.timestamps()[t]);
  }
  fc.n_members = n_members;
  fc.n_steps = n_steps;
  fc.variables = ds.variables();
  fc.n_cells = ds.n_cells();
  for (std::size_t m = 0; m < n_members; ++m) fc.member_seeds.push_back(derive_seed(seed, {m}));
  const auto n = ds.state_size();
  fc.trajectories.assign(init_indices.size() * n_members * n_steps * n, 0.0f);

  const auto run_init = [&](std::size_t i) {
    for (std::size_t m = 0; m < n_members; ++m) {
      auto rng = make_rng(fc.member_seeds[m], {static_cast<std::uint64_t>(fc.init_times[i])});
      std::span<const float> prev = ds.state(init_indices[i]);
      for (std::size_t k = 0; k < n_steps; ++k) {
        auto next = fc.state(i, m, k);
        model.step(prev, fc.init_times[i] + static_cast<HourStamp>(k + 1) * 24, rng, next);
        for (float x : next) {
          if (!std::isfinite(x)) {
            fail(ErrorKind::numeric, fmt::format("non-finite state at (init={}, member={}, step={})",
                                                 format_iso8601(fc.init_times[i]), m, k));
          }
        }
        prev = next;
      }
    }
  };

  const auto workers = std::clamp<std::size_t>(jobs, 1, init_indices.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < init_indices.size(); ++i) run_init(i);
    return fc;
  }
  // Each worker owns a strided set of inits and writes only their slices.
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < init_indices.size(); i += workers) run_init(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return fc;
}

void save_forecast(const EnsembleForecast& fc, const std::filesystem::path& path) {
  auto blob = path.stem();
  blob += ".traj.bin";
  json header{{"init_indices", fc.init_indices},
              {"init_times", json::array()},
              {"n_members", fc.n_members},
              {"n_steps", fc.n_steps},
              {"lead_stride_hours", fc.lead_stride_hours},
              {"variables", fc.variables},
              {"n_cells", fc.n_cells},
              {"member_seeds", fc.member_seeds},
              {"layout", "[init][member][step][var][cell] f32 little-endian"},
              {"trajectories", blob.string()}};
  for (auto h : fc.init_times) header["init_times"].push_back(format_iso8601(h));
  detail::write_f32_file(path.parent_path() / blob, fc.trajectories);
  write_json(path, header);
}

EnsembleForecast load_forecast(const std::filesystem::path& path) {
  const auto j = read_json(path);
  EnsembleForecast fc;
  try {
    fc.init_indices = j.at("init_indices").get<std::vector<std::size_t>>();
    for (const auto& s : j.at("init_times")) fc.init_times.push_back(parse_iso8601(s.get<std::string>()));
    fc.n_members = j.at("n_members").get<std::size_t>();
    fc.n_steps = j.at("n_steps").get<std::size_t>();
    fc.lead_stride_hours = j.at("lead_stride_hours").get<std::int64_t>();
    fc.variables = j.at("variables").get<std::vector<std::string>>();
    fc.n_cells = j.at("n_cells").get<std::size_t>();
    fc.member_seeds = j.at("member_seeds").get<std::vector<std::uint64_t>>();
    const auto blob = path.parent_path() / j.at("trajectories").get<std::string>();
    fc.trajectories =
        detail::read_f32_file(blob, fc.init_times.size() * fc.n_members * fc.n_steps * fc.state_size());
  } catch (const json::exception& e) {
    fail(ErrorKind::io, fmt::format("bad forecast header '{}': {}", path.string(), e.what()));
  }
  return fc;
}

}  // namespace stratacast
