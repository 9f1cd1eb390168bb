#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "stratacast/dataset.hpp"
#include "stratacast/rng.hpp"

namespace stratacast {

struct SubsetSelection;

enum class ForecasterKind { persistence, climatology, stochastic_linear, toy_diffusion };

std::string_view forecaster_kind_name(ForecasterKind kind);
ForecasterKind parse_forecaster_kind(std::string_view name);

struct DiffusionParams {
  std::size_t n_noise_levels = 32;
  std::size_t n_sample_steps = 32;
  std::size_t hidden_width = 32;
  double learning_rate = 2e-3;
  std::size_t n_epochs = 40;
  std::size_t batch_size = 32;
  double sigma_min = 0.01;
  double sigma_max = 10.0;
};

struct ForecasterSpec {
  ForecasterKind kind = ForecasterKind::stochastic_linear;
  double ridge_lambda = 1e-6;
  DiffusionParams diffusion;

  void validate() const;
  static ForecasterSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// A trained one-step (24 h) probabilistic model. Immutable after training;
/// `step` may be called concurrently with distinct generators.
class Forecaster {
 public:
  virtual ~Forecaster() = default;

  virtual ForecasterKind kind() const = 0;
  virtual std::size_t state_size() const = 0;

  /// Samples the state at `valid_time` given the state 24 h earlier.
  virtual void step(std::span<const float> state, HourStamp valid_time, Rng& rng, std::span<float> next) const = 0;

  /// Writes the model to `path` (JSON), plus any side files next to it.
  virtual void save(const std::filesystem::path& path) const = 0;
};

using ForecasterPtr = std::shared_ptr<const Forecaster>;

ForecasterPtr load_forecaster(const std::filesystem::path& path);

ForecasterPtr persistence_forecaster(std::size_t state_size);
/// Monthly mean fields over the training years of `ds`.
ForecasterPtr climatology_forecaster(const GriddedDataset& ds, const SplitSpec& split);

/// Per-cell, per-variable x' = a x + b + residual_std * z.
class StochasticLinearForecaster final : public Forecaster {
 public:
  StochasticLinearForecaster(std::size_t n_var, std::size_t n_cells, std::vector<double> slope,
                             std::vector<double> intercept, std::vector<double> residual_std);

  ForecasterKind kind() const override { return ForecasterKind::stochastic_linear; }
  std::size_t state_size() const override { return slope_.size(); }
  void step(std::span<const float> state, HourStamp valid_time, Rng& rng, std::span<float> next) const override;
  void save(const std::filesystem::path& path) const override;

  std::span<const double> slope() const { return slope_; }
  std::span<const double> intercept() const { return intercept_; }
  std::span<const double> residual_std() const { return residual_std_; }

  static std::shared_ptr<StochasticLinearForecaster> from_json(const nlohmann::json& j);

 private:
  std::size_t n_var_;
  std::size_t n_cells_;
  std::vector<double> slope_, intercept_, residual_std_;
};

struct TrainResult {
  ForecasterPtr model;
  std::size_t used_pairs = 0;
  std::size_t dropped_pairs = 0;     // subset entries without a 24 h successor inside the training years
  std::vector<double> epoch_losses;  // toy_diffusion only
};

/// Fits `spec` on the 24 h pairs (t, t + 24 h) starting at the subset's
/// indices. Only the training years of `ds` are visible to the model.
TrainResult train(const ForecasterSpec& spec, const GriddedDataset& ds, const SplitSpec& split,
                  const SubsetSelection& subset, std::uint64_t seed);

struct EnsembleForecast {
  std::vector<std::size_t> init_indices;
  std::vector<HourStamp> init_times;
  std::size_t n_members = 0;
  std::size_t n_steps = 0;
  std::int64_t lead_stride_hours = 24;
  std::vector<std::string> variables;
  std::size_t n_cells = 0;
  std::vector<std::uint64_t> member_seeds;
  std::vector<float> trajectories;  // [init][member][step][var][cell]

  std::size_t state_size() const { return variables.size() * n_cells; }
  std::span<const float> state(std::size_t init, std::size_t member, std::size_t step) const;
  std::span<float> state(std::size_t init, std::size_t member, std::size_t step);
};

/// Autoregressive ensemble: member m starts from the state at each init and
/// applies `model.step` n_steps times with a generator derived from
/// (seed, m, init time). Step k of the trajectory is lead (k + 1) * 24 h.
EnsembleForecast rollout(const Forecaster& model, const GriddedDataset& ds, std::span<const std::size_t> init_indices,
                         std::size_t n_members, std::size_t n_steps, std::uint64_t seed, std::size_t jobs = 1);

/// JSON header at `path` plus a little-endian f32 blob `<stem>.traj.bin`.
void save_forecast(const EnsembleForecast& fc, const std::filesystem::path& path);
EnsembleForecast load_forecast(const std::filesystem::path& path);

}  // namespace stratacast
