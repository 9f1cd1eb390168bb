#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json_fwd.hpp>

#include "stratacast/forecast.hpp"

namespace stratacast {

/// One-hidden-layer denoiser shared across grid cells. Per cell it sees the
/// scaled noisy target, the conditioning state, the static fields and the
/// log noise level, and predicts the added noise:
///   eps = W2 tanh(W1 in + b1) + b2 + Ws in
struct DenoiserWeights {
  Eigen::MatrixXd w1;  // in x hidden
  Eigen::RowVectorXd b1;
  Eigen::MatrixXd w2;  // hidden x out
  Eigen::RowVectorXd b2;
  Eigen::MatrixXd ws;  // in x out

  std::size_t input_dims() const { return static_cast<std::size_t>(w1.rows()); }
  std::size_t output_dims() const { return static_cast<std::size_t>(w2.cols()); }
};

/// Log-linear noise levels from sigma_max down to sigma_min.
std::vector<double> noise_levels(const DiffusionParams& p);

class ToyDiffusionForecaster final : public Forecaster {
 public:
  ToyDiffusionForecaster(DiffusionParams params, std::size_t n_var, std::size_t n_cells,
                         std::vector<std::vector<float>> statics, DenoiserWeights weights);

  ForecasterKind kind() const override { return ForecasterKind::toy_diffusion; }
  std::size_t state_size() const override { return n_var_ * n_cells_; }
  void step(std::span<const float> state, HourStamp valid_time, Rng& rng, std::span<float> next) const override;
  /// JSON header with shapes at `path`, weights in `<stem>.weights.bin`.
  void save(const std::filesystem::path& path) const override;

  const DenoiserWeights& weights() const { return weights_; }
  const DiffusionParams& params() const { return params_; }

  /// Predicted noise for a batch of per-cell rows (see assemble_inputs).
  Eigen::MatrixXd predict_noise(const Eigen::MatrixXd& inputs) const;

  static std::shared_ptr<ToyDiffusionForecaster> load(const nlohmann::json& header,
                                                      const std::filesystem::path& header_path);

 private:
  DiffusionParams params_;
  std::size_t n_var_;
  std::size_t n_cells_;
  std::vector<std::vector<float>> statics_;  // per static field, per cell
  DenoiserWeights weights_;
};

struct DiffusionTrainResult {
  std::shared_ptr<const ToyDiffusionForecaster> model;
  std::vector<double> epoch_losses;
};

/// Noise-prediction training with minibatch Adam over (condition, target)
/// state pairs, each laid out [var][cell].
DiffusionTrainResult train_toy_diffusion(const DiffusionParams& params, std::size_t n_var, std::size_t n_cells,
                                         std::vector<std::vector<float>> statics,
                                         std::span<const std::vector<float>> conditions,
                                         std::span<const std::vector<float>> targets, std::uint64_t seed);

}  // namespace stratacast
