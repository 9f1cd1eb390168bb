#include "stratacast/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "binary_io.hpp"
#include "stratacast/error.hpp"

namespace stratacast {

namespace {

using json = nlohmann::json;

// Standardized data: the scaling assumes unit data variance.
double c_in(double sigma) { return 1.0 / std::sqrt(sigma * sigma + 1.0); }
double c_noise(double sigma) { return 0.25 * std::log(sigma); }

std::size_t input_dims(std::size_t n_var, std::size_t n_static) { return 2 * n_var + n_static + 1; }

// Per-cell input rows for one state: [c_in * noisy, condition, statics, c_noise].
void fill_rows(Eigen::MatrixXd& in, Eigen::Index row0, std::size_t n_var, std::size_t n_cells,
               std::span<const double> noisy, std::span<const float> condition,
               const std::vector<std::vector<float>>& statics, double sigma) {
  const double scale = c_in(sigma);
  const double level = c_noise(sigma);
  for (std::size_t c = 0; c < n_cells; ++c) {
    const auto r = row0 + static_cast<Eigen::Index>(c);
    Eigen::Index col = 0;
    for (std::size_t v = 0; v < n_var; ++v) in(r, col++) = scale * noisy[v * n_cells + c];
    for (std::size_t v = 0; v < n_var; ++v) in(r, col++) = condition[v * n_cells + c];
    for (const auto& s : statics) in(r, col++) = s[c];
    in(r, col) = level;
  }
}

Eigen::MatrixXd forward(const DenoiserWeights& w, const Eigen::MatrixXd& in, Eigen::MatrixXd* hidden = nullptr) {
  Eigen::MatrixXd h = ((in * w.w1).rowwise() + w.b1).array().tanh().matrix();
  Eigen::MatrixXd out = (h * w.w2).rowwise() + w.b2;
  out.noalias() += in * w.ws;
  if (hidden) *hidden = std::move(h);
  return out;
}

void round_to_float(Eigen::MatrixXd& m) {
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<float>(m.data()[k]);
}

void round_to_float(Eigen::RowVectorXd& m) {
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = static_cast<float>(m.data()[k]);
}

// Adam state for one parameter block.
template <typename Mat>
struct AdamSlot {
  Mat m, v;

  explicit AdamSlot(const Mat& like) : m(Mat::Zero(like.rows(), like.cols())), v(Mat::Zero(like.rows(), like.cols())) {}

  void update(Mat& param, const Mat& grad, double lr, std::size_t t) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    m = b1 * m + (1.0 - b1) * grad;
    v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

std::vector<std::size_t> sampling_schedule(std::size_t n_levels, std::size_t n_steps) {
  std::vector<std::size_t> idx;
  if (n_steps == 1) return {0};
  for (std::size_t s = 0; s < n_steps; ++s) {
    idx.push_back(static_cast<std::size_t>(
        std::llround(static_cast<double>(s) * static_cast<double>(n_levels - 1) / static_cast<double>(n_steps - 1))));
  }
  idx.erase(std::unique(idx.begin(), idx.end()), idx.end());
  return idx;
}

}  // namespace

std::vector<double> noise_levels(const DiffusionParams& p) {
  std::vector<double> out(p.n_noise_levels);
  const double hi = std::log(p.sigma_max), lo = std::log(p.sigma_min);
  for (std::size_t l = 0; l < out.size(); ++l) {
    out[l] = std::exp(hi + (lo - hi) * static_cast<double>(l) / static_cast<double>(out.size() - 1));
  }
  return out;
}

ToyDiffusionForecaster::ToyDiffusionForecaster(DiffusionParams params, std::size_t n_var, std::size_t n_cells,
                                               std::vector<std::vector<float>> statics, DenoiserWeights weights)
    : params_(params), n_var_(n_var), n_cells_(n_cells), statics_(std::move(statics)), weights_(std::move(weights)) {
  for (const auto& s : statics_) {
    require(s.size() == n_cells_, ErrorKind::invalid_argument, "static field does not match the cell count");
  }
  require(weights_.input_dims() == input_dims(n_var_, statics_.size()) && weights_.output_dims() == n_var_,
          ErrorKind::invalid_argument, "denoiser weights do not match the state layout");
}

Eigen::MatrixXd ToyDiffusionForecaster::predict_noise(const Eigen::MatrixXd& inputs) const {
  return forward(weights_, inputs);
}

void ToyDiffusionForecaster::step(std::span<const float> state, HourStamp, Rng& rng, std::span<float> next) const {
  const auto sigmas = noise_levels(params_);
  const auto schedule = sampling_schedule(sigmas.size(), params_.n_sample_steps);
  const auto n = state_size();
  std::normal_distribution<double> normal;

  std::vector<double> x(n);
  for (auto& xi : x) xi = sigmas[schedule.front()] * normal(rng);

  Eigen::MatrixXd in(static_cast<Eigen::Index>(n_cells_), static_cast<Eigen::Index>(weights_.input_dims()));
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    const double sigma = sigmas[schedule[s]];
    const double sigma_next = s + 1 < schedule.size() ? sigmas[schedule[s + 1]] : 0.0;
    fill_rows(in, 0, n_var_, n_cells_, x, state, statics_, sigma);
    const Eigen::MatrixXd eps = forward(weights_, in);
    if (sigma_next == 0.0) {
      for (std::size_t c = 0; c < n_cells_; ++c) {
        for (std::size_t v = 0; v < n_var_; ++v) {
          x[v * n_cells_ + c] -= sigma * eps(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(v));
        }
      }
      break;
    }
    // Ancestral step from sigma to sigma_next.
    const double up = std::sqrt(sigma_next * sigma_next * (sigma * sigma - sigma_next * sigma_next) / (sigma * sigma));
    const double down = std::sqrt(sigma_next * sigma_next - up * up);
    for (std::size_t c = 0; c < n_cells_; ++c) {
      for (std::size_t v = 0; v < n_var_; ++v) {
        const double e = eps(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(v));
        auto& xi = x[v * n_cells_ + c];
        const double denoised = xi - sigma * e;
        xi = denoised + down * e + up * normal(rng);
      }
    }
  }
  for (std::size_t k = 0; k < n; ++k) next[k] = static_cast<float>(x[k]);
}

void ToyDiffusionForecaster::save(const std::filesystem::path& path) const {
  auto blob = path.stem();
  blob += ".weights.bin";
  std::vector<float> flat;
  json tensors = json::array();
  const auto push = [&](const char* name, const auto& m) {
    tensors.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}});
    // Row-major.
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(static_cast<float>(m(r, c)));
    }
  };
  push("w1", weights_.w1);
  push("b1", weights_.b1);
  push("w2", weights_.w2);
  push("b2", weights_.b2);
  push("ws", weights_.ws);
  tensors.push_back({{"name", "statics"}, {"shape", {statics_.size(), n_cells_}}});
  for (const auto& s : statics_) flat.insert(flat.end(), s.begin(), s.end());

  detail::write_f32_file(path.parent_path() / blob, flat);
  const json header{{"kind", "toy_diffusion"},
                    {"n_var", n_var_},
                    {"n_cells", n_cells_},
                    {"params",
                     {{"n_noise_levels", params_.n_noise_levels},
                      {"n_sample_steps", params_.n_sample_steps},
                      {"hidden_width", params_.hidden_width},
                      {"learning_rate", params_.learning_rate},
                      {"n_epochs", params_.n_epochs},
                      {"batch_size", params_.batch_size},
                      {"sigma_min", params_.sigma_min},
                      {"sigma_max", params_.sigma_max}}},
                    {"tensors", tensors},
                    {"weights", blob.string()}};
  std::ofstream out(path, std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::io, fmt::format("cannot write '{}'", path.string()));
  out << header.dump(1) << '\n';
}

std::shared_ptr<ToyDiffusionForecaster> ToyDiffusionForecaster::load(const json& header,
                                                                     const std::filesystem::path& header_path) {
  DiffusionParams p;
  const auto& jp = header.at("params");
  p.n_noise_levels = jp.at("n_noise_levels").get<std::size_t>();
  p.n_sample_steps = jp.at("n_sample_steps").get<std::size_t>();
  p.hidden_width = jp.at("hidden_width").get<std::size_t>();
  p.learning_rate = jp.at("learning_rate").get<double>();
  p.n_epochs = jp.at("n_epochs").get<std::size_t>();
  p.batch_size = jp.at("batch_size").get<std::size_t>();
  p.sigma_min = jp.at("sigma_min").get<double>();
  p.sigma_max = jp.at("sigma_max").get<double>();
  const auto n_var = header.at("n_var").get<std::size_t>();
  const auto n_cells = header.at("n_cells").get<std::size_t>();

  std::size_t total = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
  for (const auto& t : header.at("tensors")) {
    const auto shape = t.at("shape").get<std::vector<Eigen::Index>>();
    require(shape.size() == 2, ErrorKind::io, "tensor shapes must be 2-D");
    shapes.emplace_back(shape[0], shape[1]);
    total += static_cast<std::size_t>(shape[0] * shape[1]);
  }
  require(shapes.size() == 6, ErrorKind::io, "toy_diffusion header must list 6 tensors");
  const auto flat =
      detail::read_f32_file(header_path.parent_path() / header.at("weights").get<std::string>(), total);

  std::size_t pos = 0;
  const auto take = [&](auto& m, std::size_t which) {
    m.resize(shapes[which].first, shapes[which].second);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat[pos++];
    }
  };
  DenoiserWeights w;
  take(w.w1, 0);
  take(w.b1, 1);
  take(w.w2, 2);
  take(w.b2, 3);
  take(w.ws, 4);
  std::vector<std::vector<float>> statics(static_cast<std::size_t>(shapes[5].first));
  for (auto& s : statics) {
    s.assign(flat.begin() + static_cast<std::ptrdiff_t>(pos),
             flat.begin() + static_cast<std::ptrdiff_t>(pos + static_cast<std::size_t>(shapes[5].second)));
    pos += s.size();
  }
  return std::make_shared<ToyDiffusionForecaster>(p, n_var, n_cells, std::move(statics), std::move(w));
}

DiffusionTrainResult train_toy_diffusion(const DiffusionParams& params, std::size_t n_var, std::size_t n_cells,
                                         std::vector<std::vector<float>> statics,
                                         std::span<const std::vector<float>> conditions,
                                         std::span<const std::vector<float>> targets, std::uint64_t seed) {
  require(conditions.size() == targets.size() && !targets.empty(), ErrorKind::invalid_argument,
          "diffusion training needs matching, non-empty condition/target lists");
  const auto n = n_var * n_cells;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    require(conditions[i].size() == n && targets[i].size() == n, ErrorKind::invalid_argument,
            "training pair does not match the state layout");
  }

  const auto din = static_cast<Eigen::Index>(input_dims(n_var, statics.size()));
  const auto hidden = static_cast<Eigen::Index>(params.hidden_width);
  const auto dout = static_cast<Eigen::Index>(n_var);

  auto rng = make_rng(seed, {0x6469ff});
  std::normal_distribution<double> normal;
  DenoiserWeights w;
  const auto glorot = [&](Eigen::Index rows, Eigen::Index cols) {
    const double scale = std::sqrt(2.0 / static_cast<double>(rows + cols));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = scale * normal(rng);
    return m;
  };
  w.w1 = glorot(din, hidden);
  w.b1 = Eigen::RowVectorXd::Zero(hidden);
  w.w2 = glorot(hidden, dout);
  w.b2 = Eigen::RowVectorXd::Zero(dout);
  w.ws = Eigen::MatrixXd::Zero(din, dout);

  AdamSlot<Eigen::MatrixXd> aw1(w.w1), aw2(w.w2), aws(w.ws);
  AdamSlot<Eigen::RowVectorXd> ab1(w.b1), ab2(w.b2);

  const auto sigmas = noise_levels(params);
  std::uniform_int_distribution<std::size_t> pick_level(0, sigmas.size() - 1);
  std::vector<std::size_t> order(targets.size());
  std::iota(order.begin(), order.end(), 0);

  DiffusionTrainResult result;
  std::size_t adam_t = 0;
  std::vector<double> noisy(n);
  for (std::size_t epoch = 0; epoch < params.n_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    for (std::size_t start = 0; start < order.size(); start += params.batch_size) {
      const auto batch = std::min(params.batch_size, order.size() - start);
      const auto rows = static_cast<Eigen::Index>(batch * n_cells);
      Eigen::MatrixXd in(rows, din);
      Eigen::MatrixXd eps(rows, dout);
      for (std::size_t b = 0; b < batch; ++b) {
        const auto& y = targets[order[start + b]];
        const double sigma = sigmas[pick_level(rng)];
        const auto row0 = static_cast<Eigen::Index>(b * n_cells);
        for (std::size_t v = 0; v < n_var; ++v) {
          for (std::size_t c = 0; c < n_cells; ++c) {
            const double e = normal(rng);
            eps(row0 + static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(v)) = e;
            noisy[v * n_cells + c] = y[v * n_cells + c] + sigma * e;
          }
        }
        fill_rows(in, row0, n_var, n_cells, noisy, conditions[order[start + b]], statics, sigma);
      }

      Eigen::MatrixXd h;
      const Eigen::MatrixXd out = forward(w, in, &h);
      const Eigen::MatrixXd diff = out - eps;
      const double count = static_cast<double>(diff.size());
      loss_sum += diff.squaredNorm();
      loss_count += static_cast<std::size_t>(diff.size());

      const Eigen::MatrixXd d_out = (2.0 / count) * diff;
      const Eigen::MatrixXd g_w2 = h.transpose() * d_out;
      const Eigen::RowVectorXd g_b2 = d_out.colwise().sum();
      const Eigen::MatrixXd g_ws = in.transpose() * d_out;
      const Eigen::MatrixXd d_h = ((d_out * w.w2.transpose()).array() * (1.0 - h.array().square())).matrix();
      const Eigen::MatrixXd g_w1 = in.transpose() * d_h;
      const Eigen::RowVectorXd g_b1 = d_h.colwise().sum();

      ++adam_t;
      aw1.update(w.w1, g_w1, params.learning_rate, adam_t);
      ab1.update(w.b1, g_b1, params.learning_rate, adam_t);
      aw2.update(w.w2, g_w2, params.learning_rate, adam_t);
      ab2.update(w.b2, g_b2, params.learning_rate, adam_t);
      aws.update(w.ws, g_ws, params.learning_rate, adam_t);
    }
    result.epoch_losses.push_back(loss_sum / static_cast<double>(loss_count));
  }

  // Stored weights are f32, so inference uses the f32-rounded values from the start.
  round_to_float(w.w1);
  round_to_float(w.b1);
  round_to_float(w.w2);
  round_to_float(w.b2);
  round_to_float(w.ws);
  result.model = std::make_shared<ToyDiffusionForecaster>(params, n_var, n_cells, std::move(statics), std::move(w));
  return result;
}

}  // namespace stratacast
