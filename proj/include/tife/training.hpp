#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tife/autoencoder.hpp"
#include "tife/data.hpp"
#include "tife/matrix.hpp"

namespace tife {

/// Mean over all entries of (xhat - x)^2.
double mse_loss(const Matrix& xhat, const Matrix& x);

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
};

struct AdamState {
  AdamHyper hyper;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(AdamHyper h, std::span<const Matrix* const> params);
};

/// One Adam update, in place. The step counter is incremented before the
/// bias correction is computed.
void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& state);

struct TrainConfig {
  std::size_t batch_size = 128;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;
  std::size_t window = 168;           // T
  std::size_t attention_latent = 32;  // d_a
  std::size_t latent = 16;            // l
  AdamHyper adam;
  bool shuffle = true;

  void validate() const;
};

struct TrainResult {
  TiFeAEModel model;
  std::vector<double> loss_history;  // mean sample loss per epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

/// Trains a freshly initialized model. Loss per epoch is the mean of the
/// per-window losses observed before each batch's update.
TrainResult train(const Dataset& data, const TrainConfig& cfg, bool with_attention,
                  const EpochCallback& on_epoch = {});

/// Continues training an existing model in place.
std::vector<double> train_model(TiFeAEModel& model, const Dataset& data, const TrainConfig& cfg,
                                const EpochCallback& on_epoch = {});

/// Loss and its gradient for a batch, one gradient per parameters() entry.
struct LossAndGrad {
  double loss = 0.0;
  std::vector<Matrix> grads;
  std::vector<double> window_losses;  // MSE of each window in the batch
};
LossAndGrad loss_and_gradients(const TiFeAEModel& model, std::span<const Matrix> windows);

void write_loss_csv(std::span<const double> history, const std::filesystem::path& path);

// Gradient verification

struct BlockError {
  std::string block;
  double max_relative_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<BlockError> blocks;
  bool passed() const;
};

/// Central differences of mse_loss(model_forward(x), x) for every parameter.
std::vector<Matrix> numeric_gradients(const TiFeAEModel& model, const Matrix& x, double h);

/// Per-block max of |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport compare_gradients(const TiFeAEModel& model, std::span<const Matrix> analytic,
                                  std::span<const Matrix> numeric, double tol);

GradCheckReport gradient_check(const TiFeAEModel& model, const Matrix& x, double h, double tol);

}  // namespace tife
