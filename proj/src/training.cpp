#include "tife/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

namespace tife {

double mse_loss(const Matrix& xhat, const Matrix& x) {
  if (!xhat.same_shape(x)) {
    throw ShapeError("mse_loss: shape mismatch " + xhat.shape_string() + " vs " +
                     x.shape_string());
  }
  return mean_square(sub(xhat, x));
}

AdamState::AdamState(AdamHyper h, std::span<const Matrix* const> params) : hyper(h) {
  for (const Matrix* p : params) {
    m.emplace_back(p->rows(), p->cols());
    v.emplace_back(p->rows(), p->cols());
  }
}

void adam_step(std::span<Matrix* const> params, std::span<const Matrix> grads, AdamState& s) {
  if (params.size() != grads.size() || params.size() != s.m.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                     std::to_string(grads.size()) + " gradients, " + std::to_string(s.m.size()) +
                     " moment slots");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!params[k]->same_shape(grads[k]) || !params[k]->same_shape(s.m[k])) {
      throw ShapeError("adam_step: parameter " + std::to_string(k) + " " +
                       params[k]->shape_string() + " vs gradient " + grads[k].shape_string());
    }
  }

  ++s.step;
  const auto& hp = s.hyper;
  const double t = static_cast<double>(s.step);
  const double c1 = 1.0 - std::pow(hp.beta1, t);
  const double c2 = 1.0 - std::pow(hp.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k]->values();
    auto g = grads[k].values();
    auto m = s.m[k].values();
    auto v = s.v[k].values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
      v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= hp.learning_rate * m_hat / (std::sqrt(v_hat) + hp.epsilon);
    }
  }
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ContractError("train: batch size must be at least 1");
  if (epochs == 0) throw ContractError("train: epochs must be at least 1");
  if (window == 0 || latent == 0 || attention_latent == 0) {
    throw ContractError("train: T, d_a and l must be positive");
  }
}

LossAndGrad loss_and_gradients(const TiFeAEModel& model, std::span<const Matrix> windows) {
  Tape tape;
  BatchGraph g = record_model(tape, model, windows);
  Var loss = tape.mean_square(tape.sub(g.reconstruction, g.target));
  LossAndGrad out{tape.value(loss)(0, 0), tape.backward(loss), {}};

  const Matrix& xhat = tape.value(g.reconstruction);
  const Matrix& x = tape.value(g.target);
  const std::size_t per_window = xhat.size() / windows.size();
  for (std::size_t b = 0; b < windows.size(); ++b) {
    double s = 0.0;
    for (std::size_t i = b * per_window; i < (b + 1) * per_window; ++i) {
      const double d = xhat.values()[i] - x.values()[i];
      s += d * d;
    }
    out.window_losses.push_back(s / static_cast<double>(per_window));
  }
  return out;
}

std::vector<double> train_model(TiFeAEModel& model, const Dataset& data, const TrainConfig& cfg,
                                const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.windows.empty()) throw ContractError("train: empty dataset");
  if (data.window_length != model.dims.window || data.features != model.dims.features) {
    throw ShapeError("train: dataset windows are [" + std::to_string(data.window_length) + "x" +
                     std::to_string(data.features) + "], model expects [" +
                     std::to_string(model.dims.window) + "x" +
                     std::to_string(model.dims.features) + "]");
  }

  std::vector<Matrix*> params;
  for (auto& p : parameters(model)) params.push_back(p.value);
  AdamState state(cfg.adam, params);

  std::vector<std::size_t> order(data.windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);

  std::vector<double> history;
  history.reserve(cfg.epochs);
  std::vector<Matrix> batch;
  std::vector<double> window_loss(data.windows.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) {
      for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(shuffle_rng() % i);
        std::swap(order[i - 1], order[j]);
      }
    }
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(data.windows[order[i]].matrix);
      LossAndGrad lg = loss_and_gradients(model, batch);
      for (std::size_t i = begin; i < end; ++i) window_loss[order[i]] = lg.window_losses[i - begin];
      adam_step(params, lg.grads, state);
    }
    // Summed in dataset order so the value does not depend on the shuffle.
    double total = 0.0;
    for (double l : window_loss) total += l;
    const double epoch_loss = total / static_cast<double>(window_loss.size());
    history.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return history;
}

TrainResult train(const Dataset& data, const TrainConfig& cfg, bool with_attention,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.windows.empty()) throw ContractError("train: empty dataset");
  if (data.window_length != cfg.window) {
    throw ShapeError("train: dataset window length " + std::to_string(data.window_length) +
                     " differs from configured T=" + std::to_string(cfg.window));
  }
  ModelDims dims{cfg.window, data.features, cfg.attention_latent, cfg.latent};
  TrainResult r{init_params(cfg.seed, dims, with_attention), {}};
  r.loss_history = train_model(r.model, data, cfg, on_epoch);
  return r;
}

void write_loss_csv(std::span<const double> history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,loss\n";
  char buf[64];
  for (std::size_t i = 0; i < history.size(); ++i) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), history[i]);
    out << (i + 1) << ',' << std::string_view(buf, static_cast<std::size_t>(ptr - buf)) << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

bool GradCheckReport::passed() const {
  return std::all_of(blocks.begin(), blocks.end(), [](const BlockError& b) { return b.passed; });
}

std::vector<Matrix> numeric_gradients(const TiFeAEModel& model, const Matrix& x, double h) {
  if (!(h > 0.0)) throw ContractError("gradient_check: step must be positive");
  TiFeAEModel work = model;
  auto loss = [&] { return mse_loss(model_forward(x, work), x); };
  std::vector<Matrix> out;
  for (auto& p : parameters(work)) {
    Matrix g(p.value->rows(), p.value->cols());
    auto values = p.value->values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = loss();
      values[i] = saved - h;
      const double down = loss();
      values[i] = saved;
      g.values()[i] = (up - down) / (2.0 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

GradCheckReport compare_gradients(const TiFeAEModel& model, std::span<const Matrix> analytic,
                                  std::span<const Matrix> numeric, double tol) {
  const auto refs = parameters(model);
  if (analytic.size() != refs.size() || numeric.size() != refs.size()) {
    throw ShapeError("compare_gradients: gradient count does not match parameter count");
  }
  GradCheckReport report;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    if (!analytic[k].same_shape(*refs[k].value) || !numeric[k].same_shape(*refs[k].value)) {
      throw ShapeError("compare_gradients: gradient shape mismatch in block " + refs[k].block);
    }
    if (report.blocks.empty() || report.blocks.back().block != refs[k].block) {
      report.blocks.push_back({refs[k].block, 0.0, true});
    }
    BlockError& b = report.blocks.back();
    for (std::size_t i = 0; i < analytic[k].size(); ++i) {
      const double a = analytic[k].values()[i];
      const double n = numeric[k].values()[i];
      const double denom = std::max({std::abs(a), std::abs(n), 1e-8});
      b.max_relative_error = std::max(b.max_relative_error, std::abs(a - n) / denom);
    }
    b.passed = b.max_relative_error < tol;
  }
  return report;
}

GradCheckReport gradient_check(const TiFeAEModel& model, const Matrix& x, double h, double tol) {
  const Matrix batch[] = {x};
  LossAndGrad lg = loss_and_gradients(model, batch);
  return compare_gradients(model, lg.grads, numeric_gradients(model, x, h), tol);
}

}  // namespace tife
