#include "tife/attention.hpp"

#include <cmath>
#include <string>

namespace tife {

namespace {

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string("TiFeParams: ") + name + " has shape " + m.shape_string() +
                     ", expected [" + std::to_string(rows) + "x" + std::to_string(cols) + "]");
  }
}

void check_window(const Matrix& x, const TiFeParams& p) {
  if (x.rows() != p.window || x.cols() != p.features) {
    throw ShapeError("tife: window " + x.shape_string() + " does not match parameters [" +
                     std::to_string(p.window) + "x" + std::to_string(p.features) + "]");
  }
}

struct AxisVars {
  Var map;
  Var weighted;
};

// Scores use the window as both query and key.
AxisVars record_time_attention(Tape& tape, Var x) {
  const double n = static_cast<double>(tape.value(x).cols());
  Var scores = tape.scale(tape.matmul(x, tape.transpose(x)), 1.0 / std::sqrt(n));
  Var map = tape.row_softmax(scores);
  return {map, tape.matmul(map, x)};
}

AxisVars record_feature_attention(Tape& tape, Var x) {
  const double t = static_cast<double>(tape.value(x).rows());
  Var xt = tape.transpose(x);
  Var scores = tape.scale(tape.matmul(xt, x), 1.0 / std::sqrt(t));
  Var map = tape.row_softmax(scores);
  return {map, tape.matmul(map, xt)};
}

}  // namespace

TiFeParams TiFeParams::zeros(std::size_t window, std::size_t features, std::size_t latent) {
  if (window == 0 || features == 0 || latent == 0) {
    throw ContractError("TiFeParams: T, N and d_a must be positive");
  }
  TiFeParams p;
  p.window = window;
  p.features = features;
  p.latent = latent;
  p.f_weights = Matrix(features, latent);
  p.f_bias = Matrix(1, latent);
  p.g_weights = Matrix(window, latent);
  p.g_bias = Matrix(1, latent);
  p.h_weights = Matrix((features + window) * latent, window * features);
  p.h_bias = Matrix(1, window * features);
  return p;
}

void TiFeParams::check_shapes() const {
  if (window == 0 || features == 0 || latent == 0) {
    throw ContractError("TiFeParams: T, N and d_a must be positive");
  }
  expect_shape(f_weights, features, latent, "f_weights");
  expect_shape(f_bias, 1, latent, "f_bias");
  expect_shape(g_weights, window, latent, "g_weights");
  expect_shape(g_bias, 1, latent, "g_bias");
  expect_shape(h_weights, (features + window) * latent, window * features, "h_weights");
  expect_shape(h_bias, 1, window * features, "h_bias");
}

AxisAttention time_attention(const Matrix& x) {
  Tape tape;
  auto r = record_time_attention(tape, tape.constant(x));
  return {tape.value(r.map), tape.value(r.weighted)};
}

AxisAttention feature_attention(const Matrix& x) {
  Tape tape;
  auto r = record_feature_attention(tape, tape.constant(x));
  return {tape.value(r.map), tape.value(r.weighted)};
}

TiFeVars register_parameters(Tape& tape, const TiFeParams& p) {
  return {tape.parameter(p.f_weights), tape.parameter(p.f_bias),
          tape.parameter(p.g_weights), tape.parameter(p.g_bias),
          tape.parameter(p.h_weights), tape.parameter(p.h_bias)};
}

Var record_tife(Tape& tape, std::span<const Matrix> windows, const TiFeParams& p,
                const TiFeVars& vars, std::vector<AttentionMaps>* maps) {
  if (windows.empty()) throw ContractError("tife: empty batch");
  const std::size_t flat = (p.window + p.features) * p.latent;
  std::vector<Var> rows;
  rows.reserve(windows.size());
  for (const Matrix& w : windows) {
    check_window(w, p);
    Var x = tape.constant(w);
    AxisVars time = record_time_attention(tape, x);
    AxisVars feat = record_feature_attention(tape, x);
    if (maps != nullptr) maps->push_back({tape.value(time.map), tape.value(feat.map)});

    Var f_out = tape.dense(time.weighted, vars.f_weights, vars.f_bias, Activation::relu);
    Var g_out = tape.dense(feat.weighted, vars.g_weights, vars.g_bias, Activation::relu);
    const Var stack[] = {f_out, g_out};
    rows.push_back(tape.reshape(tape.vstack(stack), 1, flat));
  }
  Var batch = rows.size() == 1 ? rows.front() : tape.vstack(rows);
  return tape.dense(batch, vars.h_weights, vars.h_bias, Activation::linear);
}

namespace {

Matrix run_single(const Matrix& x, const TiFeParams& p, std::vector<AttentionMaps>* maps) {
  p.check_shapes();
  Tape tape;
  TiFeVars vars = register_parameters(tape, p);
  const Matrix batch[] = {x};
  Var out = record_tife(tape, batch, p, vars, maps);
  return reshape(tape.value(out), p.window, p.features);
}

}  // namespace

Matrix tife_forward(const Matrix& x, const TiFeParams& p) { return run_single(x, p, nullptr); }

AttentionMaps attention_maps(const Matrix& x, const TiFeParams& p) {
  std::vector<AttentionMaps> maps;
  run_single(x, p, &maps);
  return std::move(maps.front());
}

}  // namespace tife
