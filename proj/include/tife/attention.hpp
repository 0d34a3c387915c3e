#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tife/autodiff.hpp"
#include "tife/matrix.hpp"

namespace tife {

/// Learnable projections of the dual-axis attention stage.
///
///   f: T×N → T×d_a   applied row-wise to the time-weighted window (ReLU)
///   g: N×T → N×d_a   applied row-wise to the feature-weighted window (ReLU)
///   h: 1×((T+N)·d_a) → 1×(T·N)   over the flattened [f; g] stack (linear)
struct TiFeParams {
  std::size_t window = 0;    // T
  std::size_t features = 0;  // N
  std::size_t latent = 0;    // d_a

  Matrix f_weights, f_bias;
  Matrix g_weights, g_bias;
  Matrix h_weights, h_bias;

  /// Zero-initialized parameters of the right shapes.
  static TiFeParams zeros(std::size_t window, std::size_t features, std::size_t latent);

  /// Throws ShapeError if any matrix disagrees with (T, N, d_a).
  void check_shapes() const;
};

/// Row-stochastic attention matrices for one window.
struct AttentionMaps {
  Matrix time_map;     // T×T
  Matrix feature_map;  // N×N
};

struct AxisAttention {
  Matrix map;
  Matrix weighted;
};

/// A_t = softmax(X·Xᵀ/√N) row-wise; weighted = A_t·X (T×N).
AxisAttention time_attention(const Matrix& x);

/// A_f = softmax(Xᵀ·X/√T) row-wise; weighted = A_f·Xᵀ (N×T).
AxisAttention feature_attention(const Matrix& x);

/// Tape handles for TiFeParams.
struct TiFeVars {
  Var f_weights, f_bias, g_weights, g_bias, h_weights, h_bias;
};

TiFeVars register_parameters(Tape& tape, const TiFeParams& p);

/// Records the attention stage for a batch of windows. Returns a
/// B×(T·N) node whose row b is the reinforced window b flattened row-major.
/// If `maps` is non-null it receives the attention maps of every window.
Var record_tife(Tape& tape, std::span<const Matrix> windows, const TiFeParams& p,
                const TiFeVars& vars, std::vector<AttentionMaps>* maps = nullptr);

/// Reinforced T×N representation of one window.
Matrix tife_forward(const Matrix& x, const TiFeParams& p);

/// The maps computed inside tife_forward for the same window.
AttentionMaps attention_maps(const Matrix& x, const TiFeParams& p);

}  // namespace tife
