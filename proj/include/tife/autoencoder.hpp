#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tife/attention.hpp"
#include "tife/autodiff.hpp"
#include "tife/data.hpp"
#include "tife/matrix.hpp"

namespace tife {

/// Row-wise encoder (N→l, ReLU) and decoder (l→N, linear).
struct AEParams {
  Matrix enc_weights, enc_bias;
  Matrix dec_weights, dec_bias;

  std::size_t latent() const noexcept { return enc_weights.cols(); }
};

struct ModelDims {
  std::size_t window = 0;            // T
  std::size_t features = 0;          // N
  std::size_t attention_latent = 0;  // d_a
  std::size_t latent = 0;            // l

  bool operator==(const ModelDims&) const = default;
};

struct TiFeAEModel {
  ModelDims dims;
  std::optional<TiFeParams> attention;  // absent for the plain autoencoder
  AEParams ae;
  ScaleParams scale;

  bool has_attention() const noexcept { return attention.has_value(); }
  /// Throws on any shape or scale-parameter inconsistency.
  void validate() const;
};

/// A parameter matrix tagged with the block it belongs to
/// ("f", "g", "h", "encoder", "decoder").
struct ParamRef {
  std::string block;
  Matrix* value;
  bool bias = false;
};

struct ConstParamRef {
  std::string block;
  const Matrix* value;
  bool bias = false;
};

/// Every trainable matrix in a fixed order (attention blocks first).
std::vector<ParamRef> parameters(TiFeAEModel& model);
std::vector<ConstParamRef> parameters(const TiFeAEModel& model);
std::size_t parameter_count(const TiFeAEModel& model);

Matrix encode(const Matrix& r, const AEParams& p);
Matrix decode(const Matrix& z, const AEParams& p);

Matrix model_forward(const Matrix& x, const TiFeAEModel& m);

/// Glorot-uniform weights, zero biases. Scale params default to identity (0, 1).
TiFeAEModel init_params(std::uint64_t seed, const ModelDims& dims, bool with_attention);

/// Tape nodes for a batch: reconstruction and target, both (B·T)×N.
struct BatchGraph {
  Var reconstruction;
  Var target;
  std::vector<AttentionMaps> maps;
};

/// Registers every parameter of `m` on the tape (in parameters() order) and
/// records the forward pass for the batch.
BatchGraph record_model(Tape& tape, const TiFeAEModel& m, std::span<const Matrix> windows,
                        bool keep_maps = false);

/// Reconstructions for many windows, evaluated in chunks of `batch` windows.
std::vector<Matrix> model_forward_batch(std::span<const Matrix> windows, const TiFeAEModel& m,
                                        std::size_t batch = 64);

// Binary persistence: magic "TIFE", version, dims, flag, scale count, then
// each parameter as (rows u32, cols u32, row-major f64), then scale pairs.

inline constexpr std::uint32_t kModelFormatVersion = 1;

void save_model(const TiFeAEModel& model, const std::filesystem::path& path);
TiFeAEModel load_model(const std::filesystem::path& path);
std::vector<std::uint8_t> serialize_model(const TiFeAEModel& model);
TiFeAEModel deserialize_model(std::span<const std::uint8_t> bytes);

}  // namespace tife
