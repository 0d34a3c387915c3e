#include "tife/autoencoder.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>

namespace tife {

namespace {

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* name) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string("model: ") + name + " has shape " + m.shape_string() +
                     ", expected [" + std::to_string(rows) + "x" + std::to_string(cols) + "]");
  }
}

void check_input(const Matrix& x, std::size_t cols, const char* op) {
  if (x.cols() != cols) {
    throw ShapeError(std::string(op) + ": input " + x.shape_string() + " needs " +
                     std::to_string(cols) + " columns");
  }
}

}  // namespace

void TiFeAEModel::validate() const {
  if (dims.window == 0 || dims.features == 0 || dims.latent == 0) {
    throw ContractError("model: T, N and l must be positive");
  }
  expect_shape(ae.enc_weights, dims.features, dims.latent, "enc_weights");
  expect_shape(ae.enc_bias, 1, dims.latent, "enc_bias");
  expect_shape(ae.dec_weights, dims.latent, dims.features, "dec_weights");
  expect_shape(ae.dec_bias, 1, dims.features, "dec_bias");
  if (attention) {
    if (attention->window != dims.window || attention->features != dims.features ||
        attention->latent != dims.attention_latent) {
      throw ShapeError("model: attention dimensions disagree with model dims");
    }
    attention->check_shapes();
  }
  if (scale.min.size() != dims.features || scale.max.size() != dims.features) {
    throw ContractError("model: scale parameters must have exactly N entries");
  }
  for (std::size_t i = 0; i < scale.size(); ++i) {
    if (!(scale.min[i] <= scale.max[i])) {
      throw ContractError("model: scale min exceeds max for feature " + std::to_string(i));
    }
  }
}

std::vector<ParamRef> parameters(TiFeAEModel& m) {
  std::vector<ParamRef> out;
  if (m.attention) {
    auto& a = *m.attention;
    out = {{"f", &a.f_weights, false}, {"f", &a.f_bias, true},
           {"g", &a.g_weights, false}, {"g", &a.g_bias, true},
           {"h", &a.h_weights, false}, {"h", &a.h_bias, true}};
  }
  out.push_back({"encoder", &m.ae.enc_weights, false});
  out.push_back({"encoder", &m.ae.enc_bias, true});
  out.push_back({"decoder", &m.ae.dec_weights, false});
  out.push_back({"decoder", &m.ae.dec_bias, true});
  return out;
}

std::vector<ConstParamRef> parameters(const TiFeAEModel& m) {
  std::vector<ConstParamRef> out;
  for (auto& p : parameters(const_cast<TiFeAEModel&>(m))) out.push_back({p.block, p.value, p.bias});
  return out;
}

std::size_t parameter_count(const TiFeAEModel& m) {
  std::size_t n = 0;
  for (const auto& p : parameters(m)) n += p.value->size();
  return n;
}

Matrix encode(const Matrix& r, const AEParams& p) {
  check_input(r, p.enc_weights.rows(), "encode");
  return dense(p.enc_weights, p.enc_bias, r, Activation::relu);
}

Matrix decode(const Matrix& z, const AEParams& p) {
  check_input(z, p.dec_weights.rows(), "decode");
  return dense(p.dec_weights, p.dec_bias, z, Activation::linear);
}

BatchGraph record_model(Tape& tape, const TiFeAEModel& m, std::span<const Matrix> windows,
                        bool keep_maps) {
  if (windows.empty()) throw ContractError("model: empty batch");
  for (const auto& w : windows) {
    if (w.rows() != m.dims.window || w.cols() != m.dims.features) {
      throw ShapeError("model: window " + w.shape_string() + " does not match model [" +
                       std::to_string(m.dims.window) + "x" + std::to_string(m.dims.features) +
                       "]");
    }
  }

  BatchGraph g;
  std::optional<TiFeVars> tvars;
  if (m.attention) tvars = register_parameters(tape, *m.attention);
  Var enc_w = tape.parameter(m.ae.enc_weights);
  Var enc_b = tape.parameter(m.ae.enc_bias);
  Var dec_w = tape.parameter(m.ae.dec_weights);
  Var dec_b = tape.parameter(m.ae.dec_bias);

  const std::size_t rows = windows.size() * m.dims.window;
  g.target = tape.constant(vstack(windows));
  Var input = g.target;
  if (m.attention) {
    Var flat = record_tife(tape, windows, *m.attention, *tvars, keep_maps ? &g.maps : nullptr);
    input = tape.reshape(flat, rows, m.dims.features);
  }
  Var z = tape.dense(input, enc_w, enc_b, Activation::relu);
  g.reconstruction = tape.dense(z, dec_w, dec_b, Activation::linear);
  return g;
}

Matrix model_forward(const Matrix& x, const TiFeAEModel& m) {
  Tape tape;
  const Matrix batch[] = {x};
  return tape.value(record_model(tape, m, batch).reconstruction);
}

std::vector<Matrix> model_forward_batch(std::span<const Matrix> windows, const TiFeAEModel& m,
                                        std::size_t batch) {
  if (batch == 0) throw ContractError("model_forward_batch: batch must be positive");
  std::vector<Matrix> out;
  out.reserve(windows.size());
  const std::size_t t = m.dims.window, n = m.dims.features;
  for (std::size_t begin = 0; begin < windows.size(); begin += batch) {
    const std::size_t count = std::min(batch, windows.size() - begin);
    Tape tape;
    auto g = record_model(tape, m, windows.subspan(begin, count));
    const Matrix& r = tape.value(g.reconstruction);
    for (std::size_t b = 0; b < count; ++b) {
      auto first = r.values().begin() + static_cast<std::ptrdiff_t>(b * t * n);
      out.emplace_back(t, n, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(t * n)));
    }
  }
  return out;
}

namespace {

TiFeAEModel zero_model(const ModelDims& dims, bool with_attention) {
  if (dims.window == 0 || dims.features == 0 || dims.latent == 0 ||
      (with_attention && dims.attention_latent == 0)) {
    throw ContractError("init_params: dimensions must be positive");
  }
  TiFeAEModel m;
  m.dims = dims;
  if (with_attention) {
    m.attention = TiFeParams::zeros(dims.window, dims.features, dims.attention_latent);
  }
  m.ae.enc_weights = Matrix(dims.features, dims.latent);
  m.ae.enc_bias = Matrix(1, dims.latent);
  m.ae.dec_weights = Matrix(dims.latent, dims.features);
  m.ae.dec_bias = Matrix(1, dims.features);
  m.scale.min.assign(dims.features, 0.0);
  m.scale.max.assign(dims.features, 1.0);
  return m;
}

}  // namespace

TiFeAEModel init_params(std::uint64_t seed, const ModelDims& dims, bool with_attention) {
  TiFeAEModel m = zero_model(dims, with_attention);
  std::mt19937_64 rng(seed);
  for (auto& p : parameters(m)) {
    if (p.bias) continue;
    Matrix& w = *p.value;
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    for (double& v : w.values()) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      v = (2.0 * u - 1.0) * limit;
    }
  }
  return m;
}

// Persistence

namespace {

constexpr char kMagic[4] = {'T', 'I', 'F', 'E'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    std::uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    bytes(b, 4);
  }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    std::uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(bits >> (8 * i));
    bytes(b, 8);
  }
  void matrix(const Matrix& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (double v : m.values()) f64(v);
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw DataError("model file truncated at byte " + std::to_string(pos_));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }
  Matrix matrix(std::size_t rows, std::size_t cols, const std::string& name) {
    const std::uint32_t r = u32(), c = u32();
    if (r != rows || c != cols) {
      throw DataError("model file: " + name + " stored as [" + std::to_string(r) + "x" +
                      std::to_string(c) + "], expected [" + std::to_string(rows) + "x" +
                      std::to_string(cols) + "]");
    }
    need(std::size_t{r} * c * 8);
    Matrix m(r, c);
    for (double& v : m.values()) v = f64();
    return m;
  }
  bool at_end() const { return pos_ == data_.size(); }
  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const TiFeAEModel& model) {
  model.validate();
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kModelFormatVersion);
  w.u32(static_cast<std::uint32_t>(model.dims.window));
  w.u32(static_cast<std::uint32_t>(model.dims.features));
  w.u32(static_cast<std::uint32_t>(model.dims.attention_latent));
  w.u32(static_cast<std::uint32_t>(model.dims.latent));
  w.u32(model.has_attention() ? 1u : 0u);
  w.u32(static_cast<std::uint32_t>(model.scale.size()));
  for (const auto& p : parameters(model)) w.matrix(*p.value);
  for (std::size_t i = 0; i < model.scale.size(); ++i) {
    w.f64(model.scale.min[i]);
    w.f64(model.scale.max[i]);
  }
  return w.take();
}

TiFeAEModel deserialize_model(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.raw(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw DataError("not a TIFE model file");
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion) {
    throw DataError("unsupported model format version " + std::to_string(version));
  }
  ModelDims dims;
  dims.window = r.u32();
  dims.features = r.u32();
  dims.attention_latent = r.u32();
  dims.latent = r.u32();
  const std::uint32_t with_attention = r.u32();
  const std::uint32_t scale_count = r.u32();
  if (with_attention > 1) throw DataError("model file: bad attention flag");
  if (scale_count != dims.features) throw DataError("model file: scale count differs from N");

  TiFeAEModel m = zero_model(dims, with_attention == 1);
  for (auto& p : parameters(m)) {
    *p.value = r.matrix(p.value->rows(), p.value->cols(), p.block);
  }
  for (std::size_t i = 0; i < scale_count; ++i) {
    m.scale.min[i] = r.f64();
    m.scale.max[i] = r.f64();
  }
  if (!r.at_end()) throw DataError("model file: trailing bytes");
  m.validate();
  return m;
}

void save_model(const TiFeAEModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

TiFeAEModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace tife
