#include "tife/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tife {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string());
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer list");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::string Matrix::shape_string() const {
  std::ostringstream os;
  os << '[' << rows_ << 'x' << cols_ << ']';
  return os.str();
}

std::string shape_of(const Matrix& m) { return m.shape_string(); }

// GEMM kernels. C is accumulated in 4x8 register tiles over cache-sized
// blocks of the shared dimension. The summation order for every output entry
// is a fixed function of the shapes, so results are deterministic.

namespace {

constexpr std::size_t kBlockK = 128;
constexpr std::size_t kTileRows = 4;
constexpr std::size_t kTileCols = 8;

// Strided view of the left operand: element (r, p) lives at a[r*rs + p*ps].
struct LeftView {
  const double* a;
  std::size_t rs;
  std::size_t ps;
  double at(std::size_t r, std::size_t p) const { return a[r * rs + p * ps]; }
};

void tile_full(const LeftView& a, std::size_t i, const double* b, std::size_t ldb, double* c,
               std::size_t ldc, std::size_t j, std::size_t p0, std::size_t p1) {
  double acc[kTileRows][kTileCols];
  for (std::size_t r = 0; r < kTileRows; ++r)
    for (std::size_t q = 0; q < kTileCols; ++q) acc[r][q] = c[(i + r) * ldc + j + q];
  for (std::size_t p = p0; p < p1; ++p) {
    const double* brow = b + p * ldb + j;
    for (std::size_t r = 0; r < kTileRows; ++r) {
      const double ar = a.at(i + r, p);
      for (std::size_t q = 0; q < kTileCols; ++q) acc[r][q] += ar * brow[q];
    }
  }
  for (std::size_t r = 0; r < kTileRows; ++r)
    for (std::size_t q = 0; q < kTileCols; ++q) c[(i + r) * ldc + j + q] = acc[r][q];
}

void tile_edge(const LeftView& a, std::size_t i, std::size_t rows, const double* b,
               std::size_t ldb, double* c, std::size_t ldc, std::size_t j, std::size_t cols,
               std::size_t p0, std::size_t p1) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t q = 0; q < cols; ++q) {
      double s = c[(i + r) * ldc + j + q];
      for (std::size_t p = p0; p < p1; ++p) s += a.at(i + r, p) * b[p * ldb + j + q];
      c[(i + r) * ldc + j + q] = s;
    }
  }
}

// C (m×n) += A (m×k, strided) · B (k×n, row-major).
void gemm(const LeftView& a, const double* b, double* c, std::size_t m, std::size_t n,
          std::size_t k) {
  const std::size_t m_full = m - m % kTileRows;
  const std::size_t n_full = n - n % kTileCols;
  for (std::size_t p0 = 0; p0 < k; p0 += kBlockK) {
    const std::size_t p1 = std::min(k, p0 + kBlockK);
    for (std::size_t i = 0; i < m_full; i += kTileRows) {
      for (std::size_t j = 0; j < n_full; j += kTileCols) tile_full(a, i, b, n, c, n, j, p0, p1);
      if (n_full < n) tile_edge(a, i, kTileRows, b, n, c, n, n_full, n - n_full, p0, p1);
    }
    if (m_full < m) tile_edge(a, m_full, m - m_full, b, n, c, n, 0, n, p0, p1);
  }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: shape mismatch " + a.shape_string() + " x " + b.shape_string());
  }
  Matrix c(a.rows(), b.cols());
  gemm({a.values().data(), a.cols(), 1}, b.values().data(), c.values().data(), a.rows(),
       b.cols(), a.cols());
  return c;
}

Matrix matmul_at_b(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_at_b: shape mismatch " + a.shape_string() + "^T x " +
                     b.shape_string());
  }
  Matrix c(a.cols(), b.cols());
  gemm({a.values().data(), 1, a.cols()}, b.values().data(), c.values().data(), a.cols(),
       b.cols(), a.rows());
  return c;
}

Matrix matmul_a_bt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_a_bt: shape mismatch " + a.shape_string() + " x " +
                     b.shape_string() + "^T");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Matrix c(m, n);
  const double* ap = a.values().data();
  const double* bp = b.values().data();
  double* cp = c.values().data();
  constexpr std::size_t kRowsB = 64;
  for (std::size_t j0 = 0; j0 < n; j0 += kRowsB) {
    const std::size_t j1 = std::min(n, j0 + kRowsB);
    for (std::size_t i = 0; i < m; ++i) {
      const double* arow = ap + i * k;
      std::size_t j = j0;
      for (; j + 4 <= j1; j += 4) {
        const double* b0 = bp + j * k;
        const double* b1 = b0 + k;
        const double* b2 = b1 + k;
        const double* b3 = b2 + k;
        double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
        for (std::size_t p = 0; p < k; ++p) {
          const double av = arow[p];
          s0 += av * b0[p];
          s1 += av * b1[p];
          s2 += av * b2[p];
          s3 += av * b3[p];
        }
        cp[i * n + j] = s0;
        cp[i * n + j + 1] = s1;
        cp[i * n + j + 2] = s2;
        cp[i * n + j + 3] = s3;
      }
      for (; j < j1; ++j) {
        const double* brow = bp + j * k;
        double s = 0.0;
        for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
        cp[i * n + j] = s;
      }
    }
  }
  return c;
}

Matrix transpose(const Matrix& a) {
  Matrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

Matrix row_softmax(const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto in = a.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      z += o[j];
    }
    for (double& v : o) v /= z;
  }
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix c = a;
  auto cv = c.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] += bv[i];
  return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "sub");
  Matrix c = a;
  auto cv = c.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] -= bv[i];
  return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix c = a;
  auto cv = c.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] *= bv[i];
  return c;
}

Matrix scale(const Matrix& a, double s) {
  Matrix c = a;
  for (double& v : c.values()) v *= s;
  return c;
}

Matrix relu(const Matrix& a) {
  Matrix c = a;
  for (double& v : c.values()) v = v > 0.0 ? v : 0.0;
  return c;
}

Matrix affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  if (x.cols() != w.rows() || b.rows() != 1 || b.cols() != w.cols()) {
    throw ShapeError("affine: shape mismatch x" + x.shape_string() + " W" + w.shape_string() +
                     " b" + b.shape_string());
  }
  Matrix out = matmul(x, w);
  auto bias = b.row(0);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
  }
  return out;
}

Matrix dense(const Matrix& w, const Matrix& b, const Matrix& x, Activation act) {
  Matrix out = affine(x, w, b);
  return act == Activation::relu ? relu(out) : out;
}

Matrix vstack(std::span<const Matrix> parts) {
  if (parts.empty()) throw ShapeError("vstack: no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) {
      throw ShapeError("vstack: column mismatch " + parts.front().shape_string() + " vs " +
                       p.shape_string());
    }
    rows += p.rows();
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (const auto& p : parts) data.insert(data.end(), p.data().begin(), p.data().end());
  return Matrix(rows, cols, std::move(data));
}

Matrix reshape(const Matrix& a, std::size_t rows, std::size_t cols) {
  if (rows * cols != a.size()) {
    throw ShapeError("reshape: cannot view " + a.shape_string() + " as [" + std::to_string(rows) +
                     "x" + std::to_string(cols) + "]");
  }
  return Matrix(rows, cols, a.data());
}

double mean_square(const Matrix& a) {
  if (a.empty()) throw ContractError("mean_square: empty matrix");
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return s / static_cast<double>(a.size());
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

bool all_finite(const Matrix& a) {
  return std::all_of(a.values().begin(), a.values().end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace tife
