#pragma once

// Independent reference implementations used by the tests. These share no
// code with the library: plain loops over nested vectors.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tife/matrix.hpp"

namespace oracle {

using Grid = std::vector<std::vector<double>>;

inline Grid to_grid(const tife::Matrix& m) {
  Grid g(m.rows(), std::vector<double>(m.cols()));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) g[i][j] = m(i, j);
  return g;
}

inline Grid matmul(const Grid& a, const Grid& b) {
  const std::size_t m = a.size(), k = b.size(), n = b.empty() ? 0 : b[0].size();
  Grid c(m, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a[i][p] * b[p][j];
      c[i][j] = s;
    }
  return c;
}

inline Grid transpose(const Grid& a) {
  Grid t(a.empty() ? 0 : a[0].size(), std::vector<double>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) t[j][i] = a[i][j];
  return t;
}

// Direct exp/sum without max subtraction (inputs in tests stay small).
inline Grid softmax_rows(const Grid& a) {
  Grid out = a;
  for (auto& row : out) {
    double z = 0.0;
    for (double& v : row) z += (v = std::exp(v));
    for (double& v : row) v /= z;
  }
  return out;
}

inline Grid dense(const Grid& w, const std::vector<double>& b, const Grid& x, bool relu) {
  Grid out(x.size(), std::vector<double>(b.size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t o = 0; o < b.size(); ++o) {
      double s = b[o];
      for (std::size_t p = 0; p < w.size(); ++p) s += x[i][p] * w[p][o];
      out[i][o] = relu && s < 0.0 ? 0.0 : s;
    }
  return out;
}

inline double max_abs_diff(const Grid& a, const tife::Matrix& m) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) d = std::max(d, std::abs(a[i][j] - m(i, j)));
  return d;
}

inline tife::Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c,
                                  double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  tife::Matrix m(r, c);
  for (double& v : m.values()) v = u(rng);
  return m;
}

// Population mean + k * std.
inline double threshold(const std::vector<double>& e, double k) {
  double mean = 0.0;
  for (double v : e) mean += v;
  mean /= static_cast<double>(e.size());
  double var = 0.0;
  for (double v : e) var += (v - mean) * (v - mean);
  return mean + k * std::sqrt(var / static_cast<double>(e.size()));
}

// Typical weekly profile for an hour offset from a Monday midnight.
inline double typical_profile(std::size_t hour) {
  const std::size_t day = (hour / 24) % 7;
  const std::size_t h = hour % 24;
  if (day < 5 && h >= 9 && h <= 19) return 1.0;
  if (day == 5) return 0.5;
  return 0.0;
}

inline std::size_t count_windows(std::size_t length, std::size_t t, std::size_t stride) {
  std::size_t n = 0;
  for (std::size_t s = 0; s + t <= length; s += stride) ++n;
  return n;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("tife_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
