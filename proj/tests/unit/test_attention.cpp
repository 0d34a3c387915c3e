#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "tife/attention.hpp"

using tife::Matrix;
using tife::TiFeParams;

namespace {

TiFeParams random_params(std::mt19937_64& rng, std::size_t t, std::size_t n, std::size_t da) {
  TiFeParams p = TiFeParams::zeros(t, n, da);
  for (Matrix* m : {&p.f_weights, &p.f_bias, &p.g_weights, &p.g_bias, &p.h_weights, &p.h_bias}) {
    *m = oracle::random_matrix(rng, m->rows(), m->cols(), -0.5, 0.5);
  }
  return p;
}

oracle::Grid scaled(oracle::Grid g, double s) {
  for (auto& r : g)
    for (double& v : r) v *= s;
  return g;
}

}  // namespace

TEST_CASE("time attention hand cases") {
  const Matrix x1{{0.3, -2.0}};
  const auto single = tife::time_attention(x1);
  CHECK(single.map == Matrix{{1.0}});
  CHECK(single.weighted == x1);

  const auto zero = tife::time_attention(Matrix(4, 3));
  for (double v : zero.map.values()) CHECK(v == 0.25);
  for (double v : zero.weighted.values()) CHECK(v == 0.0);

  const auto eye = tife::time_attention(Matrix::identity(2));
  const double hi = std::exp(1 / std::sqrt(2.0)) / (std::exp(1 / std::sqrt(2.0)) + 1.0);
  CHECK(std::abs(eye.map(0, 0) - hi) < 1e-15);
  CHECK(std::abs(eye.map(1, 1) - hi) < 1e-15);
  CHECK(std::abs(eye.map(0, 1) - (1 - hi)) < 1e-15);
  CHECK(hi == doctest::Approx(0.6698).epsilon(1e-4));
}

TEST_CASE("feature attention hand cases") {
  const Matrix col{{1}, {2}, {3}};
  const auto one = tife::feature_attention(col);
  CHECK(one.map == Matrix{{1.0}});
  CHECK(one.weighted == tife::transpose(col));

  const auto zero = tife::feature_attention(Matrix(5, 4));
  for (double v : zero.map.values()) CHECK(v == 0.25);

  const Matrix twin{{1, 1}, {0.5, 0.5}, {-2, -2}};
  const auto same = tife::feature_attention(twin);
  CHECK(same.map(0, 1) == same.map(1, 0));
  CHECK(same.map(0, 0) == same.map(1, 0));
  CHECK(same.map(0, 1) == same.map(1, 1));
}

TEST_CASE("attention maps match the scaled-product oracle") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t t = 1 + trial % 11, n = 1 + trial % 5;
    const Matrix x = oracle::random_matrix(rng, t, n);
    const auto g = oracle::to_grid(x);
    const auto gt = oracle::transpose(g);
    const auto at = oracle::softmax_rows(scaled(oracle::matmul(g, gt), 1 / std::sqrt(double(n))));
    const auto af = oracle::softmax_rows(scaled(oracle::matmul(gt, g), 1 / std::sqrt(double(t))));
    const auto time = tife::time_attention(x);
    const auto feat = tife::feature_attention(x);
    CHECK(oracle::max_abs_diff(at, time.map) <= 1e-12);
    CHECK(oracle::max_abs_diff(af, feat.map) <= 1e-12);
    CHECK(oracle::max_abs_diff(oracle::matmul(at, g), time.weighted) <= 1e-12);
    CHECK(oracle::max_abs_diff(oracle::matmul(af, gt), feat.weighted) <= 1e-12);
  }
}

TEST_CASE("tife_forward hand evaluation") {
  TiFeParams p = TiFeParams::zeros(2, 1, 1);
  CHECK(tife::tife_forward(Matrix{{1}, {1}}, p) == Matrix(2, 1));

  p.f_weights = Matrix{{1}};
  p.g_weights = Matrix{{1}, {1}};
  p.h_weights = Matrix(3, 2, 1.0);
  CHECK(tife::tife_forward(Matrix{{1}, {1}}, p) == Matrix{{4}, {4}});
}

TEST_CASE("tife_forward rejects mismatched windows") {
  const TiFeParams p = TiFeParams::zeros(4, 2, 3);
  CHECK_THROWS_AS(tife::tife_forward(Matrix(4, 3), p), tife::ShapeError);
  CHECK_THROWS_AS(tife::tife_forward(Matrix(5, 2), p), tife::ShapeError);
}

TEST_CASE("tife_forward follows the stated composition") {
  std::mt19937_64 rng(8);
  const std::size_t t = 5, n = 3, da = 4;
  const TiFeParams p = random_params(rng, t, n, da);
  const Matrix x = oracle::random_matrix(rng, t, n, 0, 1);
  const auto g = oracle::to_grid(x);
  const auto gt = oracle::transpose(g);
  const auto at = oracle::softmax_rows(scaled(oracle::matmul(g, gt), 1 / std::sqrt(double(n))));
  const auto af = oracle::softmax_rows(scaled(oracle::matmul(gt, g), 1 / std::sqrt(double(t))));
  const auto fo = oracle::dense(oracle::to_grid(p.f_weights), oracle::to_grid(p.f_bias)[0],
                                oracle::matmul(at, g), true);
  const auto go = oracle::dense(oracle::to_grid(p.g_weights), oracle::to_grid(p.g_bias)[0],
                                oracle::matmul(af, gt), true);
  oracle::Grid flat(1);
  for (const auto& r : fo) flat[0].insert(flat[0].end(), r.begin(), r.end());
  for (const auto& r : go) flat[0].insert(flat[0].end(), r.begin(), r.end());
  const auto h = oracle::dense(oracle::to_grid(p.h_weights), oracle::to_grid(p.h_bias)[0], flat, false);
  oracle::Grid expect(t, std::vector<double>(n));
  for (std::size_t i = 0; i < t; ++i)
    for (std::size_t j = 0; j < n; ++j) expect[i][j] = h[0][i * n + j];
  CHECK(oracle::max_abs_diff(expect, tife::tife_forward(x, p)) <= 1e-12);
}

TEST_CASE("attention stage gradients match central differences") {
  std::mt19937_64 rng(12);
  TiFeParams p = random_params(rng, 6, 2, 3);
  const Matrix x = oracle::random_matrix(rng, 6, 2, 0, 1);

  tife::Tape tape;
  const auto vars = tife::register_parameters(tape, p);
  const Matrix windows[] = {x};
  const auto grads = tape.backward(tape.mean_square(tife::record_tife(tape, windows, p, vars)));

  Matrix* blocks[] = {&p.f_weights, &p.f_bias, &p.g_weights, &p.g_bias, &p.h_weights, &p.h_bias};
  REQUIRE(grads.size() == 6);
  const double h = 1e-5;
  for (std::size_t k = 0; k < 6; ++k) {
    double worst = 0.0;
    for (std::size_t i = 0; i < blocks[k]->size(); ++i) {
      double& w = blocks[k]->values()[i];
      const double saved = w;
      w = saved + h;
      const double up = tife::mean_square(tife::tife_forward(x, p));
      w = saved - h;
      const double down = tife::mean_square(tife::tife_forward(x, p));
      w = saved;
      const double num = (up - down) / (2 * h);
      const double ana = grads[k].values()[i];
      worst = std::max(worst, std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-8}));
    }
    CAPTURE(k);
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("attention_maps is the code path used inside the forward pass") {
  std::mt19937_64 rng(2);
  const TiFeParams p = random_params(rng, 7, 3, 2);
  const Matrix a = oracle::random_matrix(rng, 7, 3);
  const Matrix b = oracle::random_matrix(rng, 7, 3);

  const auto ma = tife::attention_maps(a, p);
  CHECK(ma.time_map == tife::time_attention(a).map);
  CHECK(ma.feature_map == tife::feature_attention(a).map);
  CHECK(tife::attention_maps(a, p).time_map == ma.time_map);

  tife::Tape tape;
  const auto vars = tife::register_parameters(tape, p);
  std::vector<tife::AttentionMaps> maps;
  const Matrix windows[] = {a, b};
  const auto out = tife::record_tife(tape, windows, p, vars, &maps);
  REQUIRE(maps.size() == 2);
  CHECK(maps[0].time_map == ma.time_map);
  CHECK(maps[1].feature_map == tife::attention_maps(b, p).feature_map);
  const Matrix row1 = tife::reshape(tife::tife_forward(b, p), 1, 21);
  for (std::size_t j = 0; j < 21; ++j) CHECK(tape.value(out)(1, j) == row1(0, j));
}

TEST_CASE("feature permutation relabels the feature map") {
  std::mt19937_64 rng(17);
  const Matrix x = oracle::random_matrix(rng, 6, 3);
  const std::size_t perm[] = {2, 0, 1};
  Matrix px(6, 3);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 3; ++j) px(i, j) = x(i, perm[j]);
  const auto a = tife::feature_attention(x).map;
  const auto b = tife::feature_attention(px).map;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(b(i, j) == doctest::Approx(a(perm[i], perm[j])).epsilon(1e-12));
  CHECK(tife::max_abs_diff(tife::time_attention(x).map, tife::time_attention(px).map) < 1e-12);
}
