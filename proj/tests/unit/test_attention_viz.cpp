#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "tife/attention_viz.hpp"
#include "tife/autoencoder.hpp"
#include "tife/data.hpp"

using tife::Matrix;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("grayscale normalization") {
  const auto endpoints = tife::to_grayscale(Matrix{{0, 1}, {1, 0}});
  CHECK(endpoints.pixels == std::vector<std::uint8_t>{0, 255, 255, 0});
  const auto rounded = tife::to_grayscale(Matrix{{0, 0.5}, {1, 0.25}});
  CHECK(rounded.pixels == std::vector<std::uint8_t>{0, 128, 255, 64});
  const auto flat = tife::to_grayscale(Matrix(3, 2, 0.4));
  for (auto v : flat.pixels) CHECK(v == 0);
  CHECK(flat.width == 2);
  CHECK(flat.height == 3);
}

TEST_CASE("PGM bytes and round trip") {
  const auto dir = oracle::temp_dir("pgm");
  tife::write_pgm(Matrix{{0, 0.5}, {1, 0.25}}, dir / "a.pgm");
  const std::string expect = std::string("P5\n# min=0 max=1\n2 2\n255\n") + '\x00' + '\x80' + '\xff' + '\x40';
  CHECK(slurp(dir / "a.pgm") == expect);

  std::mt19937_64 rng(19);
  const Matrix m = tife::row_softmax(oracle::random_matrix(rng, 9, 9, -3, 3));
  tife::write_pgm(m, dir / "m.pgm");
  const auto img = tife::read_pgm(dir / "m.pgm");
  REQUIRE(img.pixels.size() == 81);
  for (std::size_t a = 0; a < 81; ++a)
    for (std::size_t b = 0; b < 81; ++b)
      if (m.values()[a] >= m.values()[b]) CHECK(img.pixels[a] >= img.pixels[b]);
  CHECK(img.min == doctest::Approx(*std::min_element(m.values().begin(), m.values().end())));
}

TEST_CASE("attention CSV export") {
  const auto dir = oracle::temp_dir("attn_csv");
  const tife::AttentionMaps maps{Matrix(4, 4, 0.25), Matrix{{1.0}}};
  const std::string prefix = (dir / "w0").string();
  tife::export_attention_csv(maps, prefix);
  CHECK(slurp(prefix + "_feature.csv") == "1\n");
  CHECK(slurp(prefix + "_time.csv") == "0.25,0.25,0.25,0.25\n0.25,0.25,0.25,0.25\n0.25,0.25,0.25,0.25\n0.25,0.25,0.25,0.25\n");

  std::mt19937_64 rng(23);
  const Matrix m = tife::row_softmax(oracle::random_matrix(rng, 12, 12, -4, 4));
  tife::write_matrix_csv(m, dir / "m.csv");
  CHECK(tife::max_abs_diff(tife::read_matrix_csv(dir / "m.csv"), m) <= 1e-15);

  tife::export_heatmap(maps, prefix);
  CHECK(std::filesystem::exists(prefix + "_time.pgm"));
  CHECK(std::filesystem::exists(prefix + "_feature.pgm"));
}

TEST_CASE("map comparison") {
  const tife::AttentionMaps a{Matrix(3, 3, 1.0 / 3), Matrix(2, 2, 0.5)};
  const auto same = tife::compare_maps(a, a);
  CHECK(same.time_max_abs_diff == 0.0);
  CHECK(same.feature_max_abs_diff == 0.0);
  for (double v : same.time_column_mean_diff) CHECK(v == 0.0);

  auto b = a;
  b.time_map(1, 2) += 0.125;
  const auto diff = tife::compare_maps(b, a);
  CHECK(diff.time_max_abs_diff == doctest::Approx(0.125));
  CHECK(diff.time_column_mean_diff[2] == doctest::Approx(0.125 / 3));
  CHECK(diff.time_column_mean_diff[0] == 0.0);

  const tife::AttentionMaps c{Matrix(2, 2, 0.5), Matrix(2, 2, 0.5)};
  CHECK_THROWS_AS(tife::compare_maps(a, c), tife::ShapeError);

  const tife::AttentionMaps list[] = {a, b};
  const auto mean = tife::mean_maps(list);
  CHECK(mean.time_map(1, 2) == doctest::Approx(1.0 / 3 + 0.0625));
}

TEST_CASE("spike window shifts attention mass in the spike column") {
  const auto [scaled, params] = tife::min_max_scale(tife::build_data1(336));
  const Matrix spiked = tife::make_windows(scaled, 168, 168).windows[0].matrix;
  Matrix clean = spiked;
  clean(48, 0) = 0.0;                   // Wednesday 00:00 is idle
  clean(60, 0) = 1.0 / params.max[0];   // Wednesday 12:00 is at full load
  const auto model = tife::init_params(1, {168, 1, 4, 4}, true);
  const auto cmp = tife::compare_maps(tife::attention_maps(spiked, *model.attention),
                                      tife::attention_maps(clean, *model.attention));
  CHECK(cmp.time_column_mean_diff[48] > 0.0);
  CHECK(cmp.time_column_mean_diff[60] < 0.0);
  CHECK(cmp.time_max_abs_diff > 0.0);
}
