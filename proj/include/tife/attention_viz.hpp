#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tife/attention.hpp"
#include "tife/matrix.hpp"

namespace tife {

/// One row per line, comma separated, shortest round-trip decimal form.
void write_matrix_csv(const Matrix& m, const std::filesystem::path& path);
Matrix read_matrix_csv(const std::filesystem::path& path);

/// Writes `<prefix>_time.csv` and `<prefix>_feature.csv`.
void export_attention_csv(const AttentionMaps& maps, const std::string& prefix);

/// Grayscale image normalized to the matrix's own [min, max].
struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
  double min = 0.0;
  double max = 0.0;
};

/// pixel = round(255·(a - min)/(max - min)); a constant matrix maps to 0.
GrayImage to_grayscale(const Matrix& m);

/// Binary PGM (P5) with a `# min=<v> max=<v>` comment line.
void write_pgm(const Matrix& m, const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);

/// Writes `<prefix>_time.pgm` and `<prefix>_feature.pgm`.
void export_heatmap(const AttentionMaps& maps, const std::string& prefix);

struct MapComparison {
  double time_max_abs_diff = 0.0;
  double feature_max_abs_diff = 0.0;
  std::vector<double> time_column_mean_diff;  // mean over rows of (a - b), per column
};

MapComparison compare_maps(const AttentionMaps& a, const AttentionMaps& b);

/// Elementwise mean of a set of maps with equal dimensions.
AttentionMaps mean_maps(std::span<const AttentionMaps> maps);

}  // namespace tife
