#include "tife/attention_viz.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tife/data.hpp"

namespace tife {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

void write_matrix_csv(const Matrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (j > 0) out << ',';
      out << format_double(r[j]);
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

Matrix read_matrix_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<double> data;
  std::size_t rows = 0, cols = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::size_t count = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(p, comma, v);
      if (ec != std::errc{} || ptr != comma) {
        throw DataError(path.string() + ":" + std::to_string(rows + 1) + ": bad number");
      }
      data.push_back(v);
      ++count;
      p = comma + 1;
    }
    if (rows == 0) cols = count;
    if (count != cols) throw DataError(path.string() + ": ragged row " + std::to_string(rows + 1));
    ++rows;
  }
  return Matrix(rows, cols, std::move(data));
}

void export_attention_csv(const AttentionMaps& maps, const std::string& prefix) {
  write_matrix_csv(maps.time_map, prefix + "_time.csv");
  write_matrix_csv(maps.feature_map, prefix + "_feature.csv");
}

GrayImage to_grayscale(const Matrix& m) {
  GrayImage img;
  img.width = m.cols();
  img.height = m.rows();
  if (m.empty()) return img;
  const auto [lo, hi] = std::minmax_element(m.values().begin(), m.values().end());
  img.min = *lo;
  img.max = *hi;
  const double range = img.max - img.min;
  img.pixels.reserve(m.size());
  for (double v : m.values()) {
    const double level = range > 0.0 ? std::round(255.0 * (v - img.min) / range) : 0.0;
    img.pixels.push_back(static_cast<std::uint8_t>(std::clamp(level, 0.0, 255.0)));
  }
  return img;
}

void write_pgm(const Matrix& m, const std::filesystem::path& path) {
  const GrayImage img = to_grayscale(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P5\n# min=" << format_double(img.min) << " max=" << format_double(img.max) << '\n'
      << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string magic;
  std::getline(in, magic);
  if (magic != "P5") throw DataError(path.string() + ": not a binary PGM");

  GrayImage img;
  std::string line;
  while (in.peek() == '#') {
    std::getline(in, line);
    std::istringstream comment(line.substr(1));
    std::string token;
    while (comment >> token) {
      if (token.rfind("min=", 0) == 0) img.min = std::stod(token.substr(4));
      if (token.rfind("max=", 0) == 0) img.max = std::stod(token.substr(4));
    }
  }
  int maxval = 0;
  in >> img.width >> img.height >> maxval;
  in.get();
  if (!in || maxval != 255) throw DataError(path.string() + ": unsupported PGM header");
  img.pixels.resize(img.width * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != img.pixels.size()) {
    throw DataError(path.string() + ": truncated pixel data");
  }
  return img;
}

void export_heatmap(const AttentionMaps& maps, const std::string& prefix) {
  write_pgm(maps.time_map, prefix + "_time.pgm");
  write_pgm(maps.feature_map, prefix + "_feature.pgm");
}

MapComparison compare_maps(const AttentionMaps& a, const AttentionMaps& b) {
  if (!a.time_map.same_shape(b.time_map) || !a.feature_map.same_shape(b.feature_map)) {
    throw ShapeError("compare_maps: dimension mismatch " + a.time_map.shape_string() + "/" +
                     a.feature_map.shape_string() + " vs " + b.time_map.shape_string() + "/" +
                     b.feature_map.shape_string());
  }
  MapComparison c;
  c.time_max_abs_diff = max_abs_diff(a.time_map, b.time_map);
  c.feature_max_abs_diff = max_abs_diff(a.feature_map, b.feature_map);
  const std::size_t rows = a.time_map.rows(), cols = a.time_map.cols();
  c.time_column_mean_diff.assign(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      c.time_column_mean_diff[j] += a.time_map(i, j) - b.time_map(i, j);
  for (double& v : c.time_column_mean_diff) v /= static_cast<double>(rows);
  return c;
}

AttentionMaps mean_maps(std::span<const AttentionMaps> maps) {
  if (maps.empty()) throw ContractError("mean_maps: no maps");
  AttentionMaps acc{Matrix(maps[0].time_map.rows(), maps[0].time_map.cols()),
                    Matrix(maps[0].feature_map.rows(), maps[0].feature_map.cols())};
  for (const auto& m : maps) {
    acc.time_map = add(acc.time_map, m.time_map);
    acc.feature_map = add(acc.feature_map, m.feature_map);
  }
  const double inv = 1.0 / static_cast<double>(maps.size());
  return {scale(acc.time_map, inv), scale(acc.feature_map, inv)};
}

}  // namespace tife
