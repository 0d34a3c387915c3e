#include "tife/anomaly.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <string>

#include "tife/training.hpp"

namespace tife {

namespace {

std::size_t covered_length(const Dataset& data) {
  std::size_t len = 0;
  for (const auto& w : data.windows) len = std::max(len, w.start_index + data.window_length);
  return len;
}

void check_dims(const TiFeAEModel& model, const Dataset& data) {
  if (data.windows.empty()) throw ContractError("score_windows: empty dataset");
  if (data.window_length != model.dims.window || data.features != model.dims.features) {
    throw ShapeError("score_windows: dataset windows are [" + std::to_string(data.window_length) +
                     "x" + std::to_string(data.features) + "], model expects [" +
                     std::to_string(model.dims.window) + "x" +
                     std::to_string(model.dims.features) + "]");
  }
}

std::vector<Matrix> reconstructions(const TiFeAEModel& model, const Dataset& data) {
  std::vector<Matrix> inputs;
  inputs.reserve(data.windows.size());
  for (const auto& w : data.windows) inputs.push_back(w.matrix);
  return model_forward_batch(inputs, model);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

WindowScores score_windows(const TiFeAEModel& model, const Dataset& data, Aggregation agg) {
  check_dims(model, data);
  const std::size_t t_len = data.window_length, n = data.features;
  const std::size_t length = covered_length(data);
  const auto recon = reconstructions(model, data);

  WindowScores s;
  s.point_errors = Matrix(length, n);
  s.coverage.assign(length, 0);
  for (std::size_t w = 0; w < data.windows.size(); ++w) {
    const auto& win = data.windows[w];
    s.window_errors.push_back(mse_loss(recon[w], win.matrix));
    s.window_starts.push_back(win.start_index);
    for (std::size_t t = 0; t < t_len; ++t) {
      const std::size_t at = win.start_index + t;
      ++s.coverage[at];
      for (std::size_t j = 0; j < n; ++j) {
        const double d = recon[w](t, j) - win.matrix(t, j);
        double& slot = s.point_errors(at, j);
        slot = agg == Aggregation::mean ? slot + d * d : std::max(slot, d * d);
      }
    }
  }
  if (agg == Aggregation::mean) {
    for (std::size_t i = 0; i < length; ++i) {
      if (s.coverage[i] == 0) continue;
      for (double& v : s.point_errors.row(i)) v /= static_cast<double>(s.coverage[i]);
    }
  }
  return s;
}

double compute_threshold(std::span<const double> errors, double k) {
  if (errors.empty()) throw ContractError("compute_threshold: no errors");
  if (!(k > 0.0)) throw ContractError("compute_threshold: k must be positive");
  double mean = 0.0;
  for (double e : errors) mean += e;
  mean /= static_cast<double>(errors.size());
  double var = 0.0;
  for (double e : errors) var += (e - mean) * (e - mean);
  var /= static_cast<double>(errors.size());
  return mean + k * std::sqrt(var);
}

AnomalyReport detect(const TiFeAEModel& model, const TimeSeries& series, std::size_t stride,
                     double k, Aggregation agg) {
  if (series.features() != model.dims.features) {
    throw ShapeError("detect: series has N=" + std::to_string(series.features()) +
                     ", model expects N=" + std::to_string(model.dims.features));
  }
  const Dataset data = make_windows(series, model.dims.window, stride);
  WindowScores s = score_windows(model, data, agg);

  std::vector<double> covered;
  for (std::size_t i = 0; i < s.coverage.size(); ++i) {
    if (s.coverage[i] == 0) continue;
    for (double v : s.point_errors.row(i)) covered.push_back(v);
  }

  AnomalyReport r;
  r.k = k;
  r.threshold = compute_threshold(covered, k);
  for (std::size_t i = 0; i < s.coverage.size(); ++i) {
    if (s.coverage[i] == 0) continue;
    for (std::size_t j = 0; j < s.point_errors.cols(); ++j) {
      if (s.point_errors(i, j) > r.threshold) r.flagged.push_back({i, j});
    }
  }
  r.point_errors = std::move(s.point_errors);
  r.window_errors = std::move(s.window_errors);
  r.window_starts = std::move(s.window_starts);
  return r;
}

void write_report_csv(const AnomalyReport& report, const TimeSeries& series,
                      const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# threshold=" << format_double(report.threshold) << " k=" << format_double(report.k)
      << '\n';
  out << "time_index,timestamp,feature,error,flagged\n";
  std::size_t next = 0;
  for (std::size_t i = 0; i < report.point_errors.rows(); ++i) {
    for (std::size_t j = 0; j < report.point_errors.cols(); ++j) {
      bool flagged = false;
      if (next < report.flagged.size() && report.flagged[next] == FlaggedPoint{i, j}) {
        flagged = true;
        ++next;
      }
      const std::string name = j < series.names.size() ? series.names[j] : std::to_string(j);
      out << i << ',' << format_timestamp(series.time_at(i)) << ',' << name << ','
          << format_double(report.point_errors(i, j)) << ',' << (flagged ? 1 : 0) << '\n';
    }
  }
  if (!out) throw DataError("write failed for " + path.string());
}

Matrix reconstruct_series(const TiFeAEModel& model, const Dataset& data) {
  check_dims(model, data);
  const auto recon = reconstructions(model, data);
  const std::size_t length = covered_length(data);
  Matrix sum(length, data.features);
  std::vector<std::size_t> coverage(length, 0);
  for (std::size_t w = 0; w < data.windows.size(); ++w) {
    const std::size_t start = data.windows[w].start_index;
    for (std::size_t t = 0; t < data.window_length; ++t) {
      ++coverage[start + t];
      for (std::size_t j = 0; j < data.features; ++j) sum(start + t, j) += recon[w](t, j);
    }
  }
  for (std::size_t i = 0; i < length; ++i) {
    if (coverage[i] == 0) continue;
    for (double& v : sum.row(i)) v /= static_cast<double>(coverage[i]);
  }
  return sum;
}

}  // namespace tife
