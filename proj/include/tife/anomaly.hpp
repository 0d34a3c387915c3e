#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include "tife/autoencoder.hpp"
#include "tife/data.hpp"
#include "tife/matrix.hpp"

namespace tife {

/// How squared errors of overlapping windows are combined at a point.
enum class Aggregation { mean, max };

struct WindowScores {
  std::vector<double> window_errors;    // per-window MSE
  std::vector<std::size_t> window_starts;
  Matrix point_errors;                  // covered_length × N
  std::vector<std::size_t> coverage;    // windows covering each time index
};

/// Reconstruction errors of every window and of every covered point.
WindowScores score_windows(const TiFeAEModel& model, const Dataset& data,
                           Aggregation agg = Aggregation::mean);

/// mean(errors) + k·std(errors), population standard deviation.
double compute_threshold(std::span<const double> errors, double k = 3.0);

struct FlaggedPoint {
  std::size_t time_index;
  std::size_t feature;
  bool operator==(const FlaggedPoint&) const = default;
};

struct AnomalyReport {
  Matrix point_errors;
  std::vector<double> window_errors;
  std::vector<std::size_t> window_starts;
  double threshold = 0.0;
  double k = 3.0;
  std::vector<FlaggedPoint> flagged;  // time-major order
};

/// Windows `series` (already scaled to model units) at `stride`, scores them,
/// and flags points whose aggregated error exceeds the threshold computed
/// from the same per-point errors.
AnomalyReport detect(const TiFeAEModel& model, const TimeSeries& series, std::size_t stride,
                     double k = 3.0, Aggregation agg = Aggregation::mean);

/// `# threshold=<v> k=<k>` then `time_index,timestamp,feature,error,flagged`.
void write_report_csv(const AnomalyReport& report, const TimeSeries& series,
                      const std::filesystem::path& path);

/// Mean of window reconstructions at every covered point, covered_length × N.
Matrix reconstruct_series(const TiFeAEModel& model, const Dataset& data);

}  // namespace tife
