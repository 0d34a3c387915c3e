#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tife/matrix.hpp"

namespace tife {

/// Raised for malformed input data (bad CSV, missing columns, irregular time).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Seconds since 1970-01-01 00:00:00, no timezone.
using Timestamp = std::int64_t;

inline constexpr std::int64_t kSecondsPerHour = 3600;
inline constexpr std::size_t kHoursPerWeek = 168;

enum class Weekday : int { monday = 0, tuesday, wednesday, thursday, friday, saturday, sunday };

/// Parses `YYYY-MM-DD HH:MM:SS`. Throws DataError.
Timestamp parse_timestamp(const std::string& text);
std::string format_timestamp(Timestamp t);
Weekday weekday_of(Timestamp t);
int hour_of_day(Timestamp t);
/// Midnight of the first 2024 date falling on `day` (2024-01-01 is a Monday).
Timestamp reference_start(Weekday day);

/// Multivariate, regularly sampled series. NaN marks a missing reading.
struct TimeSeries {
  Timestamp start = 0;
  std::int64_t step = kSecondsPerHour;  // seconds
  std::vector<std::string> names;
  Matrix values;  // L×N

  std::size_t length() const noexcept { return values.rows(); }
  std::size_t features() const noexcept { return values.cols(); }
  Timestamp time_at(std::size_t index) const {
    return start + static_cast<std::int64_t>(index) * step;
  }
  bool has_missing() const;
};

struct Window {
  std::size_t start_index = 0;
  Matrix matrix;  // T×N
};

struct Dataset {
  std::vector<Window> windows;
  std::size_t window_length = 0;  // T
  std::size_t features = 0;       // N
};

/// Per-feature min/max recorded at ingestion.
struct ScaleParams {
  std::vector<double> min;
  std::vector<double> max;

  std::size_t size() const noexcept { return min.size(); }
  bool operator==(const ScaleParams&) const = default;
};

// Synthetic generators

/// Typical weekly load: 1.0 on weekdays 09:00-19:00, 0.5 all Saturday, else 0.
TimeSeries gen_data1_typical(std::size_t hours, Weekday start = Weekday::monday);

/// One week of the typical profile plus 0.2 on weekday hours before 09:00.
TimeSeries gen_data1_anomalous_week(Weekday start = Weekday::monday);

/// Hour offset of the replaced week and the two injected spikes.
struct Data1Layout {
  std::size_t anomalous_week_begin = 336;
  std::size_t high_spike_hour = 48;
  double high_spike_value = 1.5;
  std::size_t low_spike_hour = 60;
  double low_spike_value = 0.2;
};

/// The typical profile with the third week replaced by the anomalous profile
/// and two value spikes written in. Parts of the layout beyond `hours` are
/// skipped, so any length of at least one week is accepted.
TimeSeries build_data1(std::size_t hours = 8760, Weekday start = Weekday::monday,
                       const Data1Layout& layout = {});

/// Two AC units alternating whole weeks (AC1 active in weeks 1, 3, ...). If a
/// day index is given, the units' readings are exchanged for those 24 hours.
TimeSeries gen_data2(std::size_t weeks, std::optional<std::size_t> swap_day = std::nullopt,
                     Weekday start = Weekday::monday);

// Ingestion

TimeSeries load_csv(const std::filesystem::path& path, const std::string& timestamp_column,
                    const std::vector<std::string>& feature_columns);
/// Loads using the first column as timestamp and every other column as a feature.
TimeSeries load_csv(const std::filesystem::path& path);
/// Writes the ingestion format; missing values become empty cells.
void write_csv(const TimeSeries& series, const std::filesystem::path& path,
               const std::string& timestamp_column = "timestamp");

TimeSeries impute_mean(const TimeSeries& series);

/// load_csv, then resample_hourly when sampled faster than hourly, then
/// impute_mean. An empty feature list selects every non-timestamp column.
TimeSeries ingest_csv(const std::filesystem::path& path, const std::string& timestamp_column = "",
                      const std::vector<std::string>& feature_columns = {});

std::pair<TimeSeries, ScaleParams> min_max_scale(const TimeSeries& series);
/// Applies previously recorded parameters (values may leave [0, 1]).
TimeSeries apply_scale(const TimeSeries& series, const ScaleParams& params);
Matrix apply_scale(const Matrix& values, const ScaleParams& params);
Matrix inverse_scale(const Matrix& scaled, const ScaleParams& params);

TimeSeries resample_hourly(const TimeSeries& series);

Dataset make_windows(const TimeSeries& series, std::size_t window_length, std::size_t stride);
std::size_t window_count(std::size_t length, std::size_t window_length, std::size_t stride);

}  // namespace tife
