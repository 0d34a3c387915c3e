#include "tife/data.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <limits>

namespace tife {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

using std::chrono::days;
using std::chrono::sys_days;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// Typical weekly profile value for a given weekday/hour.
double typical_value(Weekday day, int hour) {
  if (day <= Weekday::friday) return (hour >= 9 && hour <= 19) ? 1.0 : 0.0;
  if (day == Weekday::saturday) return 0.5;
  return 0.0;
}

double anomalous_value(Weekday day, int hour) {
  if (day <= Weekday::friday && hour >= 0 && hour < 9) return 0.2;
  return typical_value(day, hour);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t");
  return s.substr(first, last - first + 1);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

}  // namespace

Timestamp parse_timestamp(const std::string& text) {
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  char tail = 0;
  const std::string t = trim(text);
  const int n = std::sscanf(t.c_str(), "%4d-%2d-%2d%*[ T]%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &s,
                            &tail);
  if (n != 6 || mo < 1 || mo > 12 || h > 23 || mi > 59 || s > 59 || h < 0 || mi < 0 || s < 0) {
    throw DataError("unparseable timestamp '" + t + "' (expected YYYY-MM-DD HH:MM:SS)");
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(mo)},
                                        std::chrono::day{unsigned(d)}};
  if (!ymd.ok()) throw DataError("invalid calendar date '" + t + "'");
  const std::int64_t day_count = sys_days{ymd}.time_since_epoch().count();
  return day_count * 86400 + h * 3600 + mi * 60 + s;
}

std::string format_timestamp(Timestamp t) {
  const std::int64_t day_count = floor_div(t, 86400);
  const std::int64_t secs = t - day_count * 86400;
  const std::chrono::year_month_day ymd{sys_days{days{day_count}}};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02d:%02d:%02d", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), int(secs / 3600),
                int((secs / 60) % 60), int(secs % 60));
  return buf;
}

Weekday weekday_of(Timestamp t) {
  const std::chrono::weekday wd{sys_days{days{floor_div(t, 86400)}}};
  return static_cast<Weekday>((wd.c_encoding() + 6) % 7);
}

int hour_of_day(Timestamp t) {
  return static_cast<int>((t - floor_div(t, 86400) * 86400) / 3600);
}

Timestamp reference_start(Weekday day) {
  const sys_days monday{std::chrono::year{2024} / 1 / 1};
  return (monday + days{static_cast<int>(day)}).time_since_epoch().count() * 86400;
}

bool TimeSeries::has_missing() const {
  return std::any_of(values.values().begin(), values.values().end(),
                     [](double v) { return std::isnan(v); });
}

TimeSeries gen_data1_typical(std::size_t hours, Weekday start) {
  if (hours < kHoursPerWeek) {
    throw ContractError("gen_data1_typical: need at least 168 hours, got " +
                        std::to_string(hours));
  }
  TimeSeries s;
  s.start = reference_start(start);
  s.names = {"power"};
  s.values = Matrix(hours, 1);
  for (std::size_t i = 0; i < hours; ++i) {
    const Timestamp t = s.time_at(i);
    s.values(i, 0) = typical_value(weekday_of(t), hour_of_day(t));
  }
  return s;
}

TimeSeries gen_data1_anomalous_week(Weekday start) {
  TimeSeries s;
  s.start = reference_start(start);
  s.names = {"power"};
  s.values = Matrix(kHoursPerWeek, 1);
  for (std::size_t i = 0; i < kHoursPerWeek; ++i) {
    const Timestamp t = s.time_at(i);
    s.values(i, 0) = anomalous_value(weekday_of(t), hour_of_day(t));
  }
  return s;
}

TimeSeries build_data1(std::size_t hours, Weekday start, const Data1Layout& layout) {
  TimeSeries s = gen_data1_typical(hours, start);
  for (std::size_t i = 0; i < kHoursPerWeek; ++i) {
    const std::size_t at = layout.anomalous_week_begin + i;
    if (at >= hours) break;
    const Timestamp t = s.time_at(at);
    s.values(at, 0) = anomalous_value(weekday_of(t), hour_of_day(t));
  }
  if (layout.high_spike_hour < hours) s.values(layout.high_spike_hour, 0) = layout.high_spike_value;
  if (layout.low_spike_hour < hours) s.values(layout.low_spike_hour, 0) = layout.low_spike_value;
  return s;
}

TimeSeries gen_data2(std::size_t weeks, std::optional<std::size_t> swap_day, Weekday start) {
  if (weeks < 4) throw ContractError("gen_data2: need at least 4 weeks, got " + std::to_string(weeks));
  const std::size_t hours = weeks * kHoursPerWeek;
  if (swap_day && *swap_day >= weeks * 7) {
    throw ContractError("gen_data2: swap day " + std::to_string(*swap_day) + " beyond " +
                        std::to_string(weeks * 7) + " days");
  }
  TimeSeries s;
  s.start = reference_start(start);
  s.names = {"ac1", "ac2"};
  s.values = Matrix(hours, 2);
  for (std::size_t i = 0; i < hours; ++i) {
    const Timestamp t = s.time_at(i);
    const double v = typical_value(weekday_of(t), hour_of_day(t));
    const std::size_t active = (i / kHoursPerWeek) % 2;
    s.values(i, active) = v;
  }
  if (swap_day) {
    for (std::size_t i = *swap_day * 24; i < (*swap_day + 1) * 24; ++i) {
      std::swap(s.values(i, 0), s.values(i, 1));
    }
  }
  return s;
}

TimeSeries load_csv(const std::filesystem::path& path, const std::string& timestamp_column,
                    const std::vector<std::string>& feature_columns) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError(where(path, 1) + "empty file");
  std::vector<std::string> header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  auto column_of = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError(path.string() + ": unknown column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t ts_col = column_of(timestamp_column);
  std::vector<std::size_t> cols;
  for (const auto& f : feature_columns) cols.push_back(column_of(f));
  if (cols.empty()) throw DataError(path.string() + ": no feature columns selected");

  std::vector<Timestamp> times;
  std::vector<double> data;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError(where(path, line_no) + "expected " + std::to_string(header.size()) +
                      " cells, found " + std::to_string(cells.size()));
    }
    Timestamp t = 0;
    try {
      t = parse_timestamp(cells[ts_col]);
    } catch (const DataError& e) {
      throw DataError(where(path, line_no) + e.what());
    }
    if (!times.empty() && t <= times.back()) {
      throw DataError(where(path, line_no) + "timestamp " + format_timestamp(t) +
                      " is not after " + format_timestamp(times.back()));
    }
    if (times.size() >= 2 && t - times.back() != times[1] - times[0]) {
      throw DataError(where(path, line_no) + "irregular sampling interval at " +
                      format_timestamp(t));
    }
    times.push_back(t);
    for (std::size_t c : cols) {
      const std::string cell = trim(cells[c]);
      if (cell.empty()) {
        data.push_back(kMissing);
        continue;
      }
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw DataError(where(path, line_no) + "bad number '" + cell + "' in column '" +
                        header[c] + "'");
      }
      data.push_back(v);
    }
  }
  if (times.empty()) throw DataError(path.string() + ": no data rows");

  TimeSeries s;
  s.start = times.front();
  s.step = times.size() >= 2 ? times[1] - times[0] : kSecondsPerHour;
  s.names = feature_columns;
  s.values = Matrix(times.size(), cols.size(), std::move(data));
  return s;
}

TimeSeries load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(where(path, 1) + "empty file");
  auto header = split_csv_line(line);
  if (header.size() < 2) throw DataError(where(path, 1) + "need a timestamp and a feature column");
  for (auto& h : header) h = trim(h);
  return load_csv(path, header.front(), {header.begin() + 1, header.end()});
}

void write_csv(const TimeSeries& series, const std::filesystem::path& path,
               const std::string& timestamp_column) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << timestamp_column;
  for (const auto& n : series.names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < series.length(); ++i) {
    out << format_timestamp(series.time_at(i));
    for (double v : series.values.row(i)) {
      out << ',';
      if (!std::isnan(v)) out << format_double(v);
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

TimeSeries impute_mean(const TimeSeries& series) {
  TimeSeries out = series;
  for (std::size_t j = 0; j < series.features(); ++j) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < series.length(); ++i) {
      const double v = series.values(i, j);
      if (!std::isnan(v)) {
        sum += v;
        ++count;
      }
    }
    if (count == 0) {
      const std::string name = j < series.names.size() ? series.names[j] : std::to_string(j);
      throw DataError("impute_mean: feature '" + name + "' has no observed values");
    }
    const double mean = sum / static_cast<double>(count);
    for (std::size_t i = 0; i < series.length(); ++i) {
      if (std::isnan(out.values(i, j))) out.values(i, j) = mean;
    }
  }
  return out;
}

TimeSeries ingest_csv(const std::filesystem::path& path, const std::string& timestamp_column,
                      const std::vector<std::string>& feature_columns) {
  TimeSeries s;
  if (timestamp_column.empty() && feature_columns.empty()) {
    s = load_csv(path);
  } else if (feature_columns.empty()) {
    std::ifstream in(path);
    std::string line;
    if (!in || !std::getline(in, line)) throw DataError("cannot read header of " + path.string());
    std::vector<std::string> features;
    for (auto& h : split_csv_line(line)) {
      if (trim(h) != timestamp_column) features.push_back(trim(h));
    }
    s = load_csv(path, timestamp_column, features);
  } else {
    s = load_csv(path, timestamp_column.empty() ? "timestamp" : timestamp_column, feature_columns);
  }
  if (s.step < kSecondsPerHour) s = resample_hourly(s);
  if (s.step != kSecondsPerHour) {
    throw DataError(path.string() + ": sampling interval of " + std::to_string(s.step) +
                    " s is not hourly and cannot be resampled");
  }
  return impute_mean(s);
}

std::pair<TimeSeries, ScaleParams> min_max_scale(const TimeSeries& series) {
  if (series.has_missing()) throw ContractError("min_max_scale: impute missing values first");
  ScaleParams p;
  for (std::size_t j = 0; j < series.features(); ++j) {
    double lo = series.values(0, j), hi = lo;
    for (std::size_t i = 1; i < series.length(); ++i) {
      lo = std::min(lo, series.values(i, j));
      hi = std::max(hi, series.values(i, j));
    }
    p.min.push_back(lo);
    p.max.push_back(hi);
  }
  return {apply_scale(series, p), p};
}

Matrix apply_scale(const Matrix& values, const ScaleParams& p) {
  if (values.cols() != p.size()) {
    throw ShapeError("apply_scale: " + std::to_string(values.cols()) + " features, params for " +
                     std::to_string(p.size()));
  }
  Matrix out = values;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double range = p.max[j] - p.min[j];
    for (std::size_t i = 0; i < out.rows(); ++i) {
      // constant features map to zero
      out(i, j) = range > 0.0 ? (values(i, j) - p.min[j]) / range : 0.0;
    }
  }
  return out;
}

TimeSeries apply_scale(const TimeSeries& series, const ScaleParams& p) {
  TimeSeries out = series;
  out.values = apply_scale(series.values, p);
  return out;
}

Matrix inverse_scale(const Matrix& scaled, const ScaleParams& p) {
  if (scaled.cols() != p.size()) {
    throw ShapeError("inverse_scale: " + std::to_string(scaled.cols()) +
                     " features, params for " + std::to_string(p.size()));
  }
  Matrix out = scaled;
  for (std::size_t j = 0; j < p.size(); ++j) {
    const double range = p.max[j] - p.min[j];
    for (std::size_t i = 0; i < out.rows(); ++i) out(i, j) = scaled(i, j) * range + p.min[j];
  }
  return out;
}

TimeSeries resample_hourly(const TimeSeries& series) {
  if (series.step <= 0 || series.step > kSecondsPerHour || kSecondsPerHour % series.step != 0) {
    throw DataError("resample_hourly: step of " + std::to_string(series.step) +
                    " s does not divide one hour");
  }
  const std::size_t per_hour = static_cast<std::size_t>(kSecondsPerHour / series.step);
  const std::size_t hours = series.length() / per_hour;
  if (hours == 0) throw DataError("resample_hourly: less than one full hour of data");

  TimeSeries out;
  out.start = series.start;
  out.step = kSecondsPerHour;
  out.names = series.names;
  out.values = Matrix(hours, series.features());
  for (std::size_t h = 0; h < hours; ++h) {
    for (std::size_t j = 0; j < series.features(); ++j) {
      double sum = 0.0;
      std::size_t count = 0;
      for (std::size_t k = 0; k < per_hour; ++k) {
        const double v = series.values(h * per_hour + k, j);
        if (!std::isnan(v)) {
          sum += v;
          ++count;
        }
      }
      out.values(h, j) = count > 0 ? sum / static_cast<double>(count) : kMissing;
    }
  }
  return out;
}

std::size_t window_count(std::size_t length, std::size_t window_length, std::size_t stride) {
  if (window_length == 0 || stride == 0) {
    throw ContractError("make_windows: window length and stride must be positive");
  }
  if (length < window_length) {
    throw ContractError("make_windows: series length " + std::to_string(length) +
                        " is shorter than the window length " + std::to_string(window_length));
  }
  return (length - window_length) / stride + 1;
}

Dataset make_windows(const TimeSeries& series, std::size_t window_length, std::size_t stride) {
  const std::size_t m = window_count(series.length(), window_length, stride);
  Dataset d;
  d.window_length = window_length;
  d.features = series.features();
  d.windows.reserve(m);
  const std::size_t n = series.features();
  for (std::size_t w = 0; w < m; ++w) {
    const std::size_t begin = w * stride;
    auto first = series.values.values().begin() + static_cast<std::ptrdiff_t>(begin * n);
    std::vector<double> block(first, first + static_cast<std::ptrdiff_t>(window_length * n));
    d.windows.push_back({begin, Matrix(window_length, n, std::move(block))});
  }
  return d;
}

}  // namespace tife
