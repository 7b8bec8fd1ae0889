#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "pvdiff/error.hpp"
#include "pvdiff/rng.hpp"
#include "pvdiff/timeutil.hpp"

namespace pvdiff {

/// Half-open row interval [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool contains(std::size_t i) const { return i >= begin && i < end; }
  bool operator==(const IndexRange&) const = default;
};

/// Hourly multivariate observations, row-major L x F.
struct RawSeries {
  std::vector<HourStamp> timestamps;
  std::vector<double> values;
  std::vector<std::string> feature_names;
  std::size_t power_index = 0;
  std::size_t radiation_index = 0;

  std::size_t rows() const { return timestamps.size(); }
  std::size_t features() const { return feature_names.size(); }
  double at(std::size_t row, std::size_t col) const { return values[row * features() + col]; }
  double& at(std::size_t row, std::size_t col) { return values[row * features() + col]; }

  /// Row holding the given hour, or -1 when outside the series.
  std::ptrdiff_t row_of(HourStamp h) const {
    if (timestamps.empty() || h < timestamps.front() || h > timestamps.back()) return -1;
    return static_cast<std::ptrdiff_t>(h - timestamps.front());
  }

  std::size_t column(const std::string& name) const {
    auto it = std::find(feature_names.begin(), feature_names.end(), name);
    if (it == feature_names.end()) throw DataError("column '" + name + "' not found");
    return static_cast<std::size_t>(it - feature_names.begin());
  }
};

struct CsvOptions {
  std::string timestamp_column = "timestamp";
  std::string power_column = "power";
  std::string radiation_column = "radiation";
  std::vector<std::string> ignore_columns;
  bool forward_fill = false;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    std::size_t first = cell.find_first_not_of(' ');
    cell = first == std::string::npos ? std::string{} : cell.substr(first);
    if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') {
      cell = cell.substr(1, cell.size() - 2);
    }
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

}  // namespace detail

/// Reads a header-first CSV with one row per hour.
inline RawSeries load_csv(std::istream& in, const CsvOptions& opt, const std::string& origin = "csv") {
  std::string line;
  if (!std::getline(in, line)) throw DataError(origin + ": empty file");
  const auto header = detail::split_csv_line(line);
  std::ptrdiff_t ts_col = -1;
  std::vector<std::size_t> feature_cols;
  RawSeries series;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == opt.timestamp_column) {
      ts_col = static_cast<std::ptrdiff_t>(i);
    } else if (std::find(opt.ignore_columns.begin(), opt.ignore_columns.end(), header[i]) ==
               opt.ignore_columns.end()) {
      feature_cols.push_back(i);
      series.feature_names.push_back(header[i]);
    }
  }
  if (ts_col < 0) throw DataError(origin + ": missing timestamp column '" + opt.timestamp_column + "'");
  for (const auto* name : {&opt.power_column, &opt.radiation_column}) {
    if (std::find(series.feature_names.begin(), series.feature_names.end(), *name) ==
        series.feature_names.end()) {
      throw DataError(origin + ": missing column '" + *name + "'");
    }
  }
  series.power_index = series.column(opt.power_column);
  series.radiation_index = series.column(opt.radiation_column);

  const std::size_t nf = feature_cols.size();
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    const std::string where = origin + ": row " + std::to_string(row_number);
    if (cells.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                      std::to_string(cells.size()));
    }
    auto ts = parse_timestamp(cells[static_cast<std::size_t>(ts_col)]);
    if (!ts) throw DataError(where + ": unparseable timestamp '" + cells[static_cast<std::size_t>(ts_col)] + "'");
    if (!series.timestamps.empty() && *ts != series.timestamps.back() + 1) {
      throw DataError(where + ": timestamp " + format_timestamp(*ts) +
                      (*ts <= series.timestamps.back() ? " is not increasing" : " leaves a gap") +
                      " after " + format_timestamp(series.timestamps.back()));
    }
    series.timestamps.push_back(*ts);
    for (std::size_t j = 0; j < nf; ++j) {
      double v = 0.0;
      const std::string& cell = cells[feature_cols[j]];
      if (!detail::parse_double(cell, v) || !std::isfinite(v)) {
        if (!opt.forward_fill || series.timestamps.size() == 1) {
          throw DataError(where + ": missing or non-numeric value '" + cell + "' in column '" +
                          series.feature_names[j] + "'");
        }
        v = series.values[series.values.size() - nf];
      }
      series.values.push_back(v);
    }
  }
  if (series.timestamps.empty()) throw DataError(origin + ": no data rows");
  return series;
}

inline RawSeries load_csv(const std::string& path, const CsvOptions& opt) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return load_csv(in, opt, path);
}

inline void write_csv(std::ostream& out, const RawSeries& s, const std::string& timestamp_column = "timestamp") {
  out << timestamp_column;
  for (const auto& n : s.feature_names) out << ',' << n;
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < s.rows(); ++r) {
    out << format_timestamp(s.timestamps[r]);
    for (std::size_t c = 0; c < s.features(); ++c) {
      std::snprintf(buf, sizeof buf, ",%.6f", s.at(r, c));
      out << buf;
    }
    out << '\n';
  }
}

/// Per-feature min-max scaling onto [-1, 1], fitted on the training rows only.
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(std::vector<double> mins, std::vector<double> maxs)
      : min_(std::move(mins)), max_(std::move(maxs)) {
    require(min_.size() == max_.size(), "normalizer: min/max size mismatch");
  }

  static Normalizer fit(const RawSeries& s, IndexRange train, std::ostream* warn = &std::cerr) {
    if (train.size() == 0 || train.end > s.rows()) throw DataError("normalizer: empty or out-of-range training rows");
    std::vector<double> lo(s.features(), std::numeric_limits<double>::infinity());
    std::vector<double> hi(s.features(), -std::numeric_limits<double>::infinity());
    for (std::size_t r = train.begin; r < train.end; ++r) {
      for (std::size_t c = 0; c < s.features(); ++c) {
        lo[c] = std::min(lo[c], s.at(r, c));
        hi[c] = std::max(hi[c], s.at(r, c));
      }
    }
    for (std::size_t c = 0; c < s.features(); ++c) {
      if (!(hi[c] > lo[c]) && warn) {
        *warn << "warning: feature '" << s.feature_names[c]
              << "' is constant on the training split; it is mapped to 0\n";
      }
    }
    return Normalizer(std::move(lo), std::move(hi));
  }

  std::size_t features() const { return min_.size(); }
  double min(std::size_t f) const { return min_[f]; }
  double max(std::size_t f) const { return max_[f]; }
  const std::vector<double>& mins() const { return min_; }
  const std::vector<double>& maxs() const { return max_; }

  double apply(std::size_t f, double x) const {
    const double span = max_[f] - min_[f];
    if (!(span > 0.0)) return 0.0;
    return 2.0 * (x - min_[f]) / span - 1.0;
  }

  double invert(std::size_t f, double y) const {
    const double span = max_[f] - min_[f];
    if (!(span > 0.0)) return min_[f];
    return (y + 1.0) * 0.5 * span + min_[f];
  }

  /// Scaled copy of the series values (row-major L x F).
  std::vector<double> apply(const RawSeries& s) const {
    require(s.features() == features(), "normalizer: feature count mismatch");
    std::vector<double> out(s.values.size());
    for (std::size_t r = 0; r < s.rows(); ++r) {
      for (std::size_t c = 0; c < s.features(); ++c) out[r * s.features() + c] = apply(c, s.at(r, c));
    }
    return out;
  }

 private:
  std::vector<double> min_;
  std::vector<double> max_;
};

using DaylightMask = std::array<bool, 24>;

/// Hour h of `day` is daytime iff the preceding day's radiation at hour h exceeds `threshold`.
inline DaylightMask daylight_mask(const RawSeries& s, DayNumber day, double threshold = 0.0) {
  const std::ptrdiff_t first = s.row_of((day - 1) * 24);
  const std::ptrdiff_t last = s.row_of((day - 1) * 24 + 23);
  if (first < 0 || last < 0) {
    throw DataError("daylight mask for " + format_day(day) +
                    ": preceding day is not fully in the series; skip this day");
  }
  DaylightMask mask{};
  for (int h = 0; h < 24; ++h) {
    mask[static_cast<std::size_t>(h)] =
        s.at(static_cast<std::size_t>(first + h), s.radiation_index) > threshold;
  }
  return mask;
}

inline std::vector<double> apply_night_zeroing(std::vector<double> forecast, const std::vector<bool>& daytime) {
  if (forecast.size() != daytime.size()) {
    throw ConfigError("night zeroing: forecast has " + std::to_string(forecast.size()) +
                      " hours, mask has " + std::to_string(daytime.size()));
  }
  for (std::size_t i = 0; i < forecast.size(); ++i) {
    if (!daytime[i]) forecast[i] = 0.0;
  }
  return forecast;
}

inline std::vector<double> apply_night_zeroing(std::vector<double> forecast, const DaylightMask& mask) {
  return apply_night_zeroing(std::move(forecast), std::vector<bool>(mask.begin(), mask.end()));
}

struct SplitRanges {
  IndexRange train;
  IndexRange validation;
  IndexRange test;
};

/// Contiguous chronological split. Boundaries are floor(L * cumulative fraction).
inline SplitRanges chrono_split(std::size_t rows, const std::array<double, 3>& fractions) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  const auto boundary = [&](double cum) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(rows) * cum + 1e-9));
  };
  const std::size_t a = boundary(fractions[0]);
  const std::size_t b = boundary(fractions[0] + fractions[1]);
  SplitRanges out{{0, a}, {a, b}, {b, rows}};
  if (out.train.size() == 0 || out.validation.size() == 0 || out.test.size() == 0) {
    throw ConfigError("split of " + std::to_string(rows) + " rows leaves an empty range");
  }
  return out;
}

/// Synthetic hourly dataset: phase-shifted daily sinusoids with AR(1) noise.
/// Column 0 is "power", column 1 is a clipped clear-sky "radiation" profile,
/// the rest are "f02".."fNN". The power lobe is positive 06:00-18:00.
struct SyntheticOptions {
  std::size_t rows = 5000;
  std::size_t features = 16;
  double noise = 0.05;  // stationary noise std relative to unit amplitude
  double noise_persistence = 0.8;
  std::uint64_t seed = 7;
  DayNumber start_day = 15706;  // 2013-01-01
};

inline RawSeries make_synthetic_series(const SyntheticOptions& opt) {
  require(opt.features >= 2, "synthetic series needs at least 2 features");
  RawSeries s;
  s.feature_names.push_back("power");
  s.feature_names.push_back("radiation");
  for (std::size_t k = 2; k < opt.features; ++k) {
    char name[16];
    std::snprintf(name, sizeof name, "f%02zu", k);
    s.feature_names.emplace_back(name);
  }
  s.power_index = 0;
  s.radiation_index = 1;
  Rng rng(opt.seed);
  const double rho = opt.noise_persistence;
  const double innovation = opt.noise * std::sqrt(1.0 - rho * rho);
  std::vector<double> ar(opt.features);
  for (auto& v : ar) v = opt.noise * rng.normal();
  s.values.resize(opt.rows * opt.features);
  const double two_pi = 2.0 * std::numbers::pi;
  for (std::size_t r = 0; r < opt.rows; ++r) {
    const HourStamp ts = opt.start_day * 24 + static_cast<HourStamp>(r);
    s.timestamps.push_back(ts);
    const double phase = two_pi * (hour_of_day(ts) - 6) / 24.0;
    for (std::size_t k = 0; k < opt.features; ++k) ar[k] = rho * ar[k] + innovation * rng.normal();
    for (std::size_t k = 0; k < opt.features; ++k) {
      double v = 0.0;
      if (k == 1) {
        const double clear = std::sin(phase);
        v = clear > 1e-9 ? clear * (1.0 + ar[k]) : 0.0;
      } else {
        const double shift = k == 0 ? 0.0 : two_pi * static_cast<double>(k) / static_cast<double>(opt.features);
        v = std::sin(phase + shift) + ar[k];
      }
      s.at(r, k) = v;
    }
  }
  return s;
}

}  // namespace pvdiff
