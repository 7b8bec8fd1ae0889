#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "pvdiff/error.hpp"
#include "pvdiff/timeutil.hpp"

namespace pvdiff {

namespace detail {
inline void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.empty() || a.size() != b.size()) {
    throw ConfigError(std::string(what) + ": arrays must be non-empty and of equal length (" +
                      std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
}

inline double mean(std::span<const double> a) {
  double s = 0.0;
  for (double v : a) s += v;
  return s / static_cast<double>(a.size());
}
}  // namespace detail

/// Mean absolute error relative to the mean actual value, in percent.
inline double mape(std::span<const double> y_true, std::span<const double> y_fore) {
  detail::check_pair(y_true, y_fore, "mape");
  const double denom = detail::mean(y_true);
  if (denom == 0.0) throw ConfigError("mape: mean of actual values is zero (restrict to daytime hours)");
  double s = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) s += std::abs(y_true[i] - y_fore[i]) / denom;
  return s / static_cast<double>(y_true.size()) * 100.0;
}

inline double mse(std::span<const double> y_true, std::span<const double> y_fore) {
  detail::check_pair(y_true, y_fore, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double d = y_true[i] - y_fore[i];
    s += d * d;
  }
  return s / static_cast<double>(y_true.size());
}

inline double rmse(std::span<const double> y_true, std::span<const double> y_fore) {
  return std::sqrt(mse(y_true, y_fore));
}

inline double mae(std::span<const double> y_true, std::span<const double> y_fore) {
  detail::check_pair(y_true, y_fore, "mae");
  double s = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) s += std::abs(y_true[i] - y_fore[i]);
  return s / static_cast<double>(y_true.size());
}

inline double pearson(std::span<const double> y_true, std::span<const double> y_fore) {
  detail::check_pair(y_true, y_fore, "pearson");
  if (y_true.size() < 2) throw ConfigError("pearson: need at least two values");
  const double mt = detail::mean(y_true);
  const double mf = detail::mean(y_fore);
  double num = 0.0, st = 0.0, sf = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double a = y_true[i] - mt;
    const double b = y_fore[i] - mf;
    num += a * b;
    st += a * a;
    sf += b * b;
  }
  if (st == 0.0 || sf == 0.0) throw ConfigError("pearson: constant array (zero variance)");
  const double r = num / (std::sqrt(st) * std::sqrt(sf));
  return std::clamp(r, -1.0, 1.0);
}

/// Scores for one test day, over its daytime hours only. Undefined scores
/// (zero actual mean, constant series) are NaN.
struct DayMetrics {
  DayNumber day = 0;
  std::size_t n = 0;
  double mape_percent = std::numeric_limits<double>::quiet_NaN();
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  double pearson = std::numeric_limits<double>::quiet_NaN();
};

struct MetricReport {
  std::vector<DayMetrics> days;
  int horizon = 1;
  // Aggregates are means of the per-day values (NaN days skipped), except
  // rmse, which is sqrt(mse) of the aggregate.
  double mape_percent = 0.0;
  double mape_fraction = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  double pearson = 0.0;
  double pearson_pooled = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
};

inline DayMetrics day_metrics(DayNumber day, std::span<const double> y_true, std::span<const double> y_fore) {
  DayMetrics m;
  m.day = day;
  m.n = y_true.size();
  m.mse = mse(y_true, y_fore);
  m.rmse = std::sqrt(m.mse);
  m.mae = mae(y_true, y_fore);
  if (detail::mean(y_true) != 0.0) m.mape_percent = mape(y_true, y_fore);
  try {
    m.pearson = pearson(y_true, y_fore);
  } catch (const ConfigError&) {
    // Fewer than two hours or a flat series; the day is left out of the mean.
  }
  return m;
}

/// Per-day daytime series for evaluation.
struct DaySeries {
  DayNumber day = 0;
  std::vector<double> y_true;
  std::vector<double> y_fore;
};

inline MetricReport aggregate(std::span<const DaySeries> days, int horizon) {
  MetricReport r;
  r.horizon = horizon;
  std::vector<double> all_true, all_fore;
  for (const auto& d : days) {
    if (d.y_true.empty()) continue;
    r.days.push_back(day_metrics(d.day, d.y_true, d.y_fore));
    all_true.insert(all_true.end(), d.y_true.begin(), d.y_true.end());
    all_fore.insert(all_fore.end(), d.y_fore.begin(), d.y_fore.end());
  }
  if (r.days.empty()) throw DataError("evaluate: no daytime hours in range");
  const auto mean_of = [&](auto field) {
    double s = 0.0;
    std::size_t k = 0;
    for (const auto& d : r.days) {
      const double v = d.*field;
      if (std::isfinite(v)) {
        s += v;
        ++k;
      }
    }
    return k ? s / static_cast<double>(k) : std::numeric_limits<double>::quiet_NaN();
  };
  r.mape_percent = mean_of(&DayMetrics::mape_percent);
  r.mape_fraction = r.mape_percent / 100.0;
  r.mse = mean_of(&DayMetrics::mse);
  r.rmse = std::sqrt(r.mse);
  r.mae = mean_of(&DayMetrics::mae);
  r.pearson = mean_of(&DayMetrics::pearson);
  for (const auto& d : r.days) r.n += d.n;
  try {
    r.pearson_pooled = pearson(all_true, all_fore);
  } catch (const ConfigError&) {
  }
  return r;
}

}  // namespace pvdiff
