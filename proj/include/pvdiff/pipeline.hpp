#pragma once

// In-memory pipeline shared by the command-line tool and the test suites:
// select features, split, normalize, cut patches, train, forecast, score.

#include <array>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "pvdiff/data.hpp"
#include "pvdiff/diffusion.hpp"
#include "pvdiff/metrics.hpp"
#include "pvdiff/patching.hpp"
#include "pvdiff/schedule.hpp"

namespace pvdiff {

struct DataConfig {
  std::string csv_path;
  CsvOptions csv;
  std::vector<std::string> feature_columns;  // empty: first feature_count columns
  std::array<double, 3> split_fractions{0.7, 0.1, 0.2};
  double daylight_threshold = 0.0;
  std::optional<SyntheticOptions> synthetic;  // used instead of csv_path when set
};

inline RawSeries load_series(const DataConfig& data) {
  if (data.synthetic) return make_synthetic_series(*data.synthetic);
  if (data.csv_path.empty()) throw ConfigError("data.csv is empty and no [synthetic] section is given");
  return load_csv(data.csv_path, data.csv);
}

struct ScheduleConfig {
  int steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  NoiseSchedule make() const { return make_linear_schedule(steps, beta_start, beta_end); }
};

struct ForecastConfig {
  int num_samples = 1;
  std::uint64_t seed = 11;
  std::optional<DayNumber> from_day;
  std::optional<DayNumber> to_day;  // inclusive
  int max_days = 0;                 // 0: every eligible test day
  int batch = 64;
};

struct ExperimentConfig {
  DataConfig data;
  PatchSpec patch;
  ScheduleConfig schedule;
  DenoiserConfig model;
  TrainingConfig training;
  ForecastConfig forecast;
  std::string out_dir = "run";

  void validate() const {
    patch.validate();
    model.validate();
    training.validate();
    require(model.image_side == patch.image_side, "model.image_side must equal patch.image_side");
    require(forecast.num_samples >= 1, "forecast.num_samples must be >= 1");
    require(forecast.batch >= 1, "forecast.batch must be >= 1");
    (void)schedule.make();
  }
};

/// Series plus everything derived from it that training and forecasting share.
struct PreparedData {
  RawSeries series;
  SplitRanges split;
  Normalizer normalizer;
  std::vector<std::size_t> columns;  // selected series columns, patch column order
  std::size_t power_patch_column = 0;
  Grid<float> features;              // normalized selected columns
};

inline std::vector<std::size_t> select_columns(const RawSeries& s, const DataConfig& data, const PatchSpec& spec) {
  std::vector<std::size_t> cols;
  if (!data.feature_columns.empty()) {
    for (const auto& name : data.feature_columns) cols.push_back(s.column(name));
  } else {
    if (s.features() < static_cast<std::size_t>(spec.feature_count)) {
      throw DataError("series has " + std::to_string(s.features()) + " feature columns, patch needs " +
                      std::to_string(spec.feature_count));
    }
    for (int c = 0; c < spec.feature_count; ++c) cols.push_back(static_cast<std::size_t>(c));
  }
  if (cols.size() != static_cast<std::size_t>(spec.feature_count)) {
    throw ConfigError("feature_columns lists " + std::to_string(cols.size()) + " columns, patch.feature_count is " +
                      std::to_string(spec.feature_count));
  }
  return cols;
}

inline PreparedData prepare_data(RawSeries series, const ExperimentConfig& cfg, std::ostream* warn = &std::cerr) {
  cfg.validate();
  PreparedData p;
  p.series = std::move(series);
  p.split = chrono_split(p.series.rows(), cfg.data.split_fractions);
  p.normalizer = Normalizer::fit(p.series, p.split.train, warn);
  p.columns = select_columns(p.series, cfg.data, cfg.patch);
  auto it = std::find(p.columns.begin(), p.columns.end(), p.series.power_index);
  if (it == p.columns.end()) {
    throw ConfigError("power column '" + p.series.feature_names[p.series.power_index] +
                      "' is not among the selected patch features");
  }
  p.power_patch_column = static_cast<std::size_t>(it - p.columns.begin());
  p.features = normalized_features(p.series, p.normalizer, p.columns);
  return p;
}

/// Rows [range.begin, range.end) of a feature grid.
inline Grid<float> slice_rows(const Grid<float>& g, IndexRange range) {
  Grid<float> out(range.size(), g.cols);
  std::copy(g.data.begin() + static_cast<std::ptrdiff_t>(range.begin * g.cols),
            g.data.begin() + static_cast<std::ptrdiff_t>(range.end * g.cols), out.data.begin());
  return out;
}

/// Patches lying entirely inside `range`; origins are absolute series rows.
inline std::vector<Patch> patches_in(const PreparedData& p, IndexRange range, const PatchSpec& spec) {
  if (range.size() < static_cast<std::size_t>(spec.window_rows)) return {};
  auto patches = extract_patches(slice_rows(p.features, range), spec);
  for (auto& patch : patches) patch.origin += range.begin;
  return patches;
}

/// Complete days inside the test range that have a predecessor day and enough history.
inline std::vector<DayNumber> eligible_test_days(const PreparedData& p, const ExperimentConfig& cfg) {
  const auto& s = p.series;
  std::vector<DayNumber> days;
  const DayNumber first = day_of(s.timestamps[p.split.test.begin]);
  const DayNumber last = day_of(s.timestamps[p.split.test.end - 1]);
  for (DayNumber d = first; d <= last; ++d) {
    if (cfg.forecast.from_day && d < *cfg.forecast.from_day) continue;
    if (cfg.forecast.to_day && d > *cfg.forecast.to_day) continue;
    const std::ptrdiff_t r0 = s.row_of(d * 24);
    const std::ptrdiff_t r23 = s.row_of(d * 24 + 23);
    if (r0 < 0 || r23 < 0 || !p.split.test.contains(static_cast<std::size_t>(r0))) continue;
    if (s.row_of((d - 1) * 24) < 0) continue;
    if (r0 < cfg.patch.cond_rows) continue;
    days.push_back(d);
    if (cfg.forecast.max_days > 0 && static_cast<int>(days.size()) >= cfg.forecast.max_days) break;
  }
  return days;
}

/// Explicit day range: every day must be forecastable, otherwise a DataError.
inline std::vector<DayNumber> requested_days(const PreparedData& p, const ExperimentConfig& cfg) {
  if (!cfg.forecast.from_day) return eligible_test_days(p, cfg);
  const DayNumber from = *cfg.forecast.from_day;
  const DayNumber to = cfg.forecast.to_day.value_or(from);
  if (to < from) throw ConfigError("forecast range ends before it starts");
  std::vector<DayNumber> days;
  for (DayNumber d = from; d <= to; ++d) {
    if (p.series.row_of(d * 24) < 0 || p.series.row_of(d * 24 + 23) < 0) {
      throw DataError("forecast day " + format_day(d) + " is not fully covered by the series");
    }
    days.push_back(d);
  }
  return days;
}

inline TrainResult train_model(const PreparedData& p, const ExperimentConfig& cfg,
                               const std::function<void(const EpochLog&)>& on_epoch = {}) {
  const auto train = patches_in(p, p.split.train, cfg.patch);
  const auto val = patches_in(p, p.split.validation, cfg.patch);
  return pvdiff::train(train, val, cfg.patch, cfg.schedule.make(), cfg.model, cfg.training, on_epoch);
}

inline std::vector<DayForecast> run_forecast(const PreparedData& p, const ExperimentConfig& cfg,
                                             const DenoiserParams& params, std::span<const DayNumber> days) {
  const UNet<float> net(cfg.model);
  const NoiseSchedule schedule = cfg.schedule.make();
  ForecastContext ctx;
  ctx.net = &net;
  ctx.params = &params;
  ctx.series = &p.series;
  ctx.features = &p.features;
  ctx.normalizer = &p.normalizer;
  ctx.schedule = &schedule;
  ctx.spec = cfg.patch;
  ctx.power_patch_column = p.power_patch_column;
  ctx.daylight_threshold = cfg.data.daylight_threshold;
  ctx.num_samples = cfg.forecast.num_samples;
  ctx.max_batch = static_cast<std::size_t>(cfg.forecast.batch);
  return forecast_days(ctx, days, cfg.forecast.seed);
}

/// Daytime actual/forecast pairs per day, daytime taken from the preceding day's radiation.
inline std::vector<DaySeries> daytime_series(const RawSeries& s, std::span<const DayForecast> forecasts,
                                             double threshold) {
  std::vector<DaySeries> out;
  for (const auto& f : forecasts) {
    const DaylightMask mask = daylight_mask(s, f.day, threshold);
    DaySeries d{f.day, {}, {}};
    for (int h = 0; h < 24; ++h) {
      if (!mask[static_cast<std::size_t>(h)]) continue;
      const std::ptrdiff_t row = s.row_of(f.day * 24 + h);
      if (row < 0) throw DataError("evaluate: " + format_timestamp(f.day * 24 + h) + " is not in the series");
      d.y_true.push_back(s.at(static_cast<std::size_t>(row), s.power_index));
      d.y_fore.push_back(f.forecast[static_cast<std::size_t>(h)]);
    }
    out.push_back(std::move(d));
  }
  return out;
}

inline MetricReport evaluate(const RawSeries& s, std::span<const DayForecast> forecasts, double threshold,
                             int horizon) {
  const auto days = daytime_series(s, forecasts, threshold);
  return aggregate(days, horizon);
}

}  // namespace pvdiff
