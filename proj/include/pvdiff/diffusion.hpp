#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pvdiff/adam.hpp"
#include "pvdiff/data.hpp"
#include "pvdiff/denoiser.hpp"
#include "pvdiff/error.hpp"
#include "pvdiff/patching.hpp"
#include "pvdiff/rng.hpp"
#include "pvdiff/schedule.hpp"

namespace pvdiff {

/// Masked forward noising: M = 0 cells keep x0 exactly, M = 1 cells get
/// sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) eps.
template <typename S>
Grid<S> forward_noise(const Grid<S>& x0, const Mask& mask, const NoiseSchedule& schedule, int t, const Grid<S>& eps) {
  if (x0.rows != mask.side() || x0.cols != mask.side() || eps.rows != x0.rows || eps.cols != x0.cols) {
    throw ConfigError("forward_noise: image, mask and noise shapes differ");
  }
  const StepCoefficients k = schedule.coefficients_at(t);
  Grid<S> out = x0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (mask.cells.data[i]) {
      out.data[i] = static_cast<S>(k.sqrt_ab * static_cast<double>(x0.data[i]) +
                                   k.sqrt_1mab * static_cast<double>(eps.data[i]));
    }
  }
  return out;
}

template <typename S>
Grid<S> standard_normal_grid(std::size_t rows, std::size_t cols, Rng& rng) {
  Grid<S> g(rows, cols);
  for (auto& v : g.data) v = static_cast<S>(rng.normal());
  return g;
}

struct TrainingConfig {
  int epochs = 20;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double grad_clip = 1.0;
  std::uint64_t seed = 1;
  int validation_every = 1;        // epochs; 0 disables validation
  std::size_t validation_cap = 256;  // validation patches used (evenly spaced)
  bool cosine_decay = false;         // anneal the learning rate to 0 over all steps

  void validate() const {
    require(epochs >= 1, "training: epochs must be >= 1");
    require(batch_size >= 1, "training: batch_size must be >= 1");
    require(learning_rate > 0.0, "training: learning_rate must be positive");
    require(validation_every >= 0, "training: validation_every must be >= 0");
  }
};

struct EpochLog {
  int epoch = 0;
  long steps = 0;
  double train_loss = 0.0;
  double validation_loss = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  DenoiserParams params;
  std::vector<EpochLog> history;
  long steps = 0;
};

namespace detail {

inline std::vector<DenoisingExample<float>> make_examples(std::span<const Patch* const> patches, const PatchSpec& spec,
                                                          const Mask& mask, const NoiseSchedule& schedule, Rng& rng) {
  std::vector<DenoisingExample<float>> batch;
  batch.reserve(patches.size());
  const auto side = static_cast<std::size_t>(spec.image_side);
  for (const Patch* p : patches) {
    const int t = rng.uniform_int(1, schedule.steps());
    Grid<float> eps = standard_normal_grid<float>(side, side, rng);
    Grid<float> xt = forward_noise(pad_patch(*p, spec), mask, schedule, t, eps);
    batch.push_back({std::move(xt), mask, t, std::move(eps)});
  }
  return batch;
}

}  // namespace detail

/// Mean masked loss over a fixed, seeded draw of (t, eps) per patch.
inline double validation_loss(const UNet<float>& net, const DenoiserParams& params, std::span<const Patch> patches,
                              const PatchSpec& spec, const NoiseSchedule& schedule, std::uint64_t seed,
                              std::size_t cap, int batch_size) {
  if (patches.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::vector<const Patch*> chosen;
  const std::size_t n = std::min(cap == 0 ? patches.size() : cap, patches.size());
  for (std::size_t i = 0; i < n; ++i) chosen.push_back(&patches[i * patches.size() / n]);
  const Mask mask = build_mask(spec);
  Rng rng(seed);
  double weighted = 0.0;
  for (std::size_t b = 0; b < chosen.size(); b += static_cast<std::size_t>(batch_size)) {
    const std::size_t e = std::min(chosen.size(), b + static_cast<std::size_t>(batch_size));
    const auto batch = detail::make_examples(std::span(chosen).subspan(b, e - b), spec, mask, schedule, rng);
    std::vector<Grid<float>> imgs;
    std::vector<Mask> masks;
    std::vector<int> steps;
    for (const auto& ex : batch) {
      imgs.push_back(ex.x_t);
      masks.push_back(ex.mask);
      steps.push_back(ex.t);
    }
    const auto pred = net.forward(params, make_input<float>(imgs, masks), steps);
    weighted += masked_mse<float>(pred, batch).loss * static_cast<double>(e - b);
  }
  return weighted / static_cast<double>(chosen.size());
}

/// Trains the noise predictor on the masked objective. Each epoch visits every
/// patch once in a seeded random order with a fresh (t, eps) pair.
inline TrainResult train(std::span<const Patch> patches, std::span<const Patch> validation, const PatchSpec& spec,
                         const NoiseSchedule& schedule, const DenoiserConfig& denoiser, const TrainingConfig& cfg,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
  spec.validate();
  cfg.validate();
  if (patches.empty()) throw DataError("train: no training patches");
  if (denoiser.image_side != spec.image_side) throw ConfigError("train: denoiser image_side differs from patch spec");
  const UNet<float> net(denoiser);
  TrainResult result{net.init_params(derive_seed(cfg.seed, 1)), {}, 0};
  Adam<float> adam(result.params, AdamOptions{cfg.learning_rate, 0.9, 0.999, 1e-8, cfg.grad_clip});
  const Mask mask = build_mask(spec);
  Rng rng(derive_seed(cfg.seed, 2));
  std::vector<std::size_t> order(patches.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batches = (order.size() + static_cast<std::size_t>(cfg.batch_size) - 1) /
                              static_cast<std::size_t>(cfg.batch_size);
  const long total_steps = static_cast<long>(batches) * cfg.epochs;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const Patch*> chosen;
      for (std::size_t i = b; i < e; ++i) chosen.push_back(&patches[order[i]]);
      const auto batch = detail::make_examples(chosen, spec, mask, schedule, rng);
      auto lg = loss_and_grad<float>(net, result.params, batch);
      if (!std::isfinite(lg.loss) || !lg.grads.all_finite()) {
        throw NumericalError("training diverged at step " + std::to_string(result.steps + 1) + " (epoch " +
                             std::to_string(epoch) + "): loss " + std::to_string(lg.loss));
      }
      if (cfg.cosine_decay) {
        const double progress = static_cast<double>(result.steps) / static_cast<double>(total_steps);
        adam.set_learning_rate(cfg.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress)));
      }
      adam.step(result.params, lg.grads);
      ++result.steps;
      loss_sum += lg.loss * static_cast<double>(e - b);
      seen += e - b;
    }
    EpochLog log{epoch, result.steps, loss_sum / static_cast<double>(seen)};
    if (cfg.validation_every > 0 && !validation.empty() && epoch % cfg.validation_every == 0) {
      log.validation_loss = validation_loss(net, result.params, validation, spec, schedule, derive_seed(cfg.seed, 3),
                                            cfg.validation_cap, cfg.batch_size);
    }
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

/// Called after every reverse step with the step index and the S x S images.
using ReverseObserver = std::function<void(int t, std::span<const Grid<float>> images)>;

/// Mask-guided ancestral sampling for a batch of conditioning histories, each
/// with its own seed. Returns the completed (unpadded) window_rows x F patches.
inline std::vector<Grid<float>> sample_reverse_batch(const UNet<float>& net, const DenoiserParams& params,
                                                     std::span<const Grid<float>> histories, const PatchSpec& spec,
                                                     const NoiseSchedule& schedule,
                                                     std::span<const std::uint64_t> seeds,
                                                     const ReverseObserver& observer = {}) {
  spec.validate();
  if (histories.size() != seeds.size()) throw ConfigError("sample_reverse: one seed per history required");
  if (histories.empty()) return {};
  if (net.config().image_side != spec.image_side) throw ConfigError("sample_reverse: denoiser side differs from spec");
  const auto side = static_cast<std::size_t>(spec.image_side);
  const Mask mask = build_mask(spec);
  std::vector<Rng> rngs;
  std::vector<Grid<float>> images;
  std::vector<Grid<float>> clean;  // conditioning rows + zero padding, re-imposed after every step
  for (std::size_t b = 0; b < histories.size(); ++b) {
    const auto& h = histories[b];
    if (h.rows != static_cast<std::size_t>(spec.cond_rows) || h.cols != static_cast<std::size_t>(spec.feature_count)) {
      throw ConfigError("sample_reverse: history must be cond_rows x feature_count (" + std::to_string(spec.cond_rows) +
                        "x" + std::to_string(spec.feature_count) + ")");
    }
    Grid<float> base(side, side, 0.0f);
    for (std::size_t r = 0; r < h.rows; ++r) {
      for (std::size_t c = 0; c < h.cols; ++c) base(r, c) = h(r, c);
    }
    rngs.emplace_back(seeds[b]);
    Grid<float> img = base;
    for (std::size_t i = 0; i < img.size(); ++i) {
      if (mask.cells.data[i]) img.data[i] = static_cast<float>(rngs.back().normal());
    }
    clean.push_back(std::move(base));
    images.push_back(std::move(img));
  }
  const std::vector<Mask> masks(images.size(), mask);
  for (int t = schedule.steps(); t >= 1; --t) {
    const StepCoefficients k = schedule.coefficients_at(t);
    const std::vector<int> steps(images.size(), t);
    const Tensor<float> eps = net.forward(params, make_input<float>(images, masks), steps);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(k.alpha);
    const double eps_scale = k.beta / k.sqrt_1mab;
    for (std::size_t b = 0; b < images.size(); ++b) {
      auto& img = images[b];
      const float* e = eps.ptr(0, static_cast<int>(b));
      for (std::size_t i = 0; i < img.size(); ++i) {
        if (!mask.cells.data[i]) {
          img.data[i] = clean[b].data[i];
          continue;
        }
        double x = inv_sqrt_alpha * (static_cast<double>(img.data[i]) - eps_scale * static_cast<double>(e[i]));
        if (t > 1) x += k.posterior_sigma * rngs[b].normal();
        if (!std::isfinite(x)) {
          throw NumericalError("reverse sampling produced a non-finite value at step " + std::to_string(t));
        }
        img.data[i] = static_cast<float>(x);
      }
    }
    if (observer) observer(t, images);
  }
  std::vector<Grid<float>> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(unpad(img, spec));
  return out;
}

/// Result of completing one window.
struct ForecastResult {
  Grid<float> completed;  // window_rows x F, normalized; mean over samples
  Grid<float> target;     // target_rows x F, normalized; mean over samples
  Grid<float> target_std;  // per-cell standard deviation over samples (zero for one sample)
  std::vector<double> power;      // denormalized power per horizon step (filled when a decoder is given)
  std::vector<double> power_std;  // denormalized standard deviation per horizon step
  std::uint64_t seed = 0;
  int samples = 1;
};

/// Maps the power column of a patch back to physical units.
struct PowerDecoder {
  std::size_t patch_column = 0;
  std::size_t series_column = 0;
  const Normalizer* normalizer = nullptr;

  double value(double normalized) const { return normalizer->invert(series_column, normalized); }
  double scale() const {
    const double span = normalizer->max(series_column) - normalizer->min(series_column);
    return span > 0.0 ? 0.5 * span : 0.0;
  }
};

namespace detail {

inline ForecastResult summarize(std::span<const Grid<float>> draws, const PatchSpec& spec, std::uint64_t seed,
                                const PowerDecoder* decoder) {
  ForecastResult r;
  r.seed = seed;
  r.samples = static_cast<int>(draws.size());
  const auto& first = draws.front();
  r.completed = Grid<float>(first.rows, first.cols, 0.0f);
  Grid<double> mean(first.rows, first.cols, 0.0), sq(first.rows, first.cols, 0.0);
  for (const auto& d : draws) {
    for (std::size_t i = 0; i < d.size(); ++i) mean.data[i] += d.data[i];
  }
  for (auto& v : mean.data) v /= static_cast<double>(draws.size());
  for (const auto& d : draws) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double dv = d.data[i] - mean.data[i];
      sq.data[i] += dv * dv;
    }
  }
  for (std::size_t i = 0; i < mean.size(); ++i) r.completed.data[i] = static_cast<float>(mean.data[i]);
  if (draws.size() == 1) r.completed = first;
  // Conditioning rows are copied, not averaged, so they stay bitwise equal to the history.
  for (int row = 0; row < spec.cond_rows; ++row) {
    for (std::size_t c = 0; c < first.cols; ++c) r.completed(static_cast<std::size_t>(row), c) = first(static_cast<std::size_t>(row), c);
  }
  const auto target = static_cast<std::size_t>(spec.target_rows);
  r.target = Grid<float>(target, first.cols);
  r.target_std = Grid<float>(target, first.cols, 0.0f);
  for (std::size_t row = 0; row < target; ++row) {
    const std::size_t src = static_cast<std::size_t>(spec.cond_rows) + row;
    for (std::size_t c = 0; c < first.cols; ++c) {
      r.target(row, c) = r.completed(src, c);
      r.target_std(row, c) = static_cast<float>(std::sqrt(sq(src, c) / static_cast<double>(draws.size())));
    }
  }
  if (decoder) {
    for (std::size_t row = 0; row < target; ++row) {
      r.power.push_back(decoder->value(r.target(row, decoder->patch_column)));
      r.power_std.push_back(decoder->scale() * r.target_std(row, decoder->patch_column));
    }
  }
  return r;
}

}  // namespace detail

/// Completes one conditioning history. With num_samples > 1 the draws use
/// seeds derived from `seed` and the result is their per-cell mean.
inline ForecastResult sample_reverse(const UNet<float>& net, const DenoiserParams& params, const Grid<float>& history,
                                     const PatchSpec& spec, const NoiseSchedule& schedule, std::uint64_t seed,
                                     int num_samples = 1, const PowerDecoder* decoder = nullptr,
                                     const ReverseObserver& observer = {}) {
  require(num_samples >= 1, "sample_reverse: num_samples must be >= 1");
  std::vector<Grid<float>> histories(static_cast<std::size_t>(num_samples), history);
  std::vector<std::uint64_t> seeds;
  for (int k = 0; k < num_samples; ++k) seeds.push_back(num_samples == 1 ? seed : derive_seed(seed, static_cast<std::uint64_t>(k)));
  const auto draws = sample_reverse_batch(net, params, histories, spec, schedule, seeds, observer);
  return detail::summarize(draws, spec, seed, decoder);
}

/// Normalized values of the selected feature columns, rows x columns.size().
inline Grid<float> normalized_features(const RawSeries& s, const Normalizer& norm, std::span<const std::size_t> columns) {
  Grid<float> g(s.rows(), columns.size());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      g(r, c) = static_cast<float>(norm.apply(columns[c], s.at(r, columns[c])));
    }
  }
  return g;
}

/// Everything forecast_day needs about the trained model and data layout.
struct ForecastContext {
  const UNet<float>* net = nullptr;
  const DenoiserParams* params = nullptr;
  const RawSeries* series = nullptr;
  const Grid<float>* features = nullptr;  // normalized selected columns, aligned with series rows
  const Normalizer* normalizer = nullptr;
  const NoiseSchedule* schedule = nullptr;
  PatchSpec spec;
  std::size_t power_patch_column = 0;
  double daylight_threshold = 0.0;
  int num_samples = 1;
  std::size_t max_batch = 64;
};

struct DayForecast {
  DayNumber day = 0;
  DaylightMask daytime{};
  std::array<double, 24> forecast{};
  std::array<double, 24> stddev{};
  int sampler_calls = 0;
};

/// First target hour of each window: windows advance by target_rows over the
/// daytime hours; each hour is covered by the first window that reaches it.
inline std::vector<int> plan_day_windows(const DaylightMask& daytime, int target_rows) {
  require(target_rows >= 1, "target_rows must be >= 1");
  std::vector<int> starts;
  int covered_until = 0;
  for (int h = 0; h < 24; ++h) {
    if (!daytime[static_cast<std::size_t>(h)] || h < covered_until) continue;
    starts.push_back(h);
    covered_until = h + target_rows;
  }
  return starts;
}

/// Forecasts several days; windows from all days are sampled in shared batches.
inline std::vector<DayForecast> forecast_days(const ForecastContext& ctx, std::span<const DayNumber> days,
                                              std::uint64_t seed) {
  const PatchSpec& spec = ctx.spec;
  spec.validate();
  const RawSeries& s = *ctx.series;
  struct Window {
    std::size_t day_index;
    int start_hour;
    std::size_t first_row;
  };
  std::vector<DayForecast> out;
  std::vector<Window> windows;
  for (std::size_t d = 0; d < days.size(); ++d) {
    DayForecast df;
    df.day = days[d];
    df.daytime = daylight_mask(s, days[d], ctx.daylight_threshold);
    for (int start : plan_day_windows(df.daytime, spec.target_rows)) {
      const std::ptrdiff_t row = s.row_of(days[d] * 24 + start);
      if (row < spec.cond_rows) {
        throw DataError("forecast " + format_timestamp(days[d] * 24 + start) + ": needs " +
                        std::to_string(spec.cond_rows) + " rows of history before it");
      }
      windows.push_back({d, start, static_cast<std::size_t>(row)});
      ++df.sampler_calls;
    }
    out.push_back(df);
  }
  const PowerDecoder decoder{ctx.power_patch_column, s.power_index, ctx.normalizer};
  const auto samples = static_cast<std::size_t>(ctx.num_samples);
  const std::size_t per_batch = std::max<std::size_t>(1, ctx.max_batch / samples);
  for (std::size_t w0 = 0; w0 < windows.size(); w0 += per_batch) {
    const std::size_t w1 = std::min(windows.size(), w0 + per_batch);
    std::vector<Grid<float>> histories;
    std::vector<std::uint64_t> seeds;
    for (std::size_t w = w0; w < w1; ++w) {
      const Window& win = windows[w];
      Grid<float> hist(static_cast<std::size_t>(spec.cond_rows), ctx.features->cols);
      const std::size_t first = win.first_row - static_cast<std::size_t>(spec.cond_rows);
      std::copy(ctx.features->data.begin() + static_cast<std::ptrdiff_t>(first * hist.cols),
                ctx.features->data.begin() + static_cast<std::ptrdiff_t>(win.first_row * hist.cols), hist.data.begin());
      const std::uint64_t window_seed = derive_seed(seed, static_cast<std::uint64_t>(s.timestamps[win.first_row]));
      for (std::size_t k = 0; k < samples; ++k) {
        histories.push_back(hist);
        seeds.push_back(samples == 1 ? window_seed : derive_seed(window_seed, k));
      }
    }
    const auto draws = sample_reverse_batch(*ctx.net, *ctx.params, histories, spec, *ctx.schedule, seeds);
    for (std::size_t w = w0; w < w1; ++w) {
      const Window& win = windows[w];
      const auto first = draws.begin() + static_cast<std::ptrdiff_t>((w - w0) * samples);
      const std::vector<Grid<float>> mine(first, first + static_cast<std::ptrdiff_t>(samples));
      const ForecastResult r = detail::summarize(mine, spec, seeds[(w - w0) * samples], &decoder);
      DayForecast& df = out[win.day_index];
      for (int k = 0; k < spec.target_rows; ++k) {
        const int hour = win.start_hour + k;
        if (hour >= 24) break;
        df.forecast[static_cast<std::size_t>(hour)] = r.power[static_cast<std::size_t>(k)];
        df.stddev[static_cast<std::size_t>(hour)] = r.power_std[static_cast<std::size_t>(k)];
      }
    }
  }
  for (auto& df : out) {
    const auto zeroed = apply_night_zeroing(std::vector<double>(df.forecast.begin(), df.forecast.end()), df.daytime);
    std::copy(zeroed.begin(), zeroed.end(), df.forecast.begin());
    for (std::size_t h = 0; h < 24; ++h) {
      if (!df.daytime[h]) df.stddev[h] = 0.0;
    }
  }
  return out;
}

inline DayForecast forecast_day(const ForecastContext& ctx, DayNumber day, std::uint64_t seed) {
  const DayNumber days[1] = {day};
  return forecast_days(ctx, days, seed).front();
}

}  // namespace pvdiff
