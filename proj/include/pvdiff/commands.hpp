#pragma once

// The pvdiff subcommands as library functions. Each command reads and writes
// files under the run's out_dir and copies the resolved config there.

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "pvdiff/checkpoint.hpp"
#include "pvdiff/config.hpp"
#include "pvdiff/pipeline.hpp"
#include "pvdiff/svg.hpp"

namespace pvdiff {

namespace fs = std::filesystem;

/// Command-line overrides applied on top of the config file.
struct CommandOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> checkpoint;
  std::optional<std::string> forecast_csv;
  std::optional<std::string> from;
  std::optional<std::string> to;
  int parallel = 1;
};

inline RunConfig resolve_run_config(const CommandOptions& opt) {
  if (opt.config_path.empty()) throw ConfigError("--config is required");
  RunConfig rc = load_run_config(opt.config_path);
  auto& data = rc.experiment.data;
  if (!data.csv_path.empty() && fs::path(data.csv_path).is_relative()) {
    data.csv_path = (fs::absolute(opt.config_path).parent_path() / data.csv_path).lexically_normal().string();
  }
  if (opt.seed) apply_seed(rc, *opt.seed);
  if (opt.out_dir) rc.experiment.out_dir = *opt.out_dir;
  for (auto [text, dst] : {std::pair{&opt.from, &rc.experiment.forecast.from_day},
                           std::pair{&opt.to, &rc.experiment.forecast.to_day}}) {
    if (!*text) continue;
    auto d = parse_day(**text);
    if (!d) throw ConfigError("expected a date YYYY-MM-DD, got '" + **text + "'");
    *dst = *d;
  }
  rc.experiment.validate();
  return rc;
}

namespace detail {

inline std::string out_path(const RunConfig& rc, const std::string& file) {
  return (fs::path(rc.experiment.out_dir) / file).string();
}

inline void begin_run(const RunConfig& rc) {
  std::error_code ec;
  fs::create_directories(rc.experiment.out_dir, ec);
  if (ec) throw DataError("cannot create output directory '" + rc.experiment.out_dir + "': " + ec.message());
  std::ofstream(out_path(rc, "config.toml")) << to_toml(rc);
}

inline void say(std::ostream* log, const std::string& line) {
  if (log) *log << line << '\n' << std::flush;
}

inline std::string f6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string g9(double v) {
  if (std::isnan(v)) return "nan";
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace detail

// ---- prepare ----

struct PrepareSummary {
  std::size_t rows = 0;
  std::size_t patches = 0;
  SplitRanges split;
};

inline PrepareSummary cmd_prepare(const RunConfig& rc, std::ostream* log = &std::cerr) {
  const ExperimentConfig& cfg = rc.experiment;
  detail::begin_run(rc);
  const PreparedData p = prepare_data(load_series(cfg.data), cfg, log);
  const PatchCache cache = make_patch_cache(p, cfg.patch);
  save_patch_cache(detail::out_path(rc, "patches.bin"), cache);
  io::write_json(detail::out_path(rc, "normalizer.json"), to_json(p.normalizer, p.series.feature_names));
  detail::say(log, "prepare: " + std::to_string(p.series.rows()) + " rows, " + std::to_string(cache.patches.size()) +
                       " patches -> " + detail::out_path(rc, "patches.bin"));
  return {p.series.rows(), cache.patches.size(), p.split};
}

// ---- train ----

inline TrainResult cmd_train(const RunConfig& rc, std::ostream* log = &std::cerr) {
  const ExperimentConfig& cfg = rc.experiment;
  const std::string hint = "run `pvdiff prepare` with this config first";
  const PatchCache cache = load_patch_cache(detail::out_path(rc, "patches.bin"));
  if (!(cache.spec == cfg.patch)) {
    throw ConfigError("patch cache was prepared with a different patch spec; " + hint);
  }
  const json norm = io::read_json(detail::out_path(rc, "normalizer.json"), hint);
  detail::begin_run(rc);
  const auto train = cache.within(cache.split.train);
  const auto val = cache.within(cache.split.validation);
  if (train.empty()) throw DataError("no training patches fit inside the training split");
  detail::say(log, "train: " + std::to_string(train.size()) + " training / " + std::to_string(val.size()) +
                       " validation patches, " + std::to_string(cfg.training.epochs) + " epochs");

  std::ofstream loss_log(detail::out_path(rc, "loss_log.csv"));
  loss_log << "epoch,steps,train_loss,validation_loss\n";
  auto on_epoch = [&](const EpochLog& e) {
    loss_log << e.epoch << ',' << e.steps << ',' << detail::g9(e.train_loss) << ',' << detail::g9(e.validation_loss)
             << '\n';
    loss_log.flush();
    detail::say(log, "  epoch " + std::to_string(e.epoch) + "/" + std::to_string(cfg.training.epochs) + " loss " +
                         detail::g9(e.train_loss) + " val " + detail::g9(e.validation_loss));
  };
  TrainResult result = pvdiff::train(train, val, cfg.patch, cfg.schedule.make(), cfg.model, cfg.training, on_epoch);

  Checkpoint ck;
  ck.params = result.params;
  ck.model = cfg.model;
  ck.patch = cfg.patch;
  ck.schedule = cfg.schedule;
  ck.normalizer = normalizer_from(norm);
  ck.feature_names = norm.at("features").get<std::vector<std::string>>();
  ck.columns = cache.columns;
  ck.steps = static_cast<std::size_t>(result.steps);
  save_checkpoint(cfg.out_dir, ck);
  detail::say(log, "train: checkpoint -> " + detail::out_path(rc, "model.bin"));
  return result;
}

// ---- forecast ----

inline void write_forecast_csv(const std::string& path, const RawSeries& s, std::span<const DayForecast> days,
                               bool with_stddev) {
  std::ofstream o(path);
  if (!o) throw DataError("cannot write '" + path + "'");
  o << "timestamp,true,forecast" << (with_stddev ? ",stddev" : "") << '\n';
  for (const auto& d : days) {
    for (int h = 0; h < 24; ++h) {
      const HourStamp ts = d.day * 24 + h;
      const auto row = static_cast<std::size_t>(s.row_of(ts));
      o << format_timestamp(ts) << ',' << detail::f6(s.at(row, s.power_index)) << ','
        << detail::f6(d.forecast[static_cast<std::size_t>(h)]);
      if (with_stddev) o << ',' << detail::f6(d.stddev[static_cast<std::size_t>(h)]);
      o << '\n';
    }
  }
}

/// Forecasts the requested days (or every eligible test day) with a trained checkpoint.
inline std::vector<DayForecast> cmd_forecast(const RunConfig& rc, const std::optional<std::string>& checkpoint = {},
                                             std::ostream* log = &std::cerr) {
  const Checkpoint ck = load_checkpoint(checkpoint.value_or(rc.experiment.out_dir));
  ExperimentConfig cfg = rc.experiment;
  cfg.patch = ck.patch;
  cfg.model = ck.model;
  cfg.schedule = ck.schedule;

  PreparedData p;
  p.series = load_series(cfg.data);
  if (p.series.feature_names != ck.feature_names) {
    throw DataError("series columns differ from the ones the checkpoint was trained on");
  }
  p.split = chrono_split(p.series.rows(), cfg.data.split_fractions);
  p.normalizer = ck.normalizer;
  p.columns = ck.columns;
  auto it = std::find(p.columns.begin(), p.columns.end(), p.series.power_index);
  if (it == p.columns.end()) throw DataError("checkpoint features do not include the power column");
  p.power_patch_column = static_cast<std::size_t>(it - p.columns.begin());
  p.features = normalized_features(p.series, p.normalizer, p.columns);

  const auto days = requested_days(p, cfg);
  if (days.empty()) throw DataError("no complete test days to forecast");
  detail::begin_run(rc);
  detail::say(log, "forecast: " + std::to_string(days.size()) + " days from " + format_day(days.front()) + " to " +
                       format_day(days.back()));
  const auto out = run_forecast(p, cfg, ck.params, days);
  write_forecast_csv(detail::out_path(rc, "forecast.csv"), p.series, out, cfg.forecast.num_samples > 1);
  detail::say(log, "forecast: -> " + detail::out_path(rc, "forecast.csv"));
  return out;
}

// ---- evaluate ----

/// Parses a forecast CSV back into whole days; every day must list hours 00..23 in order.
inline std::vector<DayForecast> read_forecast_csv(const std::string& path, const RawSeries& s) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open forecast '" + path + "'; run `pvdiff forecast` first");
  std::string line;
  std::getline(in, line);
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "timestamp" || header[1] != "true" || header[2] != "forecast") {
    throw DataError(path + ": expected header timestamp,true,forecast[,stddev]");
  }
  std::vector<DayForecast> days;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    const std::string where = path + ":" + std::to_string(line_no);
    if (cells.size() != header.size()) throw DataError(where + ": wrong number of cells");
    const auto ts = parse_timestamp(cells[0]);
    double truth = 0.0, fore = 0.0, sd = 0.0;
    if (!ts || !detail::parse_double(cells[1], truth) || !detail::parse_double(cells[2], fore) ||
        (cells.size() > 3 && !detail::parse_double(cells[3], sd))) {
      throw DataError(where + ": unparsable row");
    }
    const int hour = hour_of_day(*ts);
    if (hour == 0) {
      days.push_back({});
      days.back().day = day_of(*ts);
    }
    if (days.empty() || days.back().day != day_of(*ts)) {
      throw DataError(where + ": timestamps are misaligned (each day must list hours 00..23 in order)");
    }
    DayForecast& d = days.back();
    if (d.sampler_calls != hour) {
      throw DataError(where + ": timestamps are misaligned (each day must list hours 00..23 in order)");
    }
    ++d.sampler_calls;  // reused as the running hour count while parsing
    const std::ptrdiff_t row = s.row_of(*ts);
    if (row < 0) throw DataError(where + ": " + cells[0] + " is not in the series");
    const double actual = s.at(static_cast<std::size_t>(row), s.power_index);
    if (std::abs(actual - truth) > 1e-6 + 1e-6 * std::abs(actual)) {
      throw DataError(where + ": 'true' value " + cells[1] + " does not match the series (" + detail::f6(actual) +
                      "); timestamps are misaligned");
    }
    d.forecast[static_cast<std::size_t>(hour)] = fore;
    d.stddev[static_cast<std::size_t>(hour)] = sd;
  }
  for (auto& d : days) {
    if (d.sampler_calls != 24) throw DataError(path + ": day " + format_day(d.day) + " is incomplete");
    d.sampler_calls = 0;
  }
  if (days.empty()) throw DataError(path + ": no forecast rows");
  return days;
}

inline void write_metrics(const std::string& dir, const MetricReport& r) {
  using detail::g9;
  std::ofstream o((fs::path(dir) / "metrics.csv").string());
  o << "day,n,mape_percent,mse,rmse,mae,pearson\n";
  for (const auto& d : r.days) {
    o << format_day(d.day) << ',' << d.n << ',' << g9(d.mape_percent) << ',' << g9(d.mse) << ',' << g9(d.rmse) << ','
      << g9(d.mae) << ',' << g9(d.pearson) << '\n';
  }
  o << "aggregate," << r.n << ',' << g9(r.mape_percent) << ',' << g9(r.mse) << ',' << g9(r.rmse) << ',' << g9(r.mae)
    << ',' << g9(r.pearson) << '\n';

  json days = json::array();
  for (const auto& d : r.days) {
    days.push_back({{"day", format_day(d.day)},
                    {"n", d.n},
                    {"mape_percent", detail::number_or_null(d.mape_percent)},
                    {"mse", d.mse},
                    {"rmse", d.rmse},
                    {"mae", d.mae},
                    {"pearson", detail::number_or_null(d.pearson)}});
  }
  const json j = {{"horizon", r.horizon},
                  {"n", r.n},
                  {"mape_percent", detail::number_or_null(r.mape_percent)},
                  {"mape_fraction", detail::number_or_null(r.mape_fraction)},
                  {"mse", r.mse},
                  {"rmse", r.rmse},
                  {"mae", r.mae},
                  {"pearson", detail::number_or_null(r.pearson)},
                  {"pearson_pooled", detail::number_or_null(r.pearson_pooled)},
                  {"days", days}};
  io::write_json((fs::path(dir) / "metrics.json").string(), j);
}

inline MetricReport cmd_evaluate(const RunConfig& rc, const std::optional<std::string>& forecast_csv = {},
                                 std::ostream* log = &std::cerr) {
  const ExperimentConfig& cfg = rc.experiment;
  const RawSeries series = load_series(cfg.data);
  const auto days = read_forecast_csv(forecast_csv.value_or(detail::out_path(rc, "forecast.csv")), series);
  const MetricReport r = evaluate(series, days, cfg.data.daylight_threshold, cfg.patch.target_rows);
  detail::begin_run(rc);
  write_metrics(cfg.out_dir, r);
  detail::say(log, "evaluate: " + std::to_string(r.days.size()) + " days, pearson " + detail::g9(r.pearson) +
                       ", rmse " + detail::g9(r.rmse) + ", mape " + detail::g9(r.mape_percent) + "%");
  return r;
}

// ---- ablate ----

struct AblationRow {
  int experiment = 0;
  int total_features = 0;
  GridEntry entry;
  double pearson = std::numeric_limits<double>::quiet_NaN();
  double mape_fraction = std::numeric_limits<double>::quiet_NaN();
  double mape_percent = std::numeric_limits<double>::quiet_NaN();
  double rmse = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";
};

inline const char* kAblationHeader =
    "experiment,total_features,selected_features,input_image,selected_rows,pad_rows,pad_cols,cond_rows,target_rows,"
    "pearson_mean,mape_fraction,mape_percent,rmse,status";

inline void write_ablation_csv(const std::string& path, std::span<const AblationRow> rows) {
  using detail::g9;
  std::ofstream o(path);
  o << kAblationHeader << '\n';
  for (const auto& r : rows) {
    const auto& g = r.entry;
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    o << r.experiment << ',' << r.total_features << ',' << g.features << ',' << g.image_side << 'x' << g.image_side
      << ',' << g.image_side - g.pad_rows << ',' << g.pad_rows << ',' << g.pad_cols << ',' << g.cond_rows << ','
      << g.target_rows << ',' << g9(r.pearson) << ',' << g9(r.mape_fraction) << ',' << g9(r.mape_percent) << ','
      << g9(r.rmse) << ',' << status << '\n';
  }
}

inline std::vector<AblationRow> read_ablation_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (line != kAblationHeader) throw DataError(path + ": unexpected header");
  std::vector<AblationRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = detail::split_csv_line(line);
    if (c.size() != 14) throw DataError(path + ": malformed row '" + line + "'");
    auto num = [&](std::size_t i) {
      double v = std::numeric_limits<double>::quiet_NaN();
      if (c[i] != "nan" && !detail::parse_double(c[i], v)) throw DataError(path + ": bad number '" + c[i] + "'");
      return v;
    };
    AblationRow r;
    r.experiment = std::stoi(c[0]);
    r.total_features = std::stoi(c[1]);
    r.entry = {std::stoi(c[2]), std::stoi(c[3].substr(0, c[3].find('x'))), std::stoi(c[5]), std::stoi(c[6]),
               std::stoi(c[7]), std::stoi(c[8])};
    r.pearson = num(9);
    r.mape_fraction = num(10);
    r.mape_percent = num(11);
    r.rmse = num(12);
    r.status = c[13];
    rows.push_back(r);
  }
  return rows;
}

/// Pearson/error versus horizon per image-construction strategy, and Pearson versus cond_rows.
inline std::vector<std::string> write_ablation_plots(const std::string& dir, std::span<const AblationRow> rows) {
  struct Group {
    std::string label;
    std::vector<const AblationRow*> rows;
  };
  std::vector<Group> groups;
  std::map<std::tuple<int, int, int, int>, std::size_t> index;
  for (const auto& r : rows) {
    const auto& g = r.entry;
    const auto key = std::tuple{g.features, g.image_side, g.pad_rows, g.pad_cols};
    if (!index.count(key)) {
      index[key] = groups.size();
      groups.push_back({std::to_string(g.features) + " feat " + std::to_string(g.image_side) + "x" +
                            std::to_string(g.image_side) + " pad " + std::to_string(g.pad_rows) + "/" +
                            std::to_string(g.pad_cols),
                        {}});
    }
    groups[index[key]].rows.push_back(&r);
  }
  auto chart = [&](const std::string& title, const std::string& xl, const std::string& yl, auto x_of, auto y_of) {
    svg::Chart c{title, xl, yl, {}};
    for (const auto& g : groups) {
      std::vector<const AblationRow*> sorted = g.rows;
      std::stable_sort(sorted.begin(), sorted.end(), [&](auto* a, auto* b) { return x_of(*a) < x_of(*b); });
      svg::Series s{g.label, {}, {}};
      for (const auto* r : sorted) {
        s.x.push_back(x_of(*r));
        s.y.push_back(y_of(*r));
      }
      c.series.push_back(std::move(s));
    }
    return svg::render(c);
  };
  auto horizon = [](const AblationRow& r) { return static_cast<double>(r.entry.target_rows); };
  auto cond = [](const AblationRow& r) { return static_cast<double>(r.entry.cond_rows); };
  const std::vector<std::pair<std::string, std::string>> files = {
      {"pearson_vs_horizon.svg", chart("Pearson correlation versus prediction horizon", "target rows",
                                       "Pearson (mean over days)", horizon, [](auto& r) { return r.pearson; })},
      {"error_vs_horizon.svg", chart("RMSE versus prediction horizon", "target rows", "RMSE", horizon,
                                     [](auto& r) { return r.rmse; })},
      {"mape_vs_horizon.svg", chart("MAPE versus prediction horizon", "target rows", "MAPE (fraction)", horizon,
                                    [](auto& r) { return r.mape_fraction; })},
      {"pearson_vs_cond_rows.svg", chart("Pearson correlation versus conditioning rows", "cond rows",
                                         "Pearson (mean over days)", cond, [](auto& r) { return r.pearson; })},
  };
  std::vector<std::string> written;
  for (const auto& [name, text] : files) {
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream(path) << text;
    written.push_back(path);
  }
  return written;
}

/// Config for one grid entry; features beyond the configured list fall back to the first columns.
inline RunConfig ablation_experiment(const RunConfig& rc, std::size_t i) {
  RunConfig sub = rc;
  const GridEntry& g = rc.grid[i];
  ExperimentConfig& e = sub.experiment;
  e.patch = g.spec();
  e.model.image_side = g.image_side;
  if (e.data.feature_columns.size() != static_cast<std::size_t>(g.features)) e.data.feature_columns.clear();
  char name[16];
  std::snprintf(name, sizeof name, "exp%02zu", i + 1);
  e.out_dir = (fs::path(rc.experiment.out_dir) / name).string();
  sub.grid = {g};
  return sub;
}

/// Runs prepare, train, forecast and evaluate for every grid entry. A failing
/// entry is recorded in its status column and the grid continues.
inline std::vector<AblationRow> cmd_ablate(const RunConfig& rc, int parallel = 1, std::ostream* log = &std::cerr) {
  require(parallel >= 1, "--parallel must be >= 1");
  detail::begin_run(rc);
  std::vector<AblationRow> rows(rc.grid.size());
  std::mutex log_mu;
  auto note = [&](const std::string& s) {
    std::lock_guard lock(log_mu);
    detail::say(log, s);
  };
  auto run_one = [&](std::size_t i) {
    AblationRow& row = rows[i];
    row.experiment = static_cast<int>(i + 1);
    row.total_features = rc.total_features;
    row.entry = rc.grid[i];
    try {
      const RunConfig sub = ablation_experiment(rc, i);
      sub.experiment.validate();
      note("ablate: experiment " + std::to_string(i + 1) + "/" + std::to_string(rc.grid.size()) + " -> " +
           sub.experiment.out_dir);
      fs::create_directories(sub.experiment.out_dir);
      std::ofstream exp_log((fs::path(sub.experiment.out_dir) / "log.txt").string());
      cmd_prepare(sub, &exp_log);
      cmd_train(sub, &exp_log);
      cmd_forecast(sub, std::nullopt, &exp_log);
      const MetricReport r = cmd_evaluate(sub, std::nullopt, &exp_log);
      row.pearson = r.pearson;
      row.mape_fraction = r.mape_fraction;
      row.mape_percent = r.mape_percent;
      row.rmse = r.rmse;
      note("ablate: experiment " + std::to_string(i + 1) + " pearson " + detail::g9(r.pearson) + " rmse " +
           detail::g9(r.rmse));
    } catch (const std::exception& ex) {
      row.status = std::string("failed: ") + ex.what();
      note("ablate: experiment " + std::to_string(i + 1) + " " + row.status);
    }
  };
  if (parallel == 1) {
    for (std::size_t i = 0; i < rows.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < parallel; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < rows.size(); i = next++) run_one(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  write_ablation_csv(detail::out_path(rc, "ablation.csv"), rows);
  write_ablation_plots(rc.experiment.out_dir, rows);
  detail::say(log, "ablate: -> " + detail::out_path(rc, "ablation.csv"));
  return rows;
}

// ---- report ----

/// Re-renders plots and a markdown summary from whatever artifacts out_dir holds.
inline std::vector<std::string> cmd_report(const RunConfig& rc, std::ostream* log = &std::cerr) {
  const std::string dir = rc.experiment.out_dir;
  if (!fs::is_directory(dir)) throw DataError("output directory '" + dir + "' does not exist");
  std::vector<std::string> written;
  std::ostringstream md;
  md << "# pvdiff report\n\n";

  if (fs::exists(detail::out_path(rc, "ablation.csv"))) {
    const auto rows = read_ablation_csv(detail::out_path(rc, "ablation.csv"));
    for (auto& p : write_ablation_plots(dir, rows)) written.push_back(p);
    md << "## Ablation\n\n| exp | features | image | pad rows | pad cols | cond | target | Pearson | MAPE | RMSE | "
          "status |\n|---|---|---|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
      md << "| " << r.experiment << " | " << r.entry.features << " | " << r.entry.image_side << "x"
         << r.entry.image_side << " | " << r.entry.pad_rows << " | " << r.entry.pad_cols << " | " << r.entry.cond_rows
         << " | " << r.entry.target_rows << " | " << detail::g9(r.pearson) << " | " << detail::g9(r.mape_fraction)
         << " | " << detail::g9(r.rmse) << " | " << r.status << " |\n";
    }
    md << "\n";
  }

  if (fs::exists(detail::out_path(rc, "metrics.json"))) {
    const json m = io::read_json(detail::out_path(rc, "metrics.json"));
    md << "## Metrics\n\n";
    for (const char* k : {"pearson", "pearson_pooled", "rmse", "mae", "mape_percent"}) {
      md << "- " << k << ": " << (m.at(k).is_null() ? std::string("n/a") : detail::g9(m.at(k).get<double>()))
         << "\n";
    }
    md << "\n";
  }

  if (fs::exists(detail::out_path(rc, "loss_log.csv"))) {
    std::ifstream in(detail::out_path(rc, "loss_log.csv"));
    std::string line;
    std::getline(in, line);
    svg::Series train{"train", {}, {}}, val{"validation", {}, {}};
    while (std::getline(in, line)) {
      const auto c = detail::split_csv_line(line);
      if (c.size() != 4) continue;
      double e = 0, tl = 0, vl = std::numeric_limits<double>::quiet_NaN();
      detail::parse_double(c[0], e);
      detail::parse_double(c[2], tl);
      if (c[3] != "nan") detail::parse_double(c[3], vl);
      train.x.push_back(e);
      train.y.push_back(tl);
      val.x.push_back(e);
      val.y.push_back(vl);
    }
    const std::string path = detail::out_path(rc, "loss.svg");
    std::ofstream(path) << svg::render({"Masked denoising loss", "epoch", "loss", {train, val}});
    written.push_back(path);
  }

  if (fs::exists(detail::out_path(rc, "forecast.csv"))) {
    std::ifstream in(detail::out_path(rc, "forecast.csv"));
    std::string line;
    std::getline(in, line);
    svg::Series truth{"actual", {}, {}}, fore{"forecast", {}, {}};
    double k = 0;
    while (std::getline(in, line) && k < 24 * 7) {
      const auto c = detail::split_csv_line(line);
      if (c.size() < 3) continue;
      double a = 0, f = 0;
      detail::parse_double(c[1], a);
      detail::parse_double(c[2], f);
      truth.x.push_back(k);
      truth.y.push_back(a);
      fore.x.push_back(k);
      fore.y.push_back(f);
      ++k;
    }
    const std::string path = detail::out_path(rc, "forecast.svg");
    std::ofstream(path) << svg::render({"Forecast versus actual power (first week)", "hour", "power", {truth, fore}});
    written.push_back(path);
  }

  if (written.empty()) throw DataError("nothing to report in '" + dir + "'; run another command first");
  const std::string path = detail::out_path(rc, "report.md");
  std::ofstream(path) << md.str();
  written.push_back(path);
  for (const auto& p : written) detail::say(log, "report: -> " + p);
  return written;
}

}  // namespace pvdiff
