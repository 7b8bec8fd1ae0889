// pvdiff: conditional-diffusion PV power forecasting from the command line.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "pvdiff/pvdiff.hpp"

namespace {

int run(int argc, char** argv) {
  CLI::App app{"Conditional diffusion inpainting for multivariate PV power forecasting"};
  app.require_subcommand(1);
  pvdiff::CommandOptions opt;
  std::uint64_t seed = 0;
  std::string out, checkpoint, forecast, from, to;

  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "Run config (TOML-style)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Root seed (overrides run.seed)");
    sub->add_option("--out", out, "Output directory (overrides run.out_dir)");
  };
  auto* prepare = app.add_subcommand("prepare", "Normalize the series and cache every patch");
  auto* train = app.add_subcommand("train", "Train the denoiser on the cached patches");
  auto* fc = app.add_subcommand("forecast", "Forecast test days with a trained checkpoint");
  auto* eval = app.add_subcommand("evaluate", "Score a forecast CSV against the series");
  auto* ablate = app.add_subcommand("ablate", "Run the patch-layout ablation grid");
  auto* report = app.add_subcommand("report", "Render plots and a summary from an output directory");
  for (auto* s : {prepare, train, fc, eval, ablate, report}) common(s);
  fc->add_option("--checkpoint", checkpoint, "Checkpoint directory or model.json (default: output directory)");
  fc->add_option("--from", from, "First day to forecast (YYYY-MM-DD)");
  fc->add_option("--to", to, "Last day to forecast, inclusive");
  eval->add_option("--forecast", forecast, "Forecast CSV (default: <out>/forecast.csv)");
  ablate->add_option("--parallel", opt.parallel, "Experiments run concurrently")->check(CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth", "Write the synthetic benchmark series as CSV");
  pvdiff::SyntheticOptions so;
  std::string synth_out = "synthetic.csv";
  synth->add_option("--rows", so.rows, "Hourly rows")->capture_default_str();
  synth->add_option("--features", so.features, "Feature columns")->capture_default_str();
  synth->add_option("--noise", so.noise, "Noise standard deviation")->capture_default_str();
  synth->add_option("--seed", so.seed, "Generator seed")->capture_default_str();
  synth->add_option("--out", synth_out, "Output CSV path")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(pvdiff::ExitCode::usage);
  }

  if (synth->parsed()) {
    std::ofstream o(synth_out);
    if (!o) throw pvdiff::DataError("cannot write '" + synth_out + "'");
    pvdiff::write_csv(o, pvdiff::make_synthetic_series(so));
    return 0;
  }

  auto* active = app.get_subcommands().front();
  if (active->count("--seed")) opt.seed = seed;
  if (active->count("--out")) opt.out_dir = out;
  if (!checkpoint.empty()) opt.checkpoint = checkpoint;
  if (!forecast.empty()) opt.forecast_csv = forecast;
  if (!from.empty()) opt.from = from;
  if (!to.empty()) opt.to = to;
  const pvdiff::RunConfig rc = pvdiff::resolve_run_config(opt);

  if (prepare->parsed()) pvdiff::cmd_prepare(rc);
  if (train->parsed()) pvdiff::cmd_train(rc);
  if (fc->parsed()) pvdiff::cmd_forecast(rc, opt.checkpoint);
  if (eval->parsed()) pvdiff::cmd_evaluate(rc, opt.forecast_csv);
  if (ablate->parsed()) pvdiff::cmd_ablate(rc, opt.parallel);
  if (report->parsed()) pvdiff::cmd_report(rc);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  using pvdiff::ExitCode;
  try {
    return run(argc, argv);
  } catch (const pvdiff::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::usage);
  } catch (const pvdiff::DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data);
  } catch (const pvdiff::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::numerical);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data);
  }
}
