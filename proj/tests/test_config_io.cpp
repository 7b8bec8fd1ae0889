#include <gtest/gtest.h>

#include <filesystem>

#include "pvdiff/checkpoint.hpp"
#include "pvdiff/config.hpp"

namespace pvdiff {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pvdiff_test_io_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Grid<float> random_values(Rng& rng) {
  Grid<float> g(16, 3);
  for (auto& v : g.data) v = static_cast<float>(rng.normal());
  return g;
}

TEST(ConfigFile, Values) {
  const auto f = ConfigFile::parse(R"(
# comment
top = 1
[a]
s = "x # not a comment"   # trailing
n = -2.5e-3
b = true
list = ["p", "q"]
rows = [
  [1, 2],
  [3, 4],  # inline
]
)");
  EXPECT_EQ(f.get_int("top"), 1);
  EXPECT_EQ(f.get_string("a.s"), "x # not a comment");
  EXPECT_DOUBLE_EQ(f.get_double("a.n"), -2.5e-3);
  EXPECT_TRUE(f.get_bool("a.b"));
  EXPECT_EQ(f.get_strings("a.list"), (std::vector<std::string>{"p", "q"}));
  EXPECT_EQ(f.get_int_rows("a.rows"), (std::vector<std::vector<long long>>{{1, 2}, {3, 4}}));
  EXPECT_TRUE(f.unused_keys().empty());
}

TEST(ConfigFile, Errors) {
  EXPECT_THROW(ConfigFile::parse("a = bare"), ConfigError);
  EXPECT_THROW(ConfigFile::parse("a = 1\na = 2"), ConfigError);
  EXPECT_THROW(ConfigFile::parse("[x\n"), ConfigError);
  EXPECT_THROW(ConfigFile::parse("a = [1, 2"), ConfigError);
  EXPECT_THROW(ConfigFile::parse("a = \"open"), ConfigError);
  const auto f = ConfigFile::parse("a = 1.5");
  EXPECT_THROW(f.get_int("a"), ConfigError);
  EXPECT_THROW(f.get_string("a"), ConfigError);
  EXPECT_THROW(f.get_double("missing"), ConfigError);
}

TEST(RunConfig, UnknownKeyRejected) {
  EXPECT_THROW(run_config_from(ConfigFile::parse("[training]\nepoch = 3\n")), ConfigError);
}

TEST(RunConfig, InconsistentSpecRejected) {
  EXPECT_THROW(run_config_from(ConfigFile::parse("[patch]\ncond_rows = 14\n")), ConfigError);
}

TEST(RunConfig, RoundTrip) {
  const auto rc = run_config_from(ConfigFile::parse(R"(
[run]
out_dir = "runs/x"
seed = 18446744073709551615
[data]
csv = "data.csv"
feature_columns = ["a", "b"]
split_fractions = [0.7, 0.1, 0.2]
[patch]
window_rows = 25
feature_count = 2
image_side = 32
cond_rows = 21
target_rows = 4
[schedule]
steps = 100
beta_end = 0.2
[training]
learning_rate = 0.002
[forecast]
from = "2013-05-01"
num_samples = 3
[ablate]
grid = [[16, 16, 0, 0, 15, 1]]
)"));
  EXPECT_EQ(rc.seed, 18446744073709551615ull);
  EXPECT_EQ(rc.experiment.model.image_side, 32);
  EXPECT_EQ(rc.grid.size(), 1u);
  EXPECT_EQ(rc.experiment.training.seed, derive_seed(rc.seed, 1));
  const std::string text = to_toml(rc);
  const auto back = run_config_from(ConfigFile::parse(text));
  EXPECT_EQ(to_toml(back), text);
  EXPECT_EQ(back.experiment.training.learning_rate, 0.002);
  EXPECT_EQ(back.experiment.forecast.from_day, parse_day("2013-05-01"));
}

TEST(RunConfig, DefaultGridIsAblationLayouts) {
  const RunConfig rc;
  ASSERT_EQ(rc.grid.size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_EQ(rc.grid[i].spec(), ablation_specs()[i]);
  EXPECT_EQ(rc.grid[4], (GridEntry{25, 32, 7, 7, 24, 1}));
}

TEST(RunConfig, SyntheticRoundTrip) {
  const auto rc = run_config_from(ConfigFile::parse("[synthetic]\nrows = 300\nnoise = 0.1\n"));
  ASSERT_TRUE(rc.experiment.data.synthetic);
  EXPECT_EQ(rc.experiment.data.synthetic->rows, 300u);
  EXPECT_EQ(to_toml(run_config_from(ConfigFile::parse(to_toml(rc)))), to_toml(rc));
}

TEST(Checkpoint, RoundTrip) {
  const auto dir = scratch("ckpt");
  DenoiserConfig cfg;
  cfg.base_channels = 8;
  cfg.depth = 2;
  cfg.time_embed_dim = 16;
  cfg.norm_groups = 4;
  Checkpoint c;
  c.model = cfg;
  c.params = UNet<float>(cfg).init_params(3, false);
  c.normalizer = Normalizer({0.0, -1.5}, {2.0, 7.25});
  c.feature_names = {"power", "radiation"};
  c.columns = {0, 1};
  c.steps = 17;
  save_checkpoint(dir.string(), c);
  const Checkpoint back = load_checkpoint(dir.string());
  EXPECT_TRUE(back.params == c.params);
  EXPECT_EQ(back.normalizer.maxs(), c.normalizer.maxs());
  EXPECT_EQ(back.normalizer.mins(), c.normalizer.mins());
  EXPECT_EQ(back.steps, 17u);
  EXPECT_EQ(back.model.base_channels, 8);
  EXPECT_EQ(load_checkpoint((dir / "model.json").string()).steps, 17u);
}

TEST(Checkpoint, MismatchedTensorsRejected) {
  const auto dir = scratch("ckpt_bad");
  DenoiserConfig small;
  small.base_channels = 8;
  small.depth = 2;
  small.time_embed_dim = 16;
  small.norm_groups = 4;
  Checkpoint c;
  c.model = small;
  c.params = UNet<float>(small).init_params(3);
  c.normalizer = Normalizer({0.0}, {1.0});
  save_checkpoint(dir.string(), c);
  write_tensors((dir / "model.bin").string(), UNet<float>(DenoiserConfig{}).init_params(3));
  EXPECT_THROW(load_checkpoint(dir.string()), DataError);
  EXPECT_THROW(load_checkpoint((dir / "nowhere").string()), DataError);
}

TEST(PatchCache, RoundTrip) {
  const auto dir = scratch("cache");
  PatchCache c;
  c.spec = {16, 3, 16, 15, 1};
  c.columns = {0, 1, 2};
  c.column_names = {"a", "b", "c"};
  c.split = {{0, 30}, {30, 40}, {40, 50}};
  c.first_timestamp = 15706 * 24;
  c.series_rows = 50;
  Rng rng(1);
  for (std::size_t i = 0; i < 35; ++i) c.patches.push_back({random_values(rng), i});
  const std::string path = (dir / "patches.bin").string();
  save_patch_cache(path, c);
  const PatchCache back = load_patch_cache(path);
  ASSERT_EQ(back.patches.size(), 35u);
  for (std::size_t i = 0; i < 35; ++i) {
    EXPECT_EQ(back.patches[i].values, c.patches[i].values);
    EXPECT_EQ(back.patches[i].origin, i);
  }
  EXPECT_EQ(back.split.validation, c.split.validation);
  EXPECT_EQ(back.first_timestamp, c.first_timestamp);
  EXPECT_EQ(back.within(back.split.train).size(), 15u);
}

}  // namespace
}  // namespace pvdiff
