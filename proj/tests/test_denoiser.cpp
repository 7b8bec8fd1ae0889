#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "pvdiff/denoiser.hpp"
#include "pvdiff/patching.hpp"
#include "pvdiff/rng.hpp"

namespace pvdiff {
namespace {

DenoiserConfig tiny_config() {
  DenoiserConfig cfg;
  cfg.image_side = 16;
  cfg.base_channels = 4;
  cfg.depth = 2;
  cfg.time_embed_dim = 8;
  cfg.norm_groups = 2;
  return cfg;
}

template <typename S>
Grid<S> random_image(std::size_t side, Rng& rng) {
  Grid<S> g(side, side);
  for (auto& v : g.data) v = static_cast<S>(rng.normal());
  return g;
}

template <typename S>
std::vector<DenoisingExample<S>> random_batch(const PatchSpec& spec, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<DenoisingExample<S>> batch;
  const auto side = static_cast<std::size_t>(spec.image_side);
  for (std::size_t b = 0; b < n; ++b) {
    batch.push_back({random_image<S>(side, rng), build_mask(spec), 1 + static_cast<int>(b) * 7,
                     random_image<S>(side, rng)});
  }
  return batch;
}

TEST(TimeEmbedding, ZeroStepAlternatesSinCos) {
  const auto e = sinusoidal_time_embedding(0, 8);
  for (int k = 0; k < 8; ++k) EXPECT_EQ(e[k], k % 2 == 0 ? 0.0 : 1.0);
}

TEST(TimeEmbedding, AdjacentStepsDifferInEverySinSlot) {
  const auto a = sinusoidal_time_embedding(0, 16);
  const auto b = sinusoidal_time_embedding(1, 16);
  for (int k = 0; k < 16; k += 2) EXPECT_NE(a[k], b[k]);
}

TEST(TimeEmbedding, MatchesCalculatorValues) {
  // Computed with an independent script (tests/oracles/schedule_oracle.py).
  const auto e = sinusoidal_time_embedding(10000, 4);
  EXPECT_NEAR(e[0], -0.30561438888825215, 1e-12);
  EXPECT_NEAR(e[1], -0.9521553682590148, 1e-12);
  EXPECT_NEAR(e[2], -0.5063656411097588, 1e-12);
  EXPECT_NEAR(e[3], 0.8623188722876839, 1e-12);
}

TEST(TimeEmbedding, RejectsOddDimension) { EXPECT_THROW(sinusoidal_time_embedding(3, 5), ConfigError); }

TEST(DenoiserConfig, RejectsIndivisibleSide) {
  DenoiserConfig cfg = tiny_config();
  cfg.depth = 5;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = tiny_config();
  cfg.norm_groups = 3;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(InitParams, SameSeedIsBitIdentical) {
  EXPECT_TRUE(init_params(tiny_config(), 11) == init_params(tiny_config(), 11));
  EXPECT_FALSE(init_params(tiny_config(), 11) == init_params(tiny_config(), 12));
}

TEST(PredictNoise, UntrainedNetworkPredictsZero) {
  for (int side : {16, 32}) {
    DenoiserConfig cfg = tiny_config();
    cfg.image_side = side;
    const auto params = init_params(cfg, 3);
    Rng rng(5);
    const PatchSpec spec{side, side == 16 ? 16 : 25, side, side - 2, 2};
    const auto out = predict_noise(params, cfg, random_image<float>(side, rng), build_mask(spec), 17);
    ASSERT_EQ(out.rows, static_cast<std::size_t>(side));
    ASSERT_EQ(out.cols, static_cast<std::size_t>(side));
    for (float v : out.data) EXPECT_EQ(v, 0.0f);
  }
}

TEST(PredictNoise, RejectsNonFiniteInputAndBadShapes) {
  const auto cfg = tiny_config();
  const auto params = init_params(cfg, 3);
  Grid<float> img(16, 16, 0.0f);
  const auto mask = build_mask(PatchSpec{16, 16, 16, 15, 1});
  img(3, 3) = std::nanf("");
  EXPECT_THROW(predict_noise(params, cfg, img, mask, 1), NumericalError);
  EXPECT_THROW(predict_noise(params, cfg, Grid<float>(32, 32), mask, 1), ConfigError);
}

TEST(PredictNoise, IsPureAndReactsToSinglePixelAfterTraining) {
  const auto cfg = tiny_config();
  const UNet<float> net(cfg);
  auto params = net.init_params(9);
  const PatchSpec spec{16, 16, 16, 12, 4};
  const auto batch = random_batch<float>(spec, 4, 21);
  // One plain gradient step moves the zero head off zero.
  auto lg = loss_and_grad<float>(net, params, batch);
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t k = 0; k < params[i].data.size(); ++k) params[i].data[k] -= 0.1f * lg.grads[i].data[k];
  }
  Rng rng(2);
  auto img = random_image<float>(16, rng);
  const auto mask = build_mask(spec);
  const auto a = predict_noise(params, cfg, img, mask, 5);
  EXPECT_EQ(a, predict_noise(params, cfg, img, mask, 5));
  img(2, 3) += 0.5f;
  EXPECT_NE(a, predict_noise(params, cfg, img, mask, 5));
}

TEST(MaskedLoss, PerfectPredictionHasZeroLoss) {
  const PatchSpec spec{16, 16, 16, 8, 8};
  const auto batch = random_batch<double>(spec, 2, 4);
  Tensor<double> pred(1, 2, 16, 16);
  for (int b = 0; b < 2; ++b) std::copy(batch[b].noise.data.begin(), batch[b].noise.data.end(), pred.ptr(0, b));
  const auto ml = masked_mse<double>(pred, batch);
  EXPECT_EQ(ml.loss, 0.0);
  for (double d : ml.d_pred.v) EXPECT_EQ(d, 0.0);
}

TEST(MaskedLoss, UnmaskedCellsNeverContribute) {
  const PatchSpec spec{25, 25, 32, 21, 4};
  const auto batch = random_batch<double>(spec, 3, 8);
  Rng rng(1);
  Tensor<double> pred(1, 3, 32, 32);
  for (auto& v : pred.v) v = rng.normal();
  const auto base = masked_mse<double>(pred, batch);
  EXPECT_EQ(base.masked_cells, 3u * 4u * 25u);
  const auto mask = build_mask(spec);
  for (int b = 0; b < 3; ++b) {
    for (std::size_t i = 0; i < mask.cells.size(); ++i) {
      if (!mask.cells.data[i]) {
        pred.ptr(0, b)[i] += 1e3 * rng.normal();
        EXPECT_EQ(base.d_pred.ptr(0, b)[i], 0.0);
      }
    }
  }
  EXPECT_EQ(masked_mse<double>(pred, batch).loss, base.loss);
}

TEST(MaskedLoss, RejectsEmptyBatchAndEmptyMask) {
  EXPECT_THROW(masked_mse<double>(Tensor<double>(1, 0, 16, 16), {}), ConfigError);
  std::vector<DenoisingExample<double>> batch(1);
  batch[0].x_t = Grid<double>(16, 16);
  batch[0].noise = Grid<double>(16, 16);
  batch[0].mask.cells = Grid<std::uint8_t>(16, 16, 0);
  EXPECT_THROW(masked_mse<double>(Tensor<double>(1, 1, 16, 16), batch), ConfigError);
}

// Central finite differences in double precision against the analytic backward pass.
TEST(LossAndGrad, MatchesFiniteDifferences) {
  const auto cfg = tiny_config();
  const UNet<double> net(cfg);
  auto params = net.init_params(2024, /*zero_head=*/false);
  const PatchSpec spec{16, 16, 16, 10, 6};
  const auto batch = random_batch<double>(spec, 2, 77);
  const auto lg = loss_and_grad<double>(net, params, batch);
  const double h = 1e-4;
  double worst = 0.0;
  std::mt19937_64 pick(3);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& data = params[i].data;
    // Probe a handful of entries per tensor here; the acceptance suite probes all.
    for (int trial = 0; trial < 3; ++trial) {
      const std::size_t k = pick() % data.size();
      const double keep = data[k];
      data[k] = keep + h;
      const double up = loss_and_grad<double>(net, params, batch).loss;
      data[k] = keep - h;
      const double down = loss_and_grad<double>(net, params, batch).loss;
      data[k] = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = lg.grads[i].data[k];
      const double rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-6});
      worst = std::max(worst, rel);
      EXPECT_LT(rel, 1e-4) << params[i].name << "[" << k << "] analytic " << analytic << " numeric " << numeric;
    }
  }
  RecordProperty("worst_relative_error", std::to_string(worst));
}

}  // namespace
}  // namespace pvdiff
