#include <gtest/gtest.h>

#include <sstream>

#include "pvdiff/data.hpp"

namespace pvdiff {
namespace {

std::string csv_with_25_features(int rows) {
  std::ostringstream o;
  o << "timestamp";
  for (int f = 0; f < 25; ++f) o << ",c" << f;
  o << "\n";
  for (int r = 0; r < rows; ++r) {
    o << "2014-04-01 0" << r << ":00";
    for (int f = 0; f < 25; ++f) o << ',' << r * 25 + f;
    o << "\n";
  }
  return o.str();
}

CsvOptions options_for_c() {
  CsvOptions opt;
  opt.power_column = "c0";
  opt.radiation_column = "c1";
  return opt;
}

TEST(LoadCsv, Shape) {
  std::istringstream in(csv_with_25_features(3));
  const RawSeries s = load_csv(in, options_for_c());
  EXPECT_EQ(s.rows(), 3u);
  EXPECT_EQ(s.features(), 25u);
  EXPECT_EQ(s.at(2, 24), 74.0);
  EXPECT_EQ(s.power_index, 0u);
  EXPECT_EQ(s.radiation_index, 1u);
}

TEST(LoadCsv, GapNamesRow) {
  std::istringstream in("timestamp,power,radiation\n2014-04-01 00:00,1,2\n2014-04-01 02:00,1,2\n");
  try {
    load_csv(in, {});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("row 3"), std::string::npos) << e.what();
  }
}

TEST(LoadCsv, MissingColumnNamed) {
  std::istringstream in("timestamp,power\n2014-04-01 00:00,1\n");
  try {
    load_csv(in, {});
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("radiation"), std::string::npos) << e.what();
  }
}

TEST(LoadCsv, NonMonotonicAndUnparsable) {
  std::istringstream back("timestamp,power,radiation\n2014-04-01 01:00,1,2\n2014-04-01 00:00,1,2\n");
  EXPECT_THROW(load_csv(back, {}), DataError);
  std::istringstream bad("timestamp,power,radiation\n2014-04-01 00:00,1,x\n");
  EXPECT_THROW(load_csv(bad, {}), DataError);
}

TEST(LoadCsv, ForwardFill) {
  const std::string text = "timestamp,power,radiation\n2014-04-01 00:00,1,2\n2014-04-01 01:00,,3\n";
  std::istringstream strict(text);
  EXPECT_THROW(load_csv(strict, {}), DataError);
  CsvOptions opt;
  opt.forward_fill = true;
  std::istringstream filled(text);
  EXPECT_EQ(load_csv(filled, opt).at(1, 0), 1.0);
}

TEST(LoadCsv, WriteReadRoundTrip) {
  SyntheticOptions so;
  so.rows = 50;
  so.features = 4;
  const RawSeries s = make_synthetic_series(so);
  std::stringstream io;
  write_csv(io, s);
  const RawSeries back = load_csv(io, {});
  EXPECT_EQ(back.timestamps, s.timestamps);
  EXPECT_EQ(back.feature_names, s.feature_names);
  for (std::size_t i = 0; i < s.values.size(); ++i) EXPECT_NEAR(back.values[i], s.values[i], 5e-7);
}

RawSeries two_point_series(double lo, double hi) {
  RawSeries s;
  s.feature_names = {"x"};
  s.timestamps = {0, 1};
  s.values = {lo, hi};
  return s;
}

TEST(Normalizer, Endpoints) {
  const Normalizer n = Normalizer::fit(two_point_series(0, 2), {0, 2});
  EXPECT_EQ(n.apply(0, 1.0), 0.0);
  EXPECT_EQ(n.apply(0, 2.0), 1.0);
  EXPECT_EQ(n.apply(0, 0.0), -1.0);
}

TEST(Normalizer, RoundTrip) {
  Rng rng(3);
  const Normalizer n = Normalizer::fit(two_point_series(-3.7, 12.25), {0, 2});
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double x = -3.7 + 15.95 * rng.uniform();
    worst = std::max(worst, std::abs(n.invert(0, n.apply(0, x)) - x));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Normalizer, ConstantFeatureWarnsAndMapsToZero) {
  std::ostringstream warn;
  const Normalizer n = Normalizer::fit(two_point_series(4, 4), {0, 2}, &warn);
  EXPECT_NE(warn.str().find("constant"), std::string::npos);
  EXPECT_EQ(n.apply(0, 4.0), 0.0);
  EXPECT_EQ(n.apply(0, 9.0), 0.0);
}

TEST(Normalizer, FitsTrainingRowsOnly) {
  RawSeries s;
  s.feature_names = {"x"};
  s.timestamps = {0, 1, 2};
  s.values = {0, 2, 100};
  const Normalizer n = Normalizer::fit(s, {0, 2});
  EXPECT_EQ(n.max(0), 2.0);
}

RawSeries radiation_series(const std::vector<double>& day0_radiation) {
  RawSeries s;
  s.feature_names = {"power", "radiation"};
  s.power_index = 0;
  s.radiation_index = 1;
  for (int h = 0; h < 48; ++h) {
    s.timestamps.push_back(100 * 24 + h);
    s.values.push_back(0.0);
    s.values.push_back(h < 24 ? day0_radiation[static_cast<std::size_t>(h)] : 0.0);
  }
  return s;
}

TEST(Daylight, AllZeroPredecessor) {
  const auto s = radiation_series(std::vector<double>(24, 0.0));
  const auto m = daylight_mask(s, 101);
  EXPECT_EQ(std::count(m.begin(), m.end(), true), 0);
}

TEST(Daylight, PositiveSixToEighteen) {
  std::vector<double> rad(24, 0.0);
  for (int h = 6; h <= 18; ++h) rad[static_cast<std::size_t>(h)] = 1.0 + h;
  const auto m = daylight_mask(radiation_series(rad), 101);
  for (int h = 0; h < 24; ++h) EXPECT_EQ(m[static_cast<std::size_t>(h)], h >= 6 && h <= 18) << h;
}

TEST(Daylight, FirstDayHasNoPredecessor) {
  const auto s = radiation_series(std::vector<double>(24, 1.0));
  EXPECT_THROW(daylight_mask(s, 100), DataError);
}

TEST(Daylight, ThresholdIsStrict) {
  std::vector<double> rad(24, 0.0);
  rad[12] = 0.5;
  EXPECT_EQ(daylight_mask(radiation_series(rad), 101, 0.5)[12], false);
  EXPECT_EQ(daylight_mask(radiation_series(rad), 101, 0.4)[12], true);
}

TEST(NightZeroing, Cases) {
  EXPECT_EQ(apply_night_zeroing({5, 5, 5}, std::vector<bool>{false, true, false}), (std::vector<double>{0, 5, 0}));
  EXPECT_EQ(apply_night_zeroing({1, 2}, std::vector<bool>{true, true}), (std::vector<double>{1, 2}));
  EXPECT_EQ(apply_night_zeroing({1, 2}, std::vector<bool>{false, false}), (std::vector<double>{0, 0}));
  EXPECT_THROW(apply_night_zeroing({1, 2}, std::vector<bool>{true}), ConfigError);
}

TEST(NightZeroing, Idempotent) {
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> f(24);
    std::vector<bool> m(24);
    for (std::size_t h = 0; h < 24; ++h) {
      f[h] = rng.normal();
      m[h] = rng.uniform() < 0.5;
    }
    const auto once = apply_night_zeroing(f, m);
    EXPECT_EQ(apply_night_zeroing(once, m), once);
  }
}

TEST(Split, Small) {
  const auto s = chrono_split(10, {0.8, 0.1, 0.1});
  EXPECT_EQ(s.train, (IndexRange{0, 8}));
  EXPECT_EQ(s.validation, (IndexRange{8, 9}));
  EXPECT_EQ(s.test, (IndexRange{9, 10}));
}

TEST(Split, LongSeries) {
  const auto s = chrono_split(50375, {0.7, 0.1, 0.2});
  EXPECT_EQ(s.train.size(), 35262u);
  EXPECT_EQ(s.validation.size(), 5038u);
  EXPECT_EQ(s.test.size(), 10075u);
}

TEST(Split, Rejects) {
  EXPECT_THROW(chrono_split(100, {0.7, 0.1, 0.1}), ConfigError);
  EXPECT_THROW(chrono_split(3, {0.8, 0.1, 0.1}), ConfigError);
  EXPECT_THROW(chrono_split(100, {0.0, 0.5, 0.5}), ConfigError);
}

TEST(Split, PartitionProperty) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t rows = 20 + static_cast<std::size_t>(rng.uniform_int(0, 5000));
    double a = 0.1 + rng.uniform(), b = 0.1 + rng.uniform(), c = 0.1 + rng.uniform();
    const double sum = a + b + c;
    a /= sum;
    b /= sum;
    c = 1.0 - a - b;
    const auto s = chrono_split(rows, {a, b, c});
    EXPECT_EQ(s.train.begin, 0u);
    EXPECT_EQ(s.train.end, s.validation.begin);
    EXPECT_EQ(s.validation.end, s.test.begin);
    EXPECT_EQ(s.test.end, rows);
  }
}

TEST(Timestamps, Formats) {
  EXPECT_EQ(parse_timestamp("2013-01-01 00:00"), std::optional<HourStamp>(15706 * 24));
  EXPECT_EQ(parse_timestamp("2013-01-01T05:00:00"), std::optional<HourStamp>(15706 * 24 + 5));
  EXPECT_EQ(parse_timestamp("20130101 5:00"), std::optional<HourStamp>(15706 * 24 + 5));
  EXPECT_EQ(parse_timestamp("2013-01-01 24:00"), std::optional<HourStamp>(15707 * 24));
  EXPECT_FALSE(parse_timestamp("2013-01-01 05:30"));
  EXPECT_FALSE(parse_timestamp("2013-02-30 05:00"));
  EXPECT_EQ(format_timestamp(15706 * 24 + 23), "2013-01-01 23:00");
  EXPECT_EQ(format_day(15706), "2013-01-01");
}

TEST(Synthetic, Shape) {
  SyntheticOptions so;
  const RawSeries s = make_synthetic_series(so);
  EXPECT_EQ(s.rows(), 5000u);
  EXPECT_EQ(s.features(), 16u);
  EXPECT_EQ(s.feature_names[0], "power");
  EXPECT_EQ(s.feature_names[1], "radiation");
  const RawSeries again = make_synthetic_series(so);
  EXPECT_EQ(s.values, again.values);
}

}  // namespace
}  // namespace pvdiff
