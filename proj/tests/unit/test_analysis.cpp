#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "emgwire/analysis.hpp"
#include "emgwire/errors.hpp"
#include "support/oracles.hpp"

namespace emgwire {
namespace {

using testing::kPi;

std::vector<double> tone(double f, double amp, double fs, std::size_t n, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * kPi * f * i / fs + phase);
  return x;
}

TEST(Mse, Examples) {
  const std::vector<double> a = {0.0, 1.0, 2.0}, b = {1.0, 1.0, 1.0};
  EXPECT_DOUBLE_EQ(mse(a, b), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(mse(a, a), 0.0);
  EXPECT_THROW(mse(std::vector<double>{}, std::vector<double>{}), ConfigError);
  EXPECT_THROW(mse(a, std::vector<double>{1.0}), ConfigError);
}

TEST(Mse, SymmetricNonNegativeAndShiftInvariant) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(64), b(64), as(64), bs(64);
    const double shift = g(rng) * 10.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = g(rng);
      b[i] = g(rng);
      as[i] = a[i] + shift;
      bs[i] = b[i] + shift;
    }
    ASSERT_GE(mse(a, b), 0.0);
    ASSERT_DOUBLE_EQ(mse(a, b), mse(b, a));
    ASSERT_NEAR(mse(as, bs), mse(a, b), 1e-9);
  }
}

TEST(Attenuation, Examples) {
  EXPECT_NEAR(attenuation_db(17.63, 17.56), 0.034556, 1e-6);
  EXPECT_NEAR(attenuation_db(2.0, 1.0), 6.020599913, 1e-9);
  EXPECT_DOUBLE_EQ(attenuation_db(3.0, 3.0), 0.0);
  EXPECT_THROW(attenuation_db(0.0, 1.0), ConfigError);
  EXPECT_THROW(attenuation_db(1.0, 0.0), ConfigError);
}

TEST(Attenuation, AntisymmetricAndAdditive) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(1e-3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng), c = u(rng);
    ASSERT_NEAR(attenuation_db(a, b), -attenuation_db(b, a), 1e-9);
    ASSERT_NEAR(attenuation_db(a, c), attenuation_db(a, b) + attenuation_db(b, c), 1e-9);
  }
}

TEST(Spectrum, MatchesNaiveDftSingleSegment) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t n : {64u, 100u, 256u}) {
    std::vector<double> x(n);
    for (double& v : x) v = g(rng);
    for (bool hann : {true, false}) {
      const auto s = spectrum(x, 1000.0, hann ? Window::hann : Window::rectangular, n);
      const auto want = testing::naive_power_spectrum(x, hann);
      ASSERT_EQ(s.power.size(), want.size());
      EXPECT_EQ(s.segments, 1u);
      for (std::size_t k = 0; k < want.size(); ++k) ASSERT_NEAR(s.power[k], want[k], 1e-9) << n << " " << k;
    }
  }
}

TEST(Spectrum, PeakAtToneFrequency) {
  const auto x = tone(100.0, 1.0, 1000.0, 8192);
  const auto s = spectrum(x, 1000.0);
  EXPECT_NEAR(s.freq_hz[s.peak_bin()], 100.0, s.resolution());
  EXPECT_NEAR(s.band_power(95.0, 105.0), 0.5, 0.01);
  EXPECT_EQ(s.bin_of(100.0), s.peak_bin());
}

TEST(Spectrum, DcLandsInBinZeroWithRectangularWindow) {
  const std::vector<double> x(2048, 0.25);
  const auto s = spectrum(x, 1000.0, Window::rectangular);
  EXPECT_EQ(s.peak_bin(), 0u);
  EXPECT_NEAR(s.power[0], 0.0625, 1e-12);
  EXPECT_NEAR(s.total_power(), 0.0625, 1e-12);
}

TEST(Spectrum, TwoTonesGiveTwoPeaks) {
  auto x = tone(60.0, 1.0, 1000.0, 8192);
  const auto y = tone(200.0, 0.5, 1000.0, 8192, 1.0);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
  const auto s = spectrum(x, 1000.0);
  const auto p = s.peaks(2);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_NEAR(s.freq_hz[p[0]], 60.0, s.resolution());
  EXPECT_NEAR(s.freq_hz[p[1]], 200.0, s.resolution());
  EXPECT_NEAR(10.0 * std::log10(s.band_power(55.0, 65.0) / s.band_power(195.0, 205.0)), 6.0206, 0.05);
}

// Band powers sum to the mean square for stationary input.
TEST(Spectrum, ParsevalProperty) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> f(5.0, 450.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto x = tone(f(rng), 1.0 + trial * 0.1, 1000.0, 16384, trial);
    for (double& v : x) v += 0.3 * g(rng);
    double ms = 0.0;
    for (double v : x) ms += v * v;
    ms /= static_cast<double>(x.size());
    const auto s = spectrum(x, 1000.0);
    EXPECT_NEAR(s.total_power(), ms, 0.01 * ms) << trial;
  }
}

TEST(Spectrum, ShortSignalsAndCsv) {
  EXPECT_THROW(spectrum(std::vector<double>(63, 1.0), 1000.0), ConfigError);
  const auto s = spectrum(tone(50.0, 1.0, 1000.0, 500), 1000.0);
  EXPECT_EQ(s.nfft, 500u);
  std::ostringstream out;
  s.write_csv(out);
  const std::string text = out.str();
  EXPECT_EQ(text.rfind("freq_hz,magnitude_db\n", 0), 0u);
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), 1 + 251u);
}

TEST(ChannelMv, Column) {
  std::vector<ChannelBlock> blocks(3);
  blocks[1].ch[7] = 1e-3;
  const auto mv = channel_mv(blocks, 7);
  EXPECT_EQ(mv, (std::vector<double>{0.0, 1.0, 0.0}));
  EXPECT_THROW(channel_mv(blocks, 8), ConfigError);
}

TEST(RunLoopback, DeliversRequestedSamples) {
  PipelineOptions opt;
  opt.device.virtual_clock = true;
  opt.session.duration_s = 0.5;
  const auto r = run_loopback(opt, SineSpec::uniform(10.0, 1e-3));
  EXPECT_TRUE(r.device.ok()) << r.device.error;
  EXPECT_EQ(r.host.recording.size(), 500u);
  EXPECT_TRUE(r.host.summary.error.empty());
}

TEST(ValidateSine, FullScaleInput) {
  const auto r = validate_sine(SineValidationConfig{});
  EXPECT_TRUE(r.passed()) << r.to_text();
  EXPECT_EQ(r.samples, 2000u);
  EXPECT_NEAR(r.output_peak_mv, 17.5437927, 1e-6);
  EXPECT_GE(r.ratio_pct, 99.0);
  EXPECT_NE(r.to_text().find("result: PASS"), std::string::npos);
  EXPECT_NE(r.to_key_values().find("passed=true"), std::string::npos);
}

TEST(ValidateSine, SmallAmplitudesWithinOneStep) {
  for (double a : {0.0, 0.5e-3, 3e-3, 10e-3}) {
    SineValidationConfig cfg;
    cfg.amplitude_v = a;
    cfg.freq_hz = 7.0;
    cfg.duration_s = 1.0;
    const auto r = validate_sine(cfg);
    EXPECT_TRUE(r.passed()) << r.to_text();
    EXPECT_LE(r.output_peak_mv, a * 1e3 + 1e-9);
  }
}

TEST(ValidateSine, RejectsBadConfig) {
  SineValidationConfig cfg;
  cfg.freq_hz = 0.0;
  EXPECT_THROW(validate_sine(cfg), ConfigError);
}

TEST(SyntheticReference, Deterministic) {
  const auto a = synthetic_reference(1, 2.0), b = synthetic_reference(1, 2.0), c = synthetic_reference(2, 2.0);
  EXPECT_EQ(a.samples.size(), 2000u);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(a.samples, c.samples);
  EXPECT_THROW(synthetic_reference(1, 0.0), ConfigError);
}

TEST(ValidateReplay, SyntheticReferencePasses) {
  ReplayValidationConfig cfg;
  cfg.reference = std::make_shared<ReplayData>(synthetic_reference(5));
  const auto r = validate_replay(cfg);
  EXPECT_TRUE(r.passed()) << r.to_text();
  ASSERT_TRUE(r.mse_filtered_mv2);
  EXPECT_LE(*r.mse_filtered_mv2, 1.18e-3);
  EXPECT_GT(*r.mse_raw_mv2, *r.mse_filtered_mv2);
  EXPECT_EQ(r.samples, 6000u);
}

TEST(ValidateReplay, ZeroSignalGivesZeroError) {
  auto data = std::make_shared<ReplayData>();
  data->samples.assign(1000, ChannelVolts{});
  ReplayValidationConfig cfg;
  cfg.reference = data;
  const auto r = validate_replay(cfg);
  EXPECT_TRUE(r.passed()) << r.to_text();
  EXPECT_EQ(*r.mse_filtered_mv2, 0.0);
  EXPECT_EQ(r.checks.size(), 1u);
}

TEST(ValidateReplay, RejectsWrongRate) {
  auto data = std::make_shared<ReplayData>();
  data->sample_rate = 500.0;
  data->samples.assign(100, ChannelVolts{});
  ReplayValidationConfig cfg;
  cfg.reference = data;
  EXPECT_THROW(validate_replay(cfg), ConfigError);
  cfg.reference = nullptr;
  EXPECT_THROW(validate_replay(cfg), ConfigError);
}

}  // namespace
}  // namespace emgwire
