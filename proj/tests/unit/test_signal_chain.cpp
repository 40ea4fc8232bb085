#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "emgwire/codec.hpp"
#include "emgwire/errors.hpp"
#include "emgwire/signal_chain.hpp"
#include "support/oracles.hpp"

namespace emgwire {
namespace {

using testing::db;
using testing::kPi;

constexpr double kFsInternal = 16000.0;

std::vector<double> sine(double f, double amp, double fs, std::size_t n, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * kPi * f * i / fs + phase);
  return x;
}

template <class Filter>
std::vector<double> run(Filter& f, const std::vector<double>& x) {
  std::vector<double> y(x.size());
  f.apply(x, y);
  return y;
}

TEST(AdcSpec, StepSizes) {
  const AdcSpec adc;
  EXPECT_DOUBLE_EQ(adc.lsb(), 0.5364418029785156e-6);
  EXPECT_DOUBLE_EQ(adc.window_step(), 34.332275390625e-6);
  EXPECT_DOUBLE_EQ(kWindowStepVolts, adc.window_step());
  EXPECT_DOUBLE_EQ(511 * kWindowStepVolts, 17.543792724609375e-3);
}

TEST(AdcQuantize, Examples) {
  const AdcSpec adc;
  EXPECT_EQ(adc_quantize(adc, 17.63e-3).value, 32865);
  EXPECT_EQ(encode_window(adc_quantize(adc, 17.63e-3)), (WindowCode{true, 511}));
  EXPECT_EQ(adc_quantize(adc, 1e-3).value, 1864);
  EXPECT_DOUBLE_EQ(code_to_volts(decode_window(encode_window(adc_quantize(adc, 1e-3)))), 0.995635986328125e-3);
  EXPECT_EQ(adc_quantize(adc, 0.0).value, 0);
  EXPECT_EQ(adc_quantize(adc, std::nan("")).value, 0);
  EXPECT_EQ(adc_quantize(adc, 10.0).value, kRawMax);
  EXPECT_EQ(adc_quantize(adc, -10.0).value, kRawMin);
}

TEST(CodeToVolts, RangeAndValues) {
  EXPECT_DOUBLE_EQ(code_to_volts(0), 0.0);
  EXPECT_DOUBLE_EQ(code_to_volts(1), 34.332275390625e-6);
  EXPECT_DOUBLE_EQ(code_to_volts(-511), -17.543792724609375e-3);
  EXPECT_THROW(code_to_volts(512), RangeError);
  EXPECT_THROW(code_to_volts(-512), RangeError);
  EXPECT_DOUBLE_EQ(code_to_volts(AdcSpec{}, 200), code_to_volts(200));
}

// In-window voltages come back within one step, never with larger magnitude.
TEST(Quantization, ErrorBoundedByOneStep) {
  const AdcSpec adc;
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> v(-17.5e-3, 17.5e-3);
  for (int i = 0; i < 100000; ++i) {
    const double x = v(rng);
    const double y = code_to_volts(decode_window(encode_window(adc_quantize(adc, x))));
    ASSERT_LE(std::abs(x - y), 34.34e-6) << x;
    ASSERT_LE(std::abs(y), std::abs(x) + adc.lsb()) << x;
  }
}

TEST(BandPass, AnalyticResponseAtKeyFrequencies) {
  BandPassFilter bp(BandPassSpec{}, kFsInternal);
  // Frozen from the analog oracle: 1, 7.234, 50, 338.627, 450 Hz.
  const std::pair<double, double> expected[] = {
      {1.0, -17.2698}, {7.234, -3.01228}, {50.0, -0.18364}, {338.627, -3.01228}, {450.0, -4.41959}};
  for (const auto& [f, want_db] : expected) {
    EXPECT_NEAR(db(testing::analog_bandpass_gain(f)), want_db, 1e-4) << f;
    EXPECT_NEAR(db(std::abs(bp.response(f))), want_db, 0.2) << f;
  }
}

TEST(BandPass, SimulatedGainMatchesAnalog) {
  for (double f : {1.0, 7.234, 50.0, 338.627, 450.0}) {
    BandPassFilter bp(BandPassSpec{}, kFsInternal);
    const std::size_t n = static_cast<std::size_t>(kFsInternal * 8.0);
    const auto y = run(bp, sine(f, 1.0, kFsInternal, n));
    const double got = testing::tone_amplitude(y, f, kFsInternal, f < 5.0 ? 2.0 : 20.0);
    EXPECT_NEAR(db(got), db(testing::analog_bandpass_gain(f)), 0.2) << f;
  }
}

TEST(BandPass, BlocksDc) {
  BandPassFilter bp(BandPassSpec{}, kFsInternal);
  const std::vector<double> x(static_cast<std::size_t>(kFsInternal * 2.0), 0.01);
  const auto y = run(bp, x);
  EXPECT_LT(std::abs(y.back()), 1e-6);
  EXPECT_NEAR(std::abs(bp.response(0.0)), 0.0, 1e-12);
}

TEST(BandPass, RejectsLowSampleRate) {
  EXPECT_THROW(BandPassFilter(BandPassSpec{}, 1000.0), ConfigError);
  EXPECT_THROW(BandPassFilter(BandPassSpec{300.0, 100.0}, kFsInternal), ConfigError);
  EXPECT_NO_THROW(BandPassFilter(BandPassSpec{}, 4 * 338.627));
}

TEST(BandPass, Linear) {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> g(0.0, 1e-3);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> a(2000), b(2000), mix(2000);
    const double alpha = coef(rng), beta = coef(rng);
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = g(rng);
      b[i] = g(rng);
      mix[i] = alpha * a[i] + beta * b[i];
    }
    BandPassFilter fa(BandPassSpec{}, kFsInternal), fb(BandPassSpec{}, kFsInternal), fm(BandPassSpec{}, kFsInternal);
    const auto ya = run(fa, a), yb = run(fb, b), ym = run(fm, mix);
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(ym[i], alpha * ya[i] + beta * yb[i], 1e-9);
  }
}

TEST(BandPass, BoundedInputBoundedOutput) {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  BandPassFilter bp(BandPassSpec{}, kFsInternal);
  double peak = 0.0;
  for (int i = 0; i < 200000; ++i) peak = std::max(peak, std::abs(bp.process(u(rng))));
  // Sum of |h| of a first-order HP x first-order LP stays below 4.
  EXPECT_LT(peak, 4.0);
}

TEST(Notch, DesignedResponse) {
  NotchFilter notch;
  // Frozen from the closed-form biquad at fs = 1000.
  EXPECT_NEAR(db(std::abs(notch.response(30.0))), -0.00218, 1e-4);
  EXPECT_NEAR(db(std::abs(notch.response(59.0))), -2.976, 1e-3);
  EXPECT_NEAR(db(std::abs(notch.response(61.0))), -3.044, 1e-3);
  EXPECT_NEAR(db(std::abs(notch.response(100.0))), -0.00406, 1e-4);
  EXPECT_NEAR(db(std::abs(notch.response(120.0))), -0.00199, 1e-4);
  EXPECT_LT(db(std::abs(notch.response(60.0))), -200.0);
  EXPECT_NEAR(std::abs(notch.response(0.0)), 1.0, 1e-12);
  EXPECT_NEAR(std::abs(notch.response(500.0)), 1.0, 1e-12);
}

TEST(Notch, MinusThreeDbBandwidth) {
  NotchFilter notch;
  const double half_power = 1.0 / std::sqrt(2.0);
  auto find_edge = [&](double lo, double hi) {
    // Bisection on |H| - 1/sqrt(2), |H| decreasing toward 60 Hz.
    const bool rising = std::abs(notch.response(lo)) < std::abs(notch.response(hi));
    for (int i = 0; i < 100; ++i) {
      const double mid = 0.5 * (lo + hi);
      const bool below = std::abs(notch.response(mid)) < half_power;
      if (below == rising) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  const double lower = find_edge(50.0, 60.0);
  const double upper = find_edge(60.0, 70.0);
  EXPECT_NEAR(upper - lower, 2.0, 1e-6);
}

TEST(Notch, AttenuatesMainsInTimeDomain) {
  NotchFilter notch;
  const auto x = sine(60.0, 1e-3, 1000.0, 3000, 0.3);
  const auto y = run(notch, x);
  EXPECT_LE(testing::rms(y, 1000), 0.1 * testing::rms(x, 1000));
}

TEST(Notch, PassesDcAndDistantTones) {
  NotchFilter dc_notch;
  const std::vector<double> ones(3000, 1.0);
  const auto dc = run(dc_notch, ones);
  EXPECT_NEAR(dc.back(), 1.0, 0.01);

  NotchFilter notch;
  const auto y = run(notch, sine(100.0, 1.0, 1000.0, 4000));
  EXPECT_NEAR(db(testing::tone_amplitude(y, 100.0, 1000.0, 100.0)), 0.0, 1.0);
}

TEST(Notch, RejectsBadSpecs) {
  EXPECT_THROW(NotchFilter(NotchSpec{60.0, 0.0}), ConfigError);
  EXPECT_THROW(NotchFilter(NotchSpec{499.5, 2.0}), ConfigError);
  EXPECT_THROW(NotchFilter(NotchSpec{0.5, 2.0}), ConfigError);
}

TEST(Mains, RmsIsAmplitudeOverRootTwo) {
  const std::vector<double> zero(10000, 0.0);
  const auto y = inject_mains(zero, 2e-3, 60.0, 1000.0, 4);
  EXPECT_NEAR(testing::rms(y), 2e-3 / std::sqrt(2.0), 0.01 * 2e-3 / std::sqrt(2.0));
}

TEST(Mains, PhasesDependOnSeedAndDifferPerChannel) {
  MainsInjector a(1.0, 60.0, 1000.0, 1), b(1.0, 60.0, 1000.0, 1), c(1.0, 60.0, 1000.0, 2);
  EXPECT_EQ(a.phases(), b.phases());
  EXPECT_NE(a.phases(), c.phases());
  for (std::size_t i = 1; i < kChannels; ++i) EXPECT_NE(a.phases()[0], a.phases()[i]);
}

TEST(Mains, ZeroAmplitudeIsIdentity) {
  std::vector<double> x = {1.0, -2.0, 3.0};
  EXPECT_EQ(inject_mains(x, 0.0, 60.0, 1000.0, 1), x);
  EXPECT_THROW(inject_mains(x, -1.0, 60.0, 1000.0, 1), ConfigError);
}

}  // namespace
}  // namespace emgwire
