#include "emgwire/signal_chain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

#include "emgwire/errors.hpp"

namespace emgwire {

namespace {

constexpr double kPi = std::numbers::pi;

// First-order sections via the bilinear transform, prewarped so the digital
// -3 dB point lands exactly on fc.
BiquadCoefficients first_order_highpass(double fc, double fs) {
  const double k = std::tan(kPi * fc / fs);
  BiquadCoefficients c;
  c.b0 = 1.0 / (1.0 + k);
  c.b1 = -c.b0;
  c.a1 = (k - 1.0) / (k + 1.0);
  return c;
}

BiquadCoefficients first_order_lowpass(double fc, double fs) {
  const double k = std::tan(kPi * fc / fs);
  BiquadCoefficients c;
  c.b0 = k / (1.0 + k);
  c.b1 = c.b0;
  c.a1 = (k - 1.0) / (k + 1.0);
  return c;
}

}  // namespace

double AdcSpec::lsb() const { return vref / pga / static_cast<double>(1 << (bits - 1)); }

void AdcSpec::validate() const {
  if (!(vref > 0.0) || pga <= 0 || bits != 24) {
    throw ConfigError("ADC model supports 24 bits, positive vref and pga only");
  }
}

Raw24Sample adc_quantize(const AdcSpec& spec, double volts) {
  if (std::isnan(volts)) return Raw24Sample{0};
  const double counts = volts / spec.lsb();
  if (counts >= static_cast<double>(kRawMax)) return Raw24Sample{kRawMax};
  if (counts <= static_cast<double>(kRawMin)) return Raw24Sample{kRawMin};
  const auto q = std::llround(counts);
  return Raw24Sample{static_cast<std::int32_t>(std::clamp<long long>(q, kRawMin, kRawMax))};
}

double code_to_volts(int code) {
  if (code < -static_cast<int>(kMaxMagnitude) || code > static_cast<int>(kMaxMagnitude)) {
    throw RangeError("window code " + std::to_string(code) + " outside [-511, 511]");
  }
  return code * kWindowStepVolts;
}

double code_to_volts(const AdcSpec& spec, int code) {
  return code_to_volts(code) / kWindowStepVolts * spec.window_step();
}

std::complex<double> BiquadCoefficients::response(double w) const {
  const std::complex<double> z1 = std::polar(1.0, -w);
  const std::complex<double> z2 = z1 * z1;
  return (b0 + b1 * z1 + b2 * z2) / (1.0 + a1 * z1 + a2 * z2);
}

void BandPassSpec::validate(double fs) const {
  if (!(f_hp > 0.0) || !(f_lp > f_hp)) {
    throw ConfigError("band-pass requires 0 < f_hp < f_lp");
  }
  if (!(fs >= 4.0 * f_lp)) {
    std::ostringstream msg;
    msg << "band-pass sample rate " << fs << " Hz is below 4 x f_lp (" << 4.0 * f_lp << " Hz)";
    throw ConfigError(msg.str());
  }
}

BandPassFilter::BandPassFilter(const BandPassSpec& spec, double fs) : spec_(spec), fs_(fs) {
  spec_.validate(fs);
  high_ = Biquad(first_order_highpass(spec.f_hp, fs));
  low_ = Biquad(first_order_lowpass(spec.f_lp, fs));
}

void BandPassFilter::apply(std::span<const double> in, std::span<double> out) {
  if (out.size() < in.size()) throw ConfigError("band-pass output buffer too small");
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = process(in[i]);
}

void BandPassFilter::reset() {
  high_.reset();
  low_.reset();
}

std::complex<double> BandPassFilter::response(double f_hz) const {
  const double w = 2.0 * kPi * f_hz / fs_;
  return high_.coefficients().response(w) * low_.coefficients().response(w);
}

void NotchSpec::validate(double fs) const {
  if (!(bandwidth > 0.0) || !(f0 - bandwidth / 2.0 > 0.0) || !(f0 + bandwidth / 2.0 < fs / 2.0)) {
    std::ostringstream msg;
    msg << "notch " << f0 << " Hz / " << bandwidth << " Hz does not fit inside (0, " << fs / 2.0
        << ") Hz";
    throw ConfigError(msg.str());
  }
}

BiquadCoefficients design_notch(const NotchSpec& spec, double fs) {
  spec.validate(fs);
  const double w0 = 2.0 * kPi * spec.f0 / fs;
  const double dw = 2.0 * kPi * spec.bandwidth / fs;
  const double g = 1.0 / (1.0 + std::tan(dw / 2.0));
  const double c = std::cos(w0);
  BiquadCoefficients coeffs;
  coeffs.b0 = g;
  coeffs.b1 = -2.0 * c * g;
  coeffs.b2 = g;
  coeffs.a1 = -2.0 * c * g;
  coeffs.a2 = 2.0 * g - 1.0;
  return coeffs;
}

NotchFilter::NotchFilter(const NotchSpec& spec, double fs)
    : spec_(spec), fs_(fs), section_(design_notch(spec, fs)) {}

void NotchFilter::apply(std::span<const double> in, std::span<double> out) {
  if (out.size() < in.size()) throw ConfigError("notch output buffer too small");
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = process(in[i]);
}

std::complex<double> NotchFilter::response(double f_hz) const {
  return section_.coefficients().response(2.0 * kPi * f_hz / fs_);
}

MainsInjector::MainsInjector(double amplitude, double f_hz, double fs, std::uint64_t seed)
    : amplitude_(amplitude), f_(f_hz), fs_(fs) {
  if (!(amplitude >= 0.0) || !(f_hz > 0.0) || !(fs > 0.0)) {
    throw ConfigError("mains injection needs amplitude >= 0 and positive frequencies");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  for (auto& p : phases_) p = phase(rng);
}

void MainsInjector::apply(std::span<double> channels) {
  if (amplitude_ > 0.0) {
    // Reduce n modulo one mains period count to keep the argument small.
    const double t = static_cast<double>(n_) / fs_;
    const double arg = 2.0 * kPi * std::fmod(f_ * t, 1.0);
    for (std::size_t ch = 0; ch < channels.size() && ch < kChannels; ++ch) {
      channels[ch] += amplitude_ * std::sin(arg + phases_[ch]);
    }
  }
  ++n_;
}

std::vector<double> inject_mains(std::span<const double> samples, double amplitude, double f_hz,
                                 double fs, std::uint64_t seed) {
  MainsInjector injector(amplitude, f_hz, fs, seed);
  std::vector<double> out(samples.begin(), samples.end());
  for (double& v : out) injector.apply(std::span<double>(&v, 1));
  return out;
}

}  // namespace emgwire
