#pragma once

// Analog and mixed-signal path model: RC band-pass, ideal 24-bit ADC,
// window-code to volts conversion, host-side 60 Hz notch, mains injection.

#include <array>
#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "emgwire/codec.hpp"

namespace emgwire {

// ADC front end: differential input, internal reference, PGA gain 1.
struct AdcSpec {
  double vref = 4.5;
  int bits = 24;
  int pga = 1;

  // Volts per count (vref / 2^23 at PGA 1).
  double lsb() const;
  // Volts per window step (64 counts).
  double window_step() const { return lsb() * (1 << kWindowShift); }
  double full_scale() const { return vref / pga; }
  void validate() const;
};

// Round-to-nearest, clamped to the 24-bit range. NaN maps to 0.
Raw24Sample adc_quantize(const AdcSpec& spec, double volts);

// Exact value of one window step: 4.5 V * 64 / 2^23.
inline constexpr double kWindowStepVolts = 4.5 * 64.0 / 8388608.0;

// Decoded window steps to volts. Throws RangeError outside [-511, 511].
double code_to_volts(int code);
double code_to_volts(const AdcSpec& spec, int code);

// Direct-form-I recursive section. First-order sections set b2 = a2 = 0.
struct BiquadCoefficients {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;

  // H(e^{jw}) at normalized angular frequency w = 2*pi*f/fs.
  std::complex<double> response(double w) const;
};

class Biquad {
 public:
  Biquad() = default;
  explicit Biquad(const BiquadCoefficients& c) : c_(c) {}

  double process(double x) {
    const double y = c_.b0 * x + c_.b1 * x1_ + c_.b2 * x2_ - c_.a1 * y1_ - c_.a2 * y2_;
    x2_ = x1_;
    x1_ = x;
    y2_ = y1_;
    y1_ = y;
    return y;
  }

  void reset() { x1_ = x2_ = y1_ = y2_ = 0.0; }
  const BiquadCoefficients& coefficients() const { return c_; }

 private:
  BiquadCoefficients c_;
  double x1_ = 0.0, x2_ = 0.0;  // previous inputs
  double y1_ = 0.0, y2_ = 0.0;  // previous outputs
};

// Cascade of an RC high-pass and an RC low-pass, ideally buffered.
struct BandPassSpec {
  double f_hp = 7.234;
  double f_lp = 338.627;

  // Requires 0 < f_hp < f_lp and fs >= 4 * f_lp.
  void validate(double fs) const;
};

// H(s) = s/(s+w_hp) * w_lp/(s+w_lp), bilinear transform prewarped at each
// cutoff. One instance holds one channel's state.
class BandPassFilter {
 public:
  BandPassFilter(const BandPassSpec& spec, double fs);

  double process(double x) { return low_.process(high_.process(x)); }
  void apply(std::span<const double> in, std::span<double> out);
  void reset();

  std::complex<double> response(double f_hz) const;
  const BandPassSpec& spec() const { return spec_; }
  double sample_rate() const { return fs_; }

 private:
  BandPassSpec spec_;
  double fs_;
  Biquad high_;
  Biquad low_;
};

// Second-order notch with an exact -3 dB bandwidth and unity gain at DC and
// Nyquist.
struct NotchSpec {
  double f0 = 60.0;
  double bandwidth = 2.0;

  void validate(double fs) const;
};

BiquadCoefficients design_notch(const NotchSpec& spec, double fs);

class NotchFilter {
 public:
  explicit NotchFilter(const NotchSpec& spec = {}, double fs = 1000.0);

  double process(double x) { return section_.process(x); }
  void apply(std::span<const double> in, std::span<double> out);
  void reset() { section_.reset(); }

  std::complex<double> response(double f_hz) const;
  const NotchSpec& spec() const { return spec_; }

 private:
  NotchSpec spec_;
  double fs_;
  Biquad section_;
};

// Adds amplitude * sin(2*pi*f*t + phase_ch) to each channel, with an
// independent seeded random phase per channel.
class MainsInjector {
 public:
  MainsInjector(double amplitude, double f_hz, double fs, std::uint64_t seed);

  // Adds interference for the current sample to every channel, then advances.
  void apply(std::span<double> channels);
  const std::array<double, kChannels>& phases() const { return phases_; }

 private:
  double amplitude_;
  double f_;
  double fs_;
  std::uint64_t n_ = 0;
  std::array<double, kChannels> phases_{};
};

// Single-channel convenience form: returns samples + A*sin(2*pi*f*n/fs + phi).
std::vector<double> inject_mains(std::span<const double> samples, double amplitude, double f_hz,
                                 double fs, std::uint64_t seed);

}  // namespace emgwire
