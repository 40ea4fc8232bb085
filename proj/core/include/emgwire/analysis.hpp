#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emgwire/device.hpp"
#include "emgwire/host.hpp"
#include "emgwire/sources.hpp"

namespace emgwire {

// Mean of squared differences. Throws ConfigError on empty or mismatched input.
double mse(std::span<const double> a, std::span<const double> b);

// 20*log10(in/out). Throws ConfigError unless both peaks are > 0.
double attenuation_db(double in_peak, double out_peak);

enum class Window { hann, rectangular };

// One-sided power spectrum. power[k] is the mean-square contribution of bin k
// (signal units squared), so the bins sum to the signal's mean square.
struct Spectrum {
  double fs = 0.0;
  std::size_t nfft = 0;
  std::size_t segments = 0;
  std::vector<double> freq_hz;
  std::vector<double> power;

  double resolution() const { return fs / static_cast<double>(nfft); }
  double magnitude_db(std::size_t k) const;
  double total_power() const;
  // Power in bins whose centre lies in [lo_hz, hi_hz].
  double band_power(double lo_hz, double hi_hz) const;
  std::size_t peak_bin() const;
  // Local maxima sorted by descending power, at most `count`.
  std::vector<std::size_t> peaks(std::size_t count) const;
  std::size_t bin_of(double f_hz) const;

  // freq_hz,magnitude_db
  void write_csv(std::ostream& out) const;
};

// Welch average of `nfft`-point segments with 50% overlap. A signal shorter
// than nfft is analysed as one segment of its own length. Window power is
// normalised out, so a stationary signal's band powers are unbiased.
// Throws ConfigError when fewer than 64 samples are given.
Spectrum spectrum(std::span<const double> signal, double fs, Window window = Window::hann,
                  std::size_t nfft = 2048);

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct ValidationReport {
  std::string experiment;
  double input_peak_mv = 0.0;
  double output_peak_mv = 0.0;
  double ratio_pct = 0.0;
  double attenuation_db = 0.0;
  std::optional<double> mse_raw_mv2;
  std::optional<double> mse_filtered_mv2;
  std::size_t samples = 0;
  std::size_t alignment_lag = 0;
  std::vector<Check> checks;
  std::vector<std::string> notes;

  bool passed() const;
  std::string to_text() const;
  // key=value lines.
  std::string to_key_values() const;
};

struct PipelineOptions {
  DeviceConfig device;
  SessionConfig session;
  // Frames the device sends beyond the session length, covering what the
  // host drops while acquiring lock.
  std::uint64_t extra_frames = 16;
};

struct PipelineResult {
  DeviceReport device;
  SessionResult host;
};

// Device simulator -> loopback pipe -> host session, on two threads. Uses a
// VirtualClock when options.device.virtual_clock is set.
PipelineResult run_loopback(const PipelineOptions& options, const SourceSpec& source);

struct SineValidationConfig {
  double freq_hz = 1.0;
  double amplitude_v = 17.63e-3;
  double duration_s = 2.0;
  std::uint64_t seed = 1;
  bool virtual_clock = true;
};

// Filter bypassed, sine through the full loopback pipeline.
ValidationReport validate_sine(const SineValidationConfig& cfg);

struct ReplayValidationConfig {
  std::shared_ptr<const ReplayData> reference;  // at 1000 SPS
  std::uint64_t seed = 1;
  bool virtual_clock = true;
  double settle_s = 0.5;
  std::size_t max_lag = 16;
};

// The reference after the device's analog band-pass (same oversampled model
// and decimation, no quantization), one row per 1000 SPS sample.
std::vector<ChannelVolts> bandpass_reference(const ReplayData& reference, const DeviceConfig& device);

// Replay through the full chain with the filter on; MSE against the raw and
// the band-pass-filtered reference.
ValidationReport validate_replay(const ReplayValidationConfig& cfg);

// Deterministic stand-in for a recorded sEMG reference at 1000 SPS: gesture
// bursts plus slow baseline wander below the high-pass cutoff.
ReplayData synthetic_reference(std::uint64_t seed, double seconds = 6.0);

// One column (0-based channel) of a recording, in mV.
std::vector<double> channel_mv(std::span<const ChannelBlock> blocks, std::size_t channel);

}  // namespace emgwire
