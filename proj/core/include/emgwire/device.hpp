#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "emgwire/codec.hpp"
#include "emgwire/signal_chain.hpp"
#include "emgwire/sources.hpp"
#include "emgwire/transport.hpp"

namespace emgwire {

// Seconds since an arbitrary epoch.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now() = 0;
  virtual void sleep_until(double t) = 0;
};

class SteadyClock final : public Clock {
 public:
  SteadyClock();
  double now() override;
  void sleep_until(double t) override;

 private:
  std::chrono::steady_clock::time_point epoch_;
};

// Advances instantly; sleeping just moves time forward.
class VirtualClock final : public Clock {
 public:
  double now() override { return t_; }
  void sleep_until(double t) override {
    if (t > t_) t_ = t;
  }

 private:
  double t_ = 0.0;
};

class TokenBucket {
 public:
  TokenBucket(double rate_per_s, double capacity, Clock& clock);

  bool try_consume(double n);
  // Sleeps on the clock until n tokens are available, then takes them.
  void consume(double n);
  double available();

 private:
  void refill();

  double rate_;
  double capacity_;
  double tokens_;
  double last_;
  Clock& clock_;
};

struct DeviceConfig {
  double sample_rate = 1000.0;
  double baud = 115200.0;
  // Wire cost of one message including UART framing.
  int frame_bits = frame_bits_for_bytes(static_cast<int>(kFrameBytes));
  int oversample = 16;
  bool bypass_filter = false;
  double mains_amplitude = 0.0;
  double mains_freq = 60.0;
  BandPassSpec band_pass;
  AdcSpec adc;
  std::uint64_t seed = 1;
  bool virtual_clock = false;
  // Stop after this long; unset runs until the source ends (or forever).
  std::optional<double> duration_s;

  double internal_rate() const { return sample_rate * oversample; }
  // Rejects configs whose message rate cannot carry the sample rate.
  void validate() const;
};

// Builds one frame per output sample: source at the oversampled rate, mains,
// band-pass (unless bypassed), decimation, ADC, windowing, packing.
class DeviceSimulator {
 public:
  DeviceSimulator(const DeviceConfig& cfg, std::unique_ptr<SignalSource> source);

  Frame next_frame();

  // Analog input to the ADC at the last output instant, volts.
  const ChannelVolts& last_analog() const { return analog_; }
  const ChannelCodes& last_codes() const { return codes_; }
  std::uint64_t frames_built() const { return frames_; }
  std::optional<std::uint64_t> natural_frames() const;

 private:
  DeviceConfig cfg_;
  std::unique_ptr<SignalSource> source_;
  std::vector<BandPassFilter> filters_;
  std::optional<MainsInjector> mains_;
  ChannelVolts analog_{};
  ChannelCodes codes_{};
  std::uint64_t frames_ = 0;
};

struct DeviceReport {
  std::uint64_t frames = 0;
  std::uint64_t bytes = 0;
  double elapsed_s = 0.0;
  std::string error;  // empty on clean completion

  bool ok() const { return error.empty(); }
  double bytes_per_s() const { return elapsed_s > 0.0 ? bytes / elapsed_s : 0.0; }
};

// Emits frames paced to cfg.sample_rate, with the byte rate capped at
// baud / 10 by a token bucket. Transport failures end the run and are
// reported, not thrown. Closes the sink when done.
DeviceReport run_device(const DeviceConfig& cfg, std::unique_ptr<SignalSource> source, ByteSink& sink,
                        Clock& clock, const std::atomic<bool>* stop = nullptr);

}  // namespace emgwire
