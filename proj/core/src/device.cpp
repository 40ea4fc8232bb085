#include "emgwire/device.hpp"

#include <cmath>
#include <sstream>
#include <thread>

#include "emgwire/errors.hpp"

namespace emgwire {

SteadyClock::SteadyClock() : epoch_(std::chrono::steady_clock::now()) {}

double SteadyClock::now() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - epoch_).count();
}

void SteadyClock::sleep_until(double t) {
  const auto deadline =
      epoch_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(t));
  // OS sleeps overshoot by tens of microseconds; at a 1 ms frame period that
  // adds up, so sleep short and yield through the final stretch.
  constexpr auto kSpin = std::chrono::microseconds(200);
  if (deadline - std::chrono::steady_clock::now() > kSpin) std::this_thread::sleep_until(deadline - kSpin);
  while (std::chrono::steady_clock::now() < deadline) std::this_thread::yield();
}

TokenBucket::TokenBucket(double rate_per_s, double capacity, Clock& clock)
    : rate_(rate_per_s), capacity_(capacity), tokens_(capacity), last_(clock.now()), clock_(clock) {
  if (!(rate_per_s > 0.0) || !(capacity > 0.0)) throw ConfigError("token bucket needs positive rate and capacity");
}

void TokenBucket::refill() {
  const double now = clock_.now();
  tokens_ = std::min(capacity_, tokens_ + (now - last_) * rate_);
  last_ = now;
}

double TokenBucket::available() {
  refill();
  return tokens_;
}

bool TokenBucket::try_consume(double n) {
  refill();
  if (tokens_ < n) return false;
  tokens_ -= n;
  return true;
}

void TokenBucket::consume(double n) {
  if (n > capacity_) throw ConfigError("request exceeds token bucket capacity");
  refill();
  while (tokens_ < n) {
    clock_.sleep_until(last_ + (n - tokens_) / rate_);
    refill();
  }
  tokens_ -= n;
}

void DeviceConfig::validate() const {
  if (!(sample_rate > 0.0)) throw ConfigError("sample rate must be positive");
  const double tp = throughput(baud, frame_bits);
  if (!(tp > sample_rate)) {
    std::ostringstream msg;
    msg << "throughput " << tp << " Hz (" << baud << " bps / " << frame_bits
        << " bits) does not exceed the sample rate " << sample_rate << " SPS";
    throw ConfigError(msg.str());
  }
  if (frame_bits != frame_bits_for_bytes(static_cast<int>(kFrameBytes))) {
    throw ConfigError("only the 11-byte (110-bit) windowed frame is implemented");
  }
  if (oversample < 1) throw ConfigError("oversample factor must be >= 1");
  if (!(mains_amplitude >= 0.0)) throw ConfigError("mains amplitude must be >= 0");
  if (duration_s && !(*duration_s >= 0.0)) throw ConfigError("duration must be >= 0");
  adc.validate();
  if (!bypass_filter) band_pass.validate(internal_rate());
}

DeviceSimulator::DeviceSimulator(const DeviceConfig& cfg, std::unique_ptr<SignalSource> source)
    : cfg_(cfg), source_(std::move(source)) {
  cfg_.validate();
  if (!source_) throw ConfigError("device needs a signal source");
  if (std::abs(source_->sample_rate() - cfg_.internal_rate()) > 1e-9) {
    throw ConfigError("source rate must equal the device internal rate");
  }
  if (!cfg_.bypass_filter) {
    filters_.assign(kChannels, BandPassFilter(cfg_.band_pass, cfg_.internal_rate()));
  }
  if (cfg_.mains_amplitude > 0.0) {
    mains_.emplace(cfg_.mains_amplitude, cfg_.mains_freq, cfg_.internal_rate(), cfg_.seed ^ 0x6d61696e73ULL);
  }
}

Frame DeviceSimulator::next_frame() {
  // The ADC samples the first of each group of `oversample` analog samples,
  // so output sample k sits exactly at t = k / sample_rate.
  ChannelVolts v{};
  for (int i = 0; i < cfg_.oversample; ++i) {
    source_->next(v);
    if (mains_) mains_->apply(v);
    if (!filters_.empty()) {
      for (std::size_t ch = 0; ch < kChannels; ++ch) v[ch] = filters_[ch].process(v[ch]);
    }
    if (i == 0) analog_ = v;
  }
  for (std::size_t ch = 0; ch < kChannels; ++ch) {
    codes_[ch] = encode_window(adc_quantize(cfg_.adc, analog_[ch]));
  }
  ++frames_;
  return pack_frame(codes_);
}

std::optional<std::uint64_t> DeviceSimulator::natural_frames() const {
  if (auto d = source_->duration_s()) return static_cast<std::uint64_t>(std::llround(*d * cfg_.sample_rate));
  return std::nullopt;
}

DeviceReport run_device(const DeviceConfig& cfg, std::unique_ptr<SignalSource> source, ByteSink& sink,
                        Clock& clock, const std::atomic<bool>* stop) {
  DeviceSimulator device(cfg, std::move(source));
  std::optional<std::uint64_t> limit = device.natural_frames();
  if (cfg.duration_s) limit = static_cast<std::uint64_t>(std::llround(*cfg.duration_s * cfg.sample_rate));

  TokenBucket bytes(cfg.baud / kBitsPerWireByte, static_cast<double>(kFrameBytes), clock);
  DeviceReport report;
  const double start = clock.now();
  const double period = 1.0 / cfg.sample_rate;
  try {
    for (std::uint64_t k = 0; !limit || k < *limit; ++k) {
      if (stop && stop->load(std::memory_order_relaxed)) break;
      // Frame k is due at start + k * period; absolute deadlines do not drift.
      clock.sleep_until(start + static_cast<double>(k) * period);
      const Frame f = device.next_frame();
      bytes.consume(static_cast<double>(kFrameBytes));
      sink.write(f.bytes);
      ++report.frames;
      report.bytes += kFrameBytes;
    }
  } catch (const TransportError& e) {
    report.error = e.what();
  }
  report.elapsed_s = clock.now() - start;
  try {
    sink.close();
  } catch (const TransportError&) {
  }
  return report;
}

}  // namespace emgwire
