#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "emgwire/codec.hpp"

namespace emgwire {

using ChannelVolts = std::array<double, kChannels>;

struct SineSpec {
  ChannelVolts freq_hz{};
  ChannelVolts amplitude{};  // peak volts

  static SineSpec uniform(double freq_hz, double amplitude_v);
};

// Multi-channel recording in volts at a fixed rate.
struct ReplayData {
  double sample_rate = 1000.0;
  std::size_t source_channels = kChannels;
  std::vector<ChannelVolts> samples;

  double duration_s() const { return samples.size() / sample_rate; }
};

// CSV: optional header row; optional leading time column (seconds); remaining
// columns are channel values. Header names ending in _mV / _uV scale to volts.
// Without a header, 9 columns means time + 8 channels. A single channel is
// broadcast to all eight, other counts below eight leave the rest at zero.
// `default_rate` applies when no time column is present.
ReplayData parse_replay_csv(std::istream& in, double default_rate = 1000.0);
ReplayData load_replay_csv(const std::filesystem::path& path, double default_rate = 1000.0);

struct ReplaySpec {
  std::filesystem::path path;
  double gain = 1.0;
  double default_rate = 1000.0;
  // Takes precedence over `path` when set.
  std::shared_ptr<const ReplayData> data;
};

struct GestureSegment {
  double duration_s = 1.0;
  std::bitset<kChannels> active;
  double amplitude_v = 0.0;  // approximate burst peak on active channels
};

struct GestureScript {
  std::vector<GestureSegment> segments;
  double rest_rms_v = 10e-6;
  double band_lo_hz = 20.0;
  double band_hi_hz = 150.0;

  // 6 s: rest, triceps (ch1-4, 5 mV), rest, biceps (ch5-8, 2 mV), rest.
  static GestureScript standard();
  double duration_s() const;
  void validate() const;
};

using SourceSpec = std::variant<SineSpec, ReplaySpec, GestureScript>;

// Per-sample 8-channel generator at a fixed rate.
class SignalSource {
 public:
  virtual ~SignalSource() = default;
  virtual void next(std::span<double, kChannels> out) = 0;
  virtual double sample_rate() const = 0;
  // Natural length of the signal, if bounded. Samples past the end are zero.
  virtual std::optional<double> duration_s() const { return std::nullopt; }
};

// Deterministic given the seed. Replay input is linearly interpolated to `fs`.
std::unique_ptr<SignalSource> make_source(const SourceSpec& spec, double fs, std::uint64_t seed);

// "sine:F,A" | "sine:F,A1,...,A8" | "zero" | "gesture" | "replay:PATH[,GAIN]"
SourceSpec parse_source_spec(const std::string& text);

}  // namespace emgwire
