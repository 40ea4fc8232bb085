#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "emgwire/codec.hpp"
#include "emgwire/frame_sync.hpp"
#include "emgwire/signal_chain.hpp"
#include "emgwire/transport.hpp"

namespace emgwire {

inline constexpr double kHostSampleRate = 1000.0;

// One timestamped 8-channel sample, volts. t = index / 1000.
struct ChannelBlock {
  std::uint64_t index = 0;
  double t = 0.0;
  std::array<double, kChannels> ch{};

  friend bool operator==(const ChannelBlock&, const ChannelBlock&) = default;
};

// Decoded frame before it is assigned a session index.
struct DecodedSample {
  ChannelCodes codes{};
  std::array<double, kChannels> volts{};
  std::array<double, kChannels> notched{};
};

// Byte stream to volts: frame sync, unpack, window decode, code_to_volts, and
// a per-channel notch that always runs so toggling it takes effect on the
// next sample without a fresh transient.
class StreamDecoder {
 public:
  explicit StreamDecoder(const NotchSpec& notch = {}, double fs = kHostSampleRate);

  // Calls `sink` once per decoded frame, in stream order.
  void feed(std::span<const std::uint8_t> bytes, const std::function<void(const DecodedSample&)>& sink);

  const FrameSync& sync() const { return sync_; }

 private:
  FrameSync sync_;
  std::array<NotchFilter, kChannels> notch_;
};

struct SessionConfig {
  double duration_s = 6.0;
  bool notch_enabled = false;
  // Record the notched signal instead of the decoded one.
  bool record_post_notch = false;
  std::optional<std::filesystem::path> output;
  NotchSpec notch;
  // Bytes consumed without lock before the session is aborted: one nominal
  // second of stream at 11 bytes x 1000 frames/s.
  std::uint64_t sync_loss_budget_bytes = 11000;

  void validate() const;
  std::uint64_t target_samples() const;
};

enum class SessionPhase { idle, acquiring, stopped };

std::string to_string(SessionPhase p);

struct SessionState {
  SessionPhase phase = SessionPhase::idle;
  std::uint64_t samples = 0;
  std::string stop_reason;
};

struct SessionSummary {
  std::uint64_t frames_received = 0;
  std::uint64_t samples_recorded = 0;
  std::uint64_t sync_losses = 0;
  std::uint64_t bytes_read = 0;
  double duration_s = 0.0;
  bool partial = false;
  std::string stop_reason;
  std::string error;

  std::string to_text() const;
};

struct SessionResult {
  std::vector<ChannelBlock> recording;
  SessionSummary summary;
};

// Start/stop/duration state machine shared by the batch runner and the
// bridge service. Not thread-safe on its own.
class Session {
 public:
  // With store_recording false the caller keeps the recorded blocks.
  explicit Session(SessionConfig cfg = {}, bool store_recording = true);

  // idle|stopped -> acquiring. Returns false when already acquiring.
  bool start(std::optional<double> duration_s = std::nullopt);
  // acquiring -> stopped. Returns false when not acquiring.
  bool stop(const std::string& reason);
  // acquiring -> idle, discarding nothing already recorded.
  bool abort(const std::string& reason);
  void set_notch(bool on) { cfg_.notch_enabled = on; }
  bool notch_enabled() const { return cfg_.notch_enabled; }

  // Accepts one decoded sample. Returns the block recorded, if acquiring.
  // Reaching the target duration moves the session to stopped.
  std::optional<ChannelBlock> accept(const DecodedSample& s);
  // Value sent to live consumers: notched iff the notch is on.
  ChannelBlock live_view(const DecodedSample& s, std::uint64_t index) const;

  const SessionState& state() const { return state_; }
  const SessionConfig& config() const { return cfg_; }
  const std::vector<ChannelBlock>& recording() const { return recording_; }
  std::vector<ChannelBlock> take_recording() { return std::move(recording_); }

 private:
  SessionConfig cfg_;
  SessionState state_;
  bool store_ = true;
  std::uint64_t target_ = 0;
  std::vector<ChannelBlock> recording_;
};

// Reads the device stream, records cfg.duration_s of samples and writes the
// CSV when cfg.output is set. A stream that stays unlocked past the budget
// ends the session with summary.partial and summary.error set.
SessionResult run_session(const SessionConfig& cfg, ByteSource& source, const std::atomic<bool>* stop = nullptr,
                          const std::function<void(const ChannelBlock&)>& live = {});

// Header t_s,ch1_mV,...,ch8_mV; throws ConfigError on an empty recording and
// FileError on I/O failure.
void record_csv(std::span<const ChannelBlock> blocks, std::ostream& out);
void record_csv(std::span<const ChannelBlock> blocks, const std::filesystem::path& path);
std::vector<ChannelBlock> read_recording_csv(std::istream& in);
std::vector<ChannelBlock> read_recording_csv(const std::filesystem::path& path);

}  // namespace emgwire
