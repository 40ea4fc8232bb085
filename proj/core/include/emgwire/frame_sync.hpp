#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>

#include "emgwire/codec.hpp"

namespace emgwire {

// Recovers 11-byte frame boundaries from an unaligned byte stream.
//
// Data bytes may legitimately be 0xFF, so a single marker is not enough: each
// of the 11 phases keeps a run of consecutive marker hits and the first phase
// to reach `kLockThreshold` wins. Once locked, every 11th byte must be 0xFF;
// a miss drops that frame, unlocks and restarts scoring.
class FrameSync {
 public:
  static constexpr int kLockThreshold = 3;

  struct Stats {
    std::uint64_t bytes = 0;
    std::uint64_t frames = 0;
    std::uint64_t locks = 0;
    std::uint64_t sync_losses = 0;
    // Bytes consumed while unlocked since the last lock (or start).
    std::uint64_t bytes_since_lock = 0;
  };

  std::optional<Frame> push(std::uint8_t byte);

  bool locked() const { return locked_; }
  // Phase (0..10) of the marker slot relative to the first byte pushed since
  // the last reset.
  std::optional<std::size_t> locked_phase() const;
  // While locked: bytes still to push up to and including the next marker.
  std::size_t bytes_to_frame_end() const;
  const Stats& stats() const { return stats_; }
  std::size_t buffered() const { return history_len_; }

  void reset();

 private:
  Frame frame_from_history() const;
  void remember(std::uint8_t byte);

  std::array<int, kFrameBytes> scores_{};
  // Last 2 frame lengths of bytes, oldest first once full.
  std::array<std::uint8_t, 2 * kFrameBytes> history_{};
  std::size_t history_len_ = 0;
  std::size_t history_head_ = 0;
  std::uint64_t position_ = 0;
  bool locked_ = false;
  std::size_t phase_ = 0;
  Stats stats_;
};

}  // namespace emgwire
