#include "emgwire/frame_sync.hpp"

#include <algorithm>

namespace emgwire {

void FrameSync::remember(std::uint8_t byte) {
  if (history_len_ < history_.size()) {
    history_[(history_head_ + history_len_) % history_.size()] = byte;
    ++history_len_;
  } else {
    history_[history_head_] = byte;
    history_head_ = (history_head_ + 1) % history_.size();
  }
}

Frame FrameSync::frame_from_history() const {
  Frame f;
  const std::size_t start = history_head_ + history_len_ - kFrameBytes;
  for (std::size_t i = 0; i < kFrameBytes; ++i) {
    f.bytes[i] = history_[(start + i) % history_.size()];
  }
  return f;
}

std::optional<Frame> FrameSync::push(std::uint8_t byte) {
  remember(byte);
  const std::size_t phase = position_ % kFrameBytes;
  ++position_;
  ++stats_.bytes;

  if (locked_) {
    if (phase != phase_) return std::nullopt;
    if (byte == kFrameMarker) {
      ++stats_.frames;
      return frame_from_history();
    }
    locked_ = false;
    ++stats_.sync_losses;
    scores_.fill(0);
    stats_.bytes_since_lock = 0;
    return std::nullopt;
  }

  ++stats_.bytes_since_lock;
  if (byte != kFrameMarker) {
    scores_[phase] = 0;
    return std::nullopt;
  }
  if (++scores_[phase] < kLockThreshold || history_len_ < kFrameBytes) return std::nullopt;

  locked_ = true;
  phase_ = phase;
  scores_.fill(0);
  stats_.bytes_since_lock = 0;
  ++stats_.locks;
  ++stats_.frames;
  return frame_from_history();
}

std::optional<std::size_t> FrameSync::locked_phase() const {
  if (!locked_) return std::nullopt;
  return phase_;
}

std::size_t FrameSync::bytes_to_frame_end() const {
  if (!locked_) return 0;
  return (phase_ + kFrameBytes - position_ % kFrameBytes) % kFrameBytes + 1;
}

void FrameSync::reset() { *this = FrameSync{}; }

}  // namespace emgwire
