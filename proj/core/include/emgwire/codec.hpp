#pragma once

// 24-bit to 10-bit windowed wire protocol.
//
// Each channel's 24-bit conversion is reduced to a sign bit plus a 9-bit
// magnitude (the "data window", bits 14..6 of the magnitude). A frame carries
// the eight low bytes (LSP), two bytes collecting the top two bits of every
// channel (MSP) and a 0xFF end-of-message byte:
//
//   byte:  0 .. 7        8                9                10
//          LSP ch1..ch8  [s1 m1|s2 m2|..] [s5 m5|..|s8 m8] 0xFF
//
// where "s m" is the channel's sign bit followed by magnitude bit 8.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace emgwire {

inline constexpr std::size_t kChannels = 8;
inline constexpr std::size_t kFrameBytes = 11;
inline constexpr std::uint8_t kFrameMarker = 0xFF;
inline constexpr std::int32_t kRawMin = -(1 << 23);
inline constexpr std::int32_t kRawMax = (1 << 23) - 1;
inline constexpr int kWindowShift = 6;
inline constexpr std::uint16_t kMaxMagnitude = 511;
// UART character: start bit + 8 data bits + stop bit.
inline constexpr int kBitsPerWireByte = 10;

// One channel's 24-bit two's-complement conversion result, in ADC counts.
struct Raw24Sample {
  std::int32_t value = 0;

  friend constexpr bool operator==(Raw24Sample, Raw24Sample) = default;
};

// Sign-magnitude protocol word. positive maps to wire sign bit 1. The encoder
// always emits +0; (negative, 0) is still accepted and decodes to 0.
struct WindowCode {
  bool positive = true;
  std::uint16_t magnitude = 0;

  friend constexpr bool operator==(WindowCode, WindowCode) = default;

  constexpr std::uint16_t word() const {
    return static_cast<std::uint16_t>((positive ? 1u : 0u) << 9 | (magnitude & 0x1FFu));
  }
};

using ChannelCodes = std::array<WindowCode, kChannels>;

struct Frame {
  std::array<std::uint8_t, kFrameBytes> bytes{};

  std::span<const std::uint8_t, kChannels> lsp() const {
    return std::span<const std::uint8_t, kChannels>(bytes.data(), kChannels);
  }
  std::uint8_t msp(std::size_t i) const { return bytes[kChannels + i]; }
  std::uint8_t marker() const { return bytes[kFrameBytes - 1]; }

  friend bool operator==(const Frame&, const Frame&) = default;
};

bool raw_in_range(std::int64_t value);

// Total: out-of-window magnitudes saturate at 511, truncation toward zero.
WindowCode encode_window(Raw24Sample raw);

// Signed window steps in [-511, 511].
int decode_window(WindowCode code);

Frame pack_frame(const ChannelCodes& codes);

// Throws BadMarker when byte 10 is not 0xFF.
ChannelCodes unpack_frame(const Frame& frame);
ChannelCodes unpack_frame(std::span<const std::uint8_t> bytes);

// Messages per second deliverable at `baud` for a message of `frame_bits`.
double throughput(double baud, double frame_bits);

// Wire cost of `bytes` UART characters.
constexpr int frame_bits_for_bytes(int bytes) { return bytes * kBitsPerWireByte; }

}  // namespace emgwire
