#include "emgwire/codec.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

#include "emgwire/errors.hpp"

namespace emgwire {

bool raw_in_range(std::int64_t value) { return value >= kRawMin && value <= kRawMax; }

WindowCode encode_window(Raw24Sample raw) {
  // Sign-magnitude first, then select the window; |kRawMin| >> 6 still
  // saturates so the int64 widening covers the asymmetric minimum.
  const std::int64_t v = raw.value;
  const std::uint64_t abs_value = static_cast<std::uint64_t>(v < 0 ? -v : v);
  const std::uint64_t steps = abs_value >> kWindowShift;
  WindowCode code;
  code.magnitude = static_cast<std::uint16_t>(steps > kMaxMagnitude ? kMaxMagnitude : steps);
  code.positive = v >= 0 || code.magnitude == 0;
  return code;
}

int decode_window(WindowCode code) {
  const int m = code.magnitude & kMaxMagnitude;
  return code.positive ? m : -m;
}

Frame pack_frame(const ChannelCodes& codes) {
  Frame f;
  for (std::size_t ch = 0; ch < kChannels; ++ch) {
    const std::uint16_t word = codes[ch].word();
    f.bytes[ch] = static_cast<std::uint8_t>(word & 0xFF);
    const auto top = static_cast<std::uint8_t>(word >> 8);  // [sign, m8]
    const std::size_t msp = ch / 4;
    const int shift = 6 - 2 * static_cast<int>(ch % 4);
    f.bytes[kChannels + msp] |= static_cast<std::uint8_t>(top << shift);
  }
  f.bytes[kFrameBytes - 1] = kFrameMarker;
  return f;
}

ChannelCodes unpack_frame(const Frame& frame) {
  if (frame.marker() != kFrameMarker) {
    throw BadMarker("frame end byte is " + std::to_string(frame.marker()) + ", expected 255");
  }
  ChannelCodes codes;
  for (std::size_t ch = 0; ch < kChannels; ++ch) {
    const int shift = 6 - 2 * static_cast<int>(ch % 4);
    const unsigned top = (frame.msp(ch / 4) >> shift) & 0x3u;
    codes[ch].positive = (top & 0x2u) != 0;
    codes[ch].magnitude = static_cast<std::uint16_t>((top & 0x1u) << 8 | frame.bytes[ch]);
  }
  return codes;
}

ChannelCodes unpack_frame(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kFrameBytes) {
    throw FormatError("frame must be 11 bytes, got " + std::to_string(bytes.size()));
  }
  Frame f;
  std::copy(bytes.begin(), bytes.end(), f.bytes.begin());
  return unpack_frame(f);
}

double throughput(double baud, double frame_bits) {
  if (!(baud > 0.0) || !(frame_bits > 0.0) || !std::isfinite(baud) || !std::isfinite(frame_bits)) {
    throw ConfigError("throughput requires positive baud and frame length");
  }
  return baud / frame_bits;
}

}  // namespace emgwire
