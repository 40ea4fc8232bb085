#include "emgwire/sources.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include "emgwire/errors.hpp"
#include "emgwire/signal_chain.hpp"

namespace emgwire {

namespace {

constexpr double kPi = std::numbers::pi;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, sep)) out.push_back(trim(field));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::optional<double> to_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

double unit_scale(const std::string& name) {
  const std::string n = lower(name);
  auto ends_with = [&](std::string_view suffix) {
    return n.size() >= suffix.size() && n.compare(n.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with("_mv") || ends_with("(mv)")) return 1e-3;
  if (ends_with("_uv") || ends_with("(uv)")) return 1e-6;
  return 1.0;
}

bool is_time_name(const std::string& name) {
  const std::string n = lower(name);
  return n == "t" || n == "t_s" || n == "time" || n == "time_s" || n == "time(s)";
}

// RBJ second-order Butterworth sections for the gesture noise shaper.
BiquadCoefficients butter_lowpass(double fc, double fs) {
  const double w0 = 2.0 * kPi * fc / fs;
  const double alpha = std::sin(w0) / std::numbers::sqrt2;
  const double c = std::cos(w0);
  const double a0 = 1.0 + alpha;
  BiquadCoefficients q;
  q.b0 = (1.0 - c) / 2.0 / a0;
  q.b1 = (1.0 - c) / a0;
  q.b2 = q.b0;
  q.a1 = -2.0 * c / a0;
  q.a2 = (1.0 - alpha) / a0;
  return q;
}

BiquadCoefficients butter_highpass(double fc, double fs) {
  const double w0 = 2.0 * kPi * fc / fs;
  const double alpha = std::sin(w0) / std::numbers::sqrt2;
  const double c = std::cos(w0);
  const double a0 = 1.0 + alpha;
  BiquadCoefficients q;
  q.b0 = (1.0 + c) / 2.0 / a0;
  q.b1 = -(1.0 + c) / a0;
  q.b2 = q.b0;
  q.a1 = -2.0 * c / a0;
  q.a2 = (1.0 - alpha) / a0;
  return q;
}

class SineSource final : public SignalSource {
 public:
  SineSource(const SineSpec& spec, double fs) : spec_(spec), fs_(fs) {}

  void next(std::span<double, kChannels> out) override {
    const double t = static_cast<double>(n_++) / fs_;
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
      const double cycles = std::fmod(spec_.freq_hz[ch] * t, 1.0);
      out[ch] = spec_.amplitude[ch] * std::sin(2.0 * kPi * cycles);
    }
  }
  double sample_rate() const override { return fs_; }

 private:
  SineSpec spec_;
  double fs_;
  std::uint64_t n_ = 0;
};

class ReplaySource final : public SignalSource {
 public:
  ReplaySource(std::shared_ptr<const ReplayData> data, double gain, double fs)
      : data_(std::move(data)), gain_(gain), fs_(fs) {}

  void next(std::span<double, kChannels> out) override {
    const auto& xs = data_->samples;
    const double pos = static_cast<double>(n_++) / fs_ * data_->sample_rate;
    const double last = static_cast<double>(xs.size() - 1);
    if (xs.empty() || pos >= static_cast<double>(xs.size())) {
      std::fill(out.begin(), out.end(), 0.0);
      return;
    }
    if (pos >= last) {
      for (std::size_t ch = 0; ch < kChannels; ++ch) out[ch] = gain_ * xs.back()[ch];
      return;
    }
    const auto i = static_cast<std::size_t>(pos);
    const double frac = pos - static_cast<double>(i);
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
      out[ch] = gain_ * ((1.0 - frac) * xs[i][ch] + frac * xs[i + 1][ch]);
    }
  }
  double sample_rate() const override { return fs_; }
  std::optional<double> duration_s() const override { return data_->duration_s(); }

 private:
  std::shared_ptr<const ReplayData> data_;
  double gain_;
  double fs_;
  std::uint64_t n_ = 0;
};

// Unit-RMS band-limited Gaussian noise per channel, scaled by a smoothed
// envelope that follows the script.
class GestureSource final : public SignalSource {
 public:
  GestureSource(GestureScript script, double fs, std::uint64_t seed)
      : script_(std::move(script)), fs_(fs), rng_(seed) {
    script_.validate();
    if (!(script_.band_hi_hz < fs / 2.0)) throw ConfigError("gesture band exceeds Nyquist");
    const std::array<BiquadCoefficients, 3> stages = {butter_highpass(script_.band_lo_hz, fs),
                                                      butter_lowpass(script_.band_hi_hz, fs),
                                                      butter_lowpass(script_.band_hi_hz, fs)};
    for (auto& chain : shapers_) {
      for (std::size_t s = 0; s < stages.size(); ++s) chain[s] = Biquad(stages[s]);
    }
    noise_gain_ = 1.0 / std::sqrt(impulse_energy(stages));
    for (const auto& seg : script_.segments) {
      boundaries_.push_back((boundaries_.empty() ? 0.0 : boundaries_.back()) + seg.duration_s);
    }
    // Let the shapers reach steady state before the first output sample.
    std::array<double, kChannels> scratch{};
    for (int i = 0; i < static_cast<int>(fs); ++i) shaped(scratch);
  }

  void next(std::span<double, kChannels> out) override {
    std::array<double, kChannels> noise{};
    shaped(noise);
    const double t = static_cast<double>(n_++) / fs_;
    for (std::size_t ch = 0; ch < kChannels; ++ch) out[ch] = envelope(ch, t) * noise[ch];
  }
  double sample_rate() const override { return fs_; }
  std::optional<double> duration_s() const override { return script_.duration_s(); }

 private:
  static constexpr double kRamp = 0.05;  // envelope crossfade, seconds
  static constexpr double kCrest = 3.0;  // burst peak / RMS

  double impulse_energy(const std::array<BiquadCoefficients, 3>& stages) const {
    std::array<Biquad, 3> chain;
    for (std::size_t s = 0; s < stages.size(); ++s) chain[s] = Biquad(stages[s]);
    double energy = 0.0;
    const int n = static_cast<int>(4.0 * fs_);
    for (int i = 0; i < n; ++i) {
      double y = i == 0 ? 1.0 : 0.0;
      for (auto& b : chain) y = b.process(y);
      energy += y * y;
    }
    return energy;
  }

  void shaped(std::array<double, kChannels>& out) {
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
      double y = normal_(rng_);
      for (auto& b : shapers_[ch]) y = b.process(y);
      out[ch] = y * noise_gain_;
    }
  }

  double segment_level(std::size_t ch, std::size_t seg) const {
    const auto& s = script_.segments[seg];
    return s.active.test(ch) ? s.amplitude_v / kCrest : script_.rest_rms_v;
  }

  double envelope(std::size_t ch, double t) const {
    const auto it = std::upper_bound(boundaries_.begin(), boundaries_.end(), t);
    if (it == boundaries_.end()) return script_.rest_rms_v;
    const auto seg = static_cast<std::size_t>(it - boundaries_.begin());
    double level = segment_level(ch, seg);
    // Raised-cosine crossfade centred on each boundary.
    const double start = seg == 0 ? 0.0 : boundaries_[seg - 1];
    const double end = boundaries_[seg];
    if (seg > 0 && t - start < kRamp / 2.0) {
      const double prev = segment_level(ch, seg - 1);
      const double x = (t - start + kRamp / 2.0) / kRamp;
      level = prev + (level - prev) * 0.5 * (1.0 - std::cos(kPi * x));
    } else if (seg + 1 < script_.segments.size() && end - t < kRamp / 2.0) {
      const double next_level = segment_level(ch, seg + 1);
      const double x = (t - (end - kRamp / 2.0)) / kRamp;
      level = level + (next_level - level) * 0.5 * (1.0 - std::cos(kPi * x));
    }
    return level;
  }

  GestureScript script_;
  double fs_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::array<std::array<Biquad, 3>, kChannels> shapers_;
  double noise_gain_ = 1.0;
  std::vector<double> boundaries_;
  std::uint64_t n_ = 0;
};

}  // namespace

SineSpec SineSpec::uniform(double freq_hz, double amplitude_v) {
  SineSpec s;
  s.freq_hz.fill(freq_hz);
  s.amplitude.fill(amplitude_v);
  return s;
}

GestureScript GestureScript::standard() {
  GestureScript g;
  std::bitset<kChannels> triceps(0x0F);
  std::bitset<kChannels> biceps(0xF0);
  g.segments = {
      {1.0, {}, 0.0},
      {1.5, triceps, 5e-3},
      {1.0, {}, 0.0},
      {1.5, biceps, 2e-3},
      {1.0, {}, 0.0},
  };
  return g;
}

double GestureScript::duration_s() const {
  double total = 0.0;
  for (const auto& s : segments) total += s.duration_s;
  return total;
}

void GestureScript::validate() const {
  for (const auto& s : segments) {
    if (!(s.duration_s >= 0.0) || !(s.amplitude_v >= 0.0)) {
      throw ConfigError("gesture segments need non-negative duration and amplitude");
    }
  }
  if (!(duration_s() > 0.0)) throw ConfigError("gesture script total duration must be > 0");
  if (!(rest_rms_v >= 0.0) || !(band_lo_hz > 0.0) || !(band_hi_hz > band_lo_hz)) {
    throw ConfigError("gesture noise band must satisfy 0 < lo < hi");
  }
}

ReplayData parse_replay_csv(std::istream& in, double default_rate) {
  if (!(default_rate > 0.0)) throw ConfigError("replay sample rate must be positive");
  std::vector<std::vector<double>> rows;
  std::vector<std::string> header;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto fields = split(t, ',');
    std::vector<double> values;
    bool numeric = true;
    for (const auto& f : fields) {
      if (auto v = to_double(f)) {
        values.push_back(*v);
      } else {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (rows.empty() && header.empty()) {
        header = std::move(fields);
        continue;
      }
      throw FormatError("replay CSV line " + std::to_string(line_no) + ": non-numeric field");
    }
    if (!rows.empty() && values.size() != rows.front().size()) {
      throw FormatError("replay CSV line " + std::to_string(line_no) + ": expected " +
                        std::to_string(rows.front().size()) + " columns");
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw FormatError("replay CSV has no samples");
  const std::size_t cols = rows.front().size();
  if (!header.empty() && header.size() != cols) {
    throw FormatError("replay CSV header has " + std::to_string(header.size()) + " columns, data " +
                      std::to_string(cols));
  }

  const bool has_time = header.empty() ? cols == kChannels + 1 : is_time_name(header.front());
  const std::size_t first = has_time ? 1 : 0;
  const std::size_t channels = cols - first;
  if (channels < 1 || channels > kChannels) {
    throw FormatError("replay CSV must carry 1 to 8 channel columns, found " + std::to_string(channels));
  }

  ReplayData data;
  data.source_channels = channels;
  data.sample_rate = default_rate;
  if (has_time && rows.size() >= 2) {
    const double span = rows.back()[0] - rows.front()[0];
    if (!(span > 0.0)) throw FormatError("replay CSV time column must increase");
    data.sample_rate = static_cast<double>(rows.size() - 1) / span;
  }
  std::vector<double> scale(channels, 1.0);
  if (!header.empty()) {
    for (std::size_t c = 0; c < channels; ++c) scale[c] = unit_scale(header[first + c]);
  }
  data.samples.reserve(rows.size());
  for (const auto& r : rows) {
    ChannelVolts v{};
    if (channels == 1) {
      v.fill(r[first] * scale[0]);
    } else {
      for (std::size_t c = 0; c < channels; ++c) v[c] = r[first + c] * scale[c];
    }
    data.samples.push_back(v);
  }
  return data;
}

ReplayData load_replay_csv(const std::filesystem::path& path, double default_rate) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open replay file " + path.string());
  return parse_replay_csv(in, default_rate);
}

std::unique_ptr<SignalSource> make_source(const SourceSpec& spec, double fs, std::uint64_t seed) {
  if (!(fs > 0.0)) throw ConfigError("source sample rate must be positive");
  return std::visit(
      [&](const auto& s) -> std::unique_ptr<SignalSource> {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, SineSpec>) {
          return std::make_unique<SineSource>(s, fs);
        } else if constexpr (std::is_same_v<T, ReplaySpec>) {
          auto data = s.data ? s.data
                             : std::make_shared<const ReplayData>(load_replay_csv(s.path, s.default_rate));
          return std::make_unique<ReplaySource>(std::move(data), s.gain, fs);
        } else {
          return std::make_unique<GestureSource>(s, fs, seed);
        }
      },
      spec);
}

SourceSpec parse_source_spec(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = lower(trim(text.substr(0, colon)));
  const std::string args = colon == std::string::npos ? std::string() : text.substr(colon + 1);
  if (kind == "zero") return SineSpec::uniform(1.0, 0.0);
  if (kind == "gesture") return GestureScript::standard();
  if (kind == "sine") {
    std::vector<double> v;
    for (const auto& f : split(args, ',')) {
      auto d = to_double(f);
      if (!d) throw ConfigError("bad number '" + f + "' in source '" + text + "'");
      v.push_back(*d);
    }
    if (v.size() == 2) return SineSpec::uniform(v[0], v[1]);
    if (v.size() == kChannels + 1) {
      SineSpec s;
      s.freq_hz.fill(v[0]);
      std::copy(v.begin() + 1, v.end(), s.amplitude.begin());
      return s;
    }
    throw ConfigError("sine source is sine:FREQ,AMP or sine:FREQ,A1,...,A8");
  }
  if (kind == "replay") {
    ReplaySpec r;
    const auto comma = args.rfind(',');
    if (comma != std::string::npos) {
      if (auto g = to_double(trim(args.substr(comma + 1)))) {
        r.gain = *g;
        r.path = trim(args.substr(0, comma));
        return r;
      }
    }
    r.path = trim(args);
    if (r.path.empty()) throw ConfigError("replay source needs a file path");
    return r;
  }
  throw ConfigError("unknown source '" + text + "' (expected sine, zero, gesture or replay)");
}

}  // namespace emgwire
