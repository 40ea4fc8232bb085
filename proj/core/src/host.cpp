#include "emgwire/host.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "emgwire/errors.hpp"

namespace emgwire {

StreamDecoder::StreamDecoder(const NotchSpec& notch, double fs) {
  for (auto& n : notch_) n = NotchFilter(notch, fs);
}

void StreamDecoder::feed(std::span<const std::uint8_t> bytes,
                         const std::function<void(const DecodedSample&)>& sink) {
  for (const std::uint8_t b : bytes) {
    const auto frame = sync_.push(b);
    if (!frame) continue;
    DecodedSample s;
    s.codes = unpack_frame(*frame);
    for (std::size_t ch = 0; ch < kChannels; ++ch) {
      s.volts[ch] = code_to_volts(decode_window(s.codes[ch]));
      s.notched[ch] = notch_[ch].process(s.volts[ch]);
    }
    sink(s);
  }
}

void SessionConfig::validate() const {
  if (!(duration_s > 0.0) || !std::isfinite(duration_s)) throw ConfigError("session duration must be > 0");
  notch.validate(kHostSampleRate);
}

std::uint64_t SessionConfig::target_samples() const {
  return static_cast<std::uint64_t>(std::llround(duration_s * kHostSampleRate));
}

std::string to_string(SessionPhase p) {
  switch (p) {
    case SessionPhase::idle:
      return "idle";
    case SessionPhase::acquiring:
      return "acquiring";
    case SessionPhase::stopped:
      return "stopped";
  }
  return "unknown";
}

std::string SessionSummary::to_text() const {
  std::ostringstream out;
  out << "frames_received: " << frames_received << '\n'
      << "samples_recorded: " << samples_recorded << '\n'
      << "sync_losses: " << sync_losses << '\n'
      << "bytes_read: " << bytes_read << '\n'
      << "duration_s: " << duration_s << '\n'
      << "partial: " << (partial ? "true" : "false") << '\n'
      << "stop_reason: " << (stop_reason.empty() ? "-" : stop_reason) << '\n';
  if (!error.empty()) out << "error: " << error << '\n';
  return out.str();
}

Session::Session(SessionConfig cfg, bool store_recording) : cfg_(std::move(cfg)), store_(store_recording) {
  cfg_.validate();
}

bool Session::start(std::optional<double> duration_s) {
  if (state_.phase == SessionPhase::acquiring) return false;
  if (duration_s) {
    if (!(*duration_s > 0.0) || !std::isfinite(*duration_s)) throw ConfigError("session duration must be > 0");
    cfg_.duration_s = *duration_s;
  }
  target_ = cfg_.target_samples();
  recording_.clear();
  if (store_) recording_.reserve(target_);
  state_ = SessionState{SessionPhase::acquiring, 0, {}};
  return true;
}

bool Session::stop(const std::string& reason) {
  if (state_.phase != SessionPhase::acquiring) return false;
  state_.phase = SessionPhase::stopped;
  state_.stop_reason = reason;
  return true;
}

bool Session::abort(const std::string& reason) {
  if (state_.phase != SessionPhase::acquiring) return false;
  state_.phase = SessionPhase::idle;
  state_.stop_reason = reason;
  return true;
}

ChannelBlock Session::live_view(const DecodedSample& s, std::uint64_t index) const {
  ChannelBlock b;
  b.index = index;
  b.t = static_cast<double>(index) / kHostSampleRate;
  b.ch = cfg_.notch_enabled ? s.notched : s.volts;
  return b;
}

std::optional<ChannelBlock> Session::accept(const DecodedSample& s) {
  if (state_.phase != SessionPhase::acquiring) return std::nullopt;
  ChannelBlock b;
  b.index = state_.samples;
  b.t = static_cast<double>(b.index) / kHostSampleRate;
  b.ch = cfg_.record_post_notch && cfg_.notch_enabled ? s.notched : s.volts;
  if (store_) recording_.push_back(b);
  if (++state_.samples >= target_) stop("duration reached");
  return b;
}

SessionResult run_session(const SessionConfig& cfg, ByteSource& source, const std::atomic<bool>* stop,
                          const std::function<void(const ChannelBlock&)>& live) {
  Session session(cfg);
  StreamDecoder decoder(cfg.notch);
  SessionResult result;
  auto& summary = result.summary;

  auto stopped = [&] { return stop && stop->load(std::memory_order_relaxed); };
  if (stopped()) {
    summary.stop_reason = "stop command";
    return result;
  }
  session.start();

  std::vector<std::uint8_t> buf(4096);
  std::uint64_t live_index = 0;
  auto on_sample = [&](const DecodedSample& s) {
    if (session.state().phase != SessionPhase::acquiring) return;
    ++summary.frames_received;
    if (session.accept(s) && live) live(session.live_view(s, live_index++));
  };

  try {
    while (session.state().phase == SessionPhase::acquiring) {
      if (stopped()) {
        session.stop("stop command");
        break;
      }
      // Never read past the bytes the remaining samples need, so a session
      // can be followed by another on the same stream.
      const std::uint64_t remaining = session.config().target_samples() - session.state().samples;
      const std::size_t want =
          decoder.sync().locked()
              ? std::min<std::size_t>(buf.size(), decoder.sync().bytes_to_frame_end() + (remaining - 1) * kFrameBytes)
              : 1;
      const std::size_t n = source.read(std::span(buf.data(), want));
      if (n == 0) {
        session.stop("end of stream");
        break;
      }
      summary.bytes_read += n;
      decoder.feed(std::span(buf.data(), n), on_sample);
      if (!decoder.sync().locked() && decoder.sync().stats().bytes_since_lock > cfg.sync_loss_budget_bytes) {
        summary.partial = true;
        summary.error = "sync lost: no frame lock within " + std::to_string(cfg.sync_loss_budget_bytes) + " bytes";
        session.stop("sync lost");
        break;
      }
    }
  } catch (const TransportError& e) {
    summary.partial = true;
    summary.error = e.what();
    session.stop("transport error");
  }

  summary.sync_losses = decoder.sync().stats().sync_losses;
  summary.stop_reason = session.state().stop_reason;
  result.recording = session.take_recording();
  summary.samples_recorded = result.recording.size();
  summary.duration_s = static_cast<double>(result.recording.size()) / kHostSampleRate;
  if (cfg.output && !result.recording.empty()) record_csv(result.recording, *cfg.output);
  return result;
}

void record_csv(std::span<const ChannelBlock> blocks, std::ostream& out) {
  if (blocks.empty()) throw ConfigError("refusing to write an empty recording");
  out << "t_s";
  for (std::size_t ch = 1; ch <= kChannels; ++ch) out << ",ch" << ch << "_mV";
  out << '\n';
  char cell[48];
  for (const auto& b : blocks) {
    std::snprintf(cell, sizeof cell, "%.6f", b.t);
    out << cell;
    for (const double v : b.ch) {
      // + 0.0 folds -0 into +0.
      std::snprintf(cell, sizeof cell, ",%.7f", v * 1e3 + 0.0);
      out << cell;
    }
    out << '\n';
  }
  if (!out) throw FileError("failed writing recording");
}

void record_csv(std::span<const ChannelBlock> blocks, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw FileError("cannot open " + path.string() + " for writing");
  record_csv(blocks, out);
  out.close();
  if (!out) throw FileError("failed writing " + path.string());
}

std::vector<ChannelBlock> read_recording_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("t_s", 0) != 0) {
    throw FormatError("recording CSV must start with a t_s,ch1_mV,... header");
  }
  std::vector<ChannelBlock> blocks;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    std::string cell;
    ChannelBlock b;
    b.index = blocks.size();
    std::size_t col = 0;
    while (std::getline(row, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str()) throw FormatError("recording CSV line " + std::to_string(line_no) + ": bad number");
      if (col == 0) {
        b.t = v;
      } else if (col <= kChannels) {
        b.ch[col - 1] = v * 1e-3;
      }
      ++col;
    }
    if (col != kChannels + 1) {
      throw FormatError("recording CSV line " + std::to_string(line_no) + ": expected 9 columns");
    }
    blocks.push_back(b);
  }
  return blocks;
}

std::vector<ChannelBlock> read_recording_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileError("cannot open recording " + path.string());
  return read_recording_csv(in);
}

}  // namespace emgwire
