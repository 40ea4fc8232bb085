#pragma once

// Long-running host with a control/stream bridge for the operator panel.
//
// Three tasks connected by bounded queues:
//   reader   - reads the device stream, syncs, decodes, runs the session
//              state machine; never blocks on the bridge
//   recorder - sole owner of the recording and sole file writer
//   bridge   - HTTP endpoint: POST /command (JSON in, JSON reply out) and
//              GET /events (server-sent events, one JSON object per event)
//
// Message schema is documented in docs/bridge_protocol.md.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "emgwire/bounded_queue.hpp"
#include "emgwire/host.hpp"
#include "emgwire/transport.hpp"

namespace emgwire {

struct HostServiceConfig {
  SessionConfig session;
  std::size_t batch_size = 50;
  // Per-subscriber event backlog; older consumers that fall behind lose
  // events rather than stalling the reader.
  std::size_t subscriber_capacity = 256;
  std::size_t recorder_capacity = 8192;
  // Where `save` writes when the command carries no path.
  std::filesystem::path default_save_path = "recording.csv";
  // Write the recording automatically when a session ends.
  bool autosave = false;
};

struct CommandReply {
  int status = 200;  // HTTP status used by the bridge
  std::string body;  // one JSON object
};

// Stream of JSON event strings for one consumer.
class Subscription {
 public:
  explicit Subscription(std::size_t capacity) : queue_(capacity) {}
  std::optional<std::string> next(std::chrono::milliseconds timeout) { return queue_.pop_for(timeout); }
  std::size_t dropped() const { return queue_.dropped(); }
  bool closed() const { return queue_.closed(); }

 private:
  friend class HostService;
  BoundedQueue<std::string> queue_;
};

class HostService {
 public:
  HostService(HostServiceConfig cfg, std::unique_ptr<ByteSource> source);
  ~HostService();
  HostService(const HostService&) = delete;
  HostService& operator=(const HostService&) = delete;

  void start();
  void shutdown();

  // Parses and executes one command object; malformed input yields a 400
  // error reply and leaves the session untouched.
  CommandReply handle_command(std::string_view text);

  std::shared_ptr<Subscription> subscribe();
  void unsubscribe(const std::shared_ptr<Subscription>& sub);

  SessionState state() const;
  bool stream_ended() const { return stream_ended_.load(); }
  // Number of samples the recorder holds for the current or last session.
  std::size_t recorded_samples() const;
  // Copy of the recorder's current recording.
  std::vector<ChannelBlock> recording() const;

 private:
  struct RecorderItem;

  void reader_loop();
  void recorder_loop();
  void publish(const std::string& event);
  std::string state_event_locked() const;
  void flush_batch_locked();
  void end_session_locked(const std::string& reason, bool partial);

  HostServiceConfig cfg_;
  std::unique_ptr<ByteSource> source_;
  StreamDecoder decoder_;

  mutable std::mutex mu_;  // session, batch, counters
  Session session_;
  std::vector<ChannelBlock> batch_;
  std::uint64_t frames_received_ = 0;
  std::uint64_t sync_losses_ = 0;
  bool locked_ = false;
  bool partial_ = false;
  std::string last_error_;

  std::unique_ptr<BoundedQueue<RecorderItem>> recorder_queue_;
  mutable std::mutex rec_mu_;
  std::vector<ChannelBlock> recording_;

  std::mutex sub_mu_;
  std::vector<std::shared_ptr<Subscription>> subs_;

  std::atomic<bool> running_{false};
  std::atomic<bool> stream_ended_{false};
  std::thread reader_;
  std::thread recorder_;
};

// HTTP front for a HostService. Optionally serves a static directory (the
// operator panel) at "/".
class ControlBridge {
 public:
  ControlBridge(HostService& service, std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~ControlBridge();
  ControlBridge(const ControlBridge&) = delete;
  ControlBridge& operator=(const ControlBridge&) = delete;

  // Binds (port 0 picks a free one) and serves on a background thread.
  std::uint16_t listen(const std::string& host, std::uint16_t port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace emgwire
