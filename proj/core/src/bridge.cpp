#include "emgwire/bridge.hpp"

#include <cmath>
#include <future>
#include <variant>

#include <httplib.h>
#include <json.hpp>

#include "emgwire/errors.hpp"

namespace emgwire {

using nlohmann::json;

namespace {

struct BeginSession {};
struct EndSession {
  bool autosave = false;
};
struct SaveRequest {
  std::filesystem::path path;
  std::shared_ptr<std::promise<std::string>> done;  // absolute path, or throws
};

json mv_row(const ChannelBlock& b) {
  json row = json::array();
  for (const double v : b.ch) row.push_back(v * 1e3);
  return row;
}

CommandReply reply(int status, const json& body) { return CommandReply{status, body.dump()}; }

CommandReply error_reply(int status, const std::string& cmd, const std::string& message) {
  json body = {{"type", "error"}, {"error", message}};
  if (!cmd.empty()) body["cmd"] = cmd;
  return reply(status, body);
}

}  // namespace

struct HostService::RecorderItem {
  std::variant<ChannelBlock, BeginSession, EndSession, SaveRequest> value;
};

HostService::HostService(HostServiceConfig cfg, std::unique_ptr<ByteSource> source)
    : cfg_(std::move(cfg)),
      source_(std::move(source)),
      decoder_(cfg_.session.notch),
      session_(cfg_.session, false),
      recorder_queue_(std::make_unique<BoundedQueue<RecorderItem>>(cfg_.recorder_capacity)) {
  if (!source_) throw ConfigError("host service needs a byte source");
  if (cfg_.batch_size == 0) throw ConfigError("batch size must be >= 1");
}

HostService::~HostService() { shutdown(); }

void HostService::start() {
  if (running_.exchange(true)) return;
  recorder_ = std::thread([this] { recorder_loop(); });
  reader_ = std::thread([this] { reader_loop(); });
}

void HostService::shutdown() {
  if (!running_.exchange(false)) return;
  source_->interrupt();
  if (reader_.joinable()) reader_.join();
  recorder_queue_->close();
  if (recorder_.joinable()) recorder_.join();
  std::lock_guard lock(sub_mu_);
  for (auto& s : subs_) s->queue_.close();
  subs_.clear();
}

std::shared_ptr<Subscription> HostService::subscribe() {
  auto sub = std::make_shared<Subscription>(cfg_.subscriber_capacity);
  {
    std::lock_guard lock(mu_);
    sub->queue_.try_push(state_event_locked());
  }
  std::lock_guard lock(sub_mu_);
  subs_.push_back(sub);
  return sub;
}

void HostService::unsubscribe(const std::shared_ptr<Subscription>& sub) {
  std::lock_guard lock(sub_mu_);
  std::erase(subs_, sub);
  sub->queue_.close();
}

void HostService::publish(const std::string& event) {
  std::lock_guard lock(sub_mu_);
  for (auto& s : subs_) s->queue_.try_push(event);
}

SessionState HostService::state() const {
  std::lock_guard lock(mu_);
  return session_.state();
}

std::size_t HostService::recorded_samples() const {
  std::lock_guard lock(rec_mu_);
  return recording_.size();
}

std::vector<ChannelBlock> HostService::recording() const {
  std::lock_guard lock(rec_mu_);
  return recording_;
}

std::string HostService::state_event_locked() const {
  const auto& st = session_.state();
  json ev = {{"type", "state"},
             {"state", to_string(st.phase)},
             {"samples", st.samples},
             {"duration_s", session_.config().duration_s},
             {"notch", session_.notch_enabled()},
             {"partial", partial_}};
  if (!st.stop_reason.empty()) ev["reason"] = st.stop_reason;
  return ev.dump();
}

void HostService::flush_batch_locked() {
  if (batch_.empty()) return;
  json rows = json::array();
  for (const auto& b : batch_) rows.push_back(mv_row(b));
  const json ev = {{"type", "samples"},
                   {"index", batch_.front().index},
                   {"t", batch_.front().t},
                   {"mv", std::move(rows)}};
  batch_.clear();
  publish(ev.dump());
}

void HostService::end_session_locked(const std::string& reason, bool partial) {
  if (!session_.stop(reason)) return;
  partial_ = partial;
  flush_batch_locked();
  publish(state_event_locked());
  recorder_queue_->push(RecorderItem{EndSession{cfg_.autosave}});
}

void HostService::reader_loop() {
  std::vector<std::uint8_t> buf(4096);
  auto on_sample = [&](const DecodedSample& s) {
    std::lock_guard lock(mu_);
    if (session_.state().phase != SessionPhase::acquiring) return;
    ++frames_received_;
    const auto block = session_.accept(s);
    if (!block) return;
    recorder_queue_->push(RecorderItem{*block});
    batch_.push_back(session_.live_view(s, block->index));
    if (batch_.size() >= cfg_.batch_size) flush_batch_locked();
    if (session_.state().phase == SessionPhase::stopped) {
      flush_batch_locked();
      publish(state_event_locked());
      recorder_queue_->push(RecorderItem{EndSession{cfg_.autosave}});
    }
  };

  try {
    while (running_.load()) {
      const std::size_t n = source_->read(buf);
      if (n == 0) {
        std::lock_guard lock(mu_);
        stream_ended_ = true;
        end_session_locked("end of stream", true);
        break;
      }
      decoder_.feed(std::span(buf.data(), n), on_sample);
      std::lock_guard lock(mu_);
      const auto& sync = decoder_.sync();
      locked_ = sync.locked();
      sync_losses_ = sync.stats().sync_losses;
      if (session_.state().phase == SessionPhase::acquiring && !sync.locked() &&
          sync.stats().bytes_since_lock > cfg_.session.sync_loss_budget_bytes) {
        last_error_ = "sync lost";
        end_session_locked("sync lost", true);
      }
    }
  } catch (const TransportError& e) {
    std::lock_guard lock(mu_);
    stream_ended_ = true;
    last_error_ = e.what();
    publish(json{{"type", "error"}, {"error", last_error_}}.dump());
    end_session_locked("transport error", true);
  }
}

void HostService::recorder_loop() {
  while (auto item = recorder_queue_->pop()) {
    std::visit(
        [&](auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, ChannelBlock>) {
            std::lock_guard lock(rec_mu_);
            recording_.push_back(v);
          } else if constexpr (std::is_same_v<T, BeginSession>) {
            std::lock_guard lock(rec_mu_);
            recording_.clear();
          } else if constexpr (std::is_same_v<T, EndSession>) {
            if (!v.autosave) return;
            try {
              std::lock_guard lock(rec_mu_);
              if (recording_.empty()) return;
              record_csv(recording_, cfg_.default_save_path);
              publish(json{{"type", "saved"},
                           {"path", std::filesystem::absolute(cfg_.default_save_path).string()},
                           {"samples", recording_.size()}}
                          .dump());
            } catch (const Error& e) {
              publish(json{{"type", "error"}, {"error", e.what()}}.dump());
            }
          } else {
            try {
              std::lock_guard lock(rec_mu_);
              if (recording_.empty()) throw ConfigError("nothing recorded");
              record_csv(recording_, v.path);
              v.done->set_value(std::filesystem::absolute(v.path).string());
            } catch (...) {
              v.done->set_exception(std::current_exception());
            }
          }
        },
        item->value);
  }
}

CommandReply HostService::handle_command(std::string_view text) {
  json cmd_obj;
  try {
    cmd_obj = json::parse(text);
  } catch (const json::parse_error& e) {
    return error_reply(400, "", std::string("malformed command: ") + e.what());
  }
  if (!cmd_obj.is_object() || !cmd_obj.contains("cmd") || !cmd_obj["cmd"].is_string()) {
    return error_reply(400, "", "malformed command: expected an object with a string \"cmd\"");
  }
  const std::string cmd = cmd_obj["cmd"].get<std::string>();

  if (cmd == "start") {
    std::optional<double> duration;
    if (cmd_obj.contains("duration_s")) {
      const auto& d = cmd_obj["duration_s"];
      if (!d.is_number() || !(d.get<double>() > 0.0) || !std::isfinite(d.get<double>())) {
        return error_reply(400, cmd, "duration_s must be a positive number");
      }
      duration = d.get<double>();
    }
    std::lock_guard lock(mu_);
    if (session_.state().phase == SessionPhase::acquiring) return error_reply(409, cmd, "busy");
    if (stream_ended_) return error_reply(409, cmd, "device stream ended");
    session_.start(duration);
    frames_received_ = 0;
    partial_ = false;
    batch_.clear();
    recorder_queue_->push(RecorderItem{BeginSession{}});
    publish(state_event_locked());
    return reply(200, {{"type", "ack"},
                       {"cmd", cmd},
                       {"state", to_string(session_.state().phase)},
                       {"duration_s", session_.config().duration_s}});
  }

  if (cmd == "stop") {
    std::lock_guard lock(mu_);
    if (session_.state().phase != SessionPhase::acquiring) return error_reply(409, cmd, "not acquiring");
    end_session_locked("stop command", false);
    return reply(200, {{"type", "ack"},
                       {"cmd", cmd},
                       {"state", to_string(session_.state().phase)},
                       {"samples", session_.state().samples}});
  }

  if (cmd == "set_notch") {
    if (!cmd_obj.contains("on") || !cmd_obj["on"].is_boolean()) {
      return error_reply(400, cmd, "set_notch needs a boolean \"on\"");
    }
    const bool on = cmd_obj["on"].get<bool>();
    std::lock_guard lock(mu_);
    session_.set_notch(on);
    publish(json{{"type", "notch"}, {"on", on}}.dump());
    return reply(200, {{"type", "ack"}, {"cmd", cmd}, {"on", on}, {"state", to_string(session_.state().phase)}});
  }

  if (cmd == "status") {
    std::lock_guard lock(mu_);
    const auto& st = session_.state();
    json body = {{"type", "status"},
                 {"state", to_string(st.phase)},
                 {"samples", st.samples},
                 {"duration_s", session_.config().duration_s},
                 {"notch", session_.notch_enabled()},
                 {"frames_received", frames_received_},
                 {"sync_losses", sync_losses_},
                 {"locked", locked_},
                 {"stream_ended", stream_ended_.load()},
                 {"partial", partial_}};
    if (!st.stop_reason.empty()) body["reason"] = st.stop_reason;
    if (!last_error_.empty()) body["error"] = last_error_;
    return reply(200, body);
  }

  if (cmd == "save") {
    std::filesystem::path path = cfg_.default_save_path;
    if (cmd_obj.contains("path")) {
      if (!cmd_obj["path"].is_string() || cmd_obj["path"].get<std::string>().empty()) {
        return error_reply(400, cmd, "path must be a non-empty string");
      }
      path = cmd_obj["path"].get<std::string>();
    }
    auto done = std::make_shared<std::promise<std::string>>();
    auto result = done->get_future();
    {
      std::lock_guard lock(mu_);
      if (session_.state().phase == SessionPhase::acquiring) return error_reply(409, cmd, "busy");
      recorder_queue_->push(RecorderItem{SaveRequest{path, done}});
    }
    try {
      const std::string saved = result.get();
      return reply(200, {{"type", "ack"}, {"cmd", cmd}, {"path", saved}, {"samples", recorded_samples()}});
    } catch (const ConfigError& e) {
      return error_reply(409, cmd, e.what());
    } catch (const std::exception& e) {
      return error_reply(500, cmd, e.what());
    }
  }

  return error_reply(400, cmd, "unknown command '" + cmd + "'");
}

struct ControlBridge::Impl {
  HostService& service;
  httplib::Server server;
  std::thread thread;
  std::atomic<bool> running{false};

  explicit Impl(HostService& s) : service(s) {}
};

ControlBridge::ControlBridge(HostService& service, std::optional<std::filesystem::path> static_dir)
    : impl_(std::make_unique<Impl>(service)) {
  auto& svr = impl_->server;
  Impl* impl = impl_.get();
  svr.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  svr.Options(".*", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  svr.Post("/command", [impl](const httplib::Request& req, httplib::Response& res) {
    const CommandReply r = impl->service.handle_command(req.body);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
  svr.Get("/status", [impl](const httplib::Request&, httplib::Response& res) {
    const CommandReply r = impl->service.handle_command(R"({"cmd":"status"})");
    res.status = r.status;
    res.set_content(r.body, "application/json");
  });
  svr.Get("/events", [impl](const httplib::Request&, httplib::Response& res) {
    auto sub = impl->service.subscribe();
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [impl, sub](std::size_t, httplib::DataSink& sink) {
          if (!impl->running.load() || sub->closed()) return false;
          const auto msg = sub->next(std::chrono::milliseconds(250));
          const std::string out = msg ? "data: " + *msg + "\n\n" : std::string(": keepalive\n\n");
          return sink.write(out.data(), out.size());
        },
        [impl, sub](bool) { impl->service.unsubscribe(sub); });
  });
  if (static_dir && !svr.set_mount_point("/", static_dir->string())) {
    throw ConfigError("static directory " + static_dir->string() + " does not exist");
  }
}

ControlBridge::~ControlBridge() { stop(); }

std::uint16_t ControlBridge::listen(const std::string& host, std::uint16_t port) {
  auto& svr = impl_->server;
  int bound = port;
  if (port == 0) {
    bound = svr.bind_to_any_port(host);
  } else if (!svr.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw TransportError("bridge cannot listen on " + host + ":" + std::to_string(port));
  impl_->running = true;
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  svr.wait_until_ready();
  return static_cast<std::uint16_t>(bound);
}

void ControlBridge::stop() {
  if (!impl_) return;
  impl_->running = false;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace emgwire
