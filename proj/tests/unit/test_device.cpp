#include <gtest/gtest.h>

#include <atomic>
#include <thread>
#include <vector>

#include "emgwire/device.hpp"
#include "emgwire/errors.hpp"
#include "emgwire/frame_sync.hpp"
#include "emgwire/transport.hpp"

namespace emgwire {
namespace {

class CollectSink final : public ByteSink {
 public:
  void write(std::span<const std::uint8_t> b) override { bytes.insert(bytes.end(), b.begin(), b.end()); }
  void close() override { closed = true; }
  std::vector<std::uint8_t> bytes;
  bool closed = false;
};

class FailingSink final : public ByteSink {
 public:
  explicit FailingSink(std::size_t after) : after_(after) {}
  void write(std::span<const std::uint8_t> b) override {
    if (written_ + b.size() > after_) throw TransportError("peer went away");
    written_ += b.size();
  }

 private:
  std::size_t after_;
  std::size_t written_ = 0;
};

DeviceConfig quick_config(double seconds) {
  DeviceConfig cfg;
  cfg.virtual_clock = true;
  cfg.duration_s = seconds;
  return cfg;
}

TEST(DeviceConfig, DefaultsValidate) {
  DeviceConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.frame_bits, 110);
  EXPECT_DOUBLE_EQ(cfg.internal_rate(), 16000.0);
}

TEST(DeviceConfig, RejectsWireBudgetBelowSampleRate) {
  DeviceConfig cfg;
  cfg.frame_bits = 240;  // 480 frames/s cannot carry 1000 SPS
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = DeviceConfig{};
  cfg.baud = 9600;
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = DeviceConfig{};
  cfg.oversample = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(DeviceSimulator, ZeroSourceDecodesToZero) {
  DeviceSimulator sim(DeviceConfig{}, make_source(SineSpec::uniform(1.0, 0.0), 16000.0, 1));
  for (int i = 0; i < 100; ++i) {
    const Frame f = sim.next_frame();
    for (const auto& c : unpack_frame(f)) ASSERT_EQ(decode_window(c), 0);
  }
  EXPECT_EQ(sim.frames_built(), 100u);
}

TEST(DeviceSimulator, BypassKeepsDcWhileFilterBlocksIt) {
  DeviceConfig bypass;
  bypass.bypass_filter = true;
  // 1 Hz sine near its crest looks like DC over a few samples.
  DeviceSimulator raw(bypass, make_source(SineSpec::uniform(0.001, 5e-3), 16000.0, 1));
  DeviceSimulator filtered(DeviceConfig{}, make_source(SineSpec::uniform(0.001, 5e-3), 16000.0, 1));
  for (int i = 0; i < 3000; ++i) {
    raw.next_frame();
    filtered.next_frame();
  }
  EXPECT_GT(decode_window(raw.last_codes()[0]), 0);
  EXPECT_EQ(decode_window(filtered.last_codes()[0]), 0);
}

TEST(DeviceSimulator, DeterministicForSeed) {
  DeviceConfig cfg;
  cfg.mains_amplitude = 1e-3;
  cfg.seed = 5;
  DeviceSimulator a(cfg, make_source(GestureScript::standard(), 16000.0, 5));
  DeviceSimulator b(cfg, make_source(GestureScript::standard(), 16000.0, 5));
  for (int i = 0; i < 500; ++i) ASSERT_EQ(a.next_frame(), b.next_frame());
}

TEST(DeviceSimulator, NaturalLengthFollowsSource) {
  DeviceSimulator g(DeviceConfig{}, make_source(GestureScript::standard(), 16000.0, 1));
  ASSERT_TRUE(g.natural_frames());
  EXPECT_EQ(*g.natural_frames(), 6000u);
  DeviceSimulator s(DeviceConfig{}, make_source(SineSpec::uniform(1.0, 1e-3), 16000.0, 1));
  EXPECT_FALSE(s.natural_frames());
}

TEST(RunDevice, EmitsWholeFramesAndCloses) {
  CollectSink sink;
  VirtualClock clock;
  const auto report = run_device(quick_config(0.5), make_source(SineSpec::uniform(5.0, 1e-3), 16000.0, 1), sink, clock);
  EXPECT_TRUE(report.ok()) << report.error;
  EXPECT_EQ(report.frames, 500u);
  EXPECT_EQ(report.bytes, 500u * kFrameBytes);
  EXPECT_EQ(sink.bytes.size(), report.bytes);
  EXPECT_TRUE(sink.closed);
  FrameSync sync;
  std::size_t frames = 0;
  for (auto b : sink.bytes) frames += sync.push(b).has_value();
  EXPECT_EQ(frames, 498u);
  EXPECT_EQ(sync.stats().sync_losses, 0u);
}

TEST(RunDevice, VirtualPacingHitsSampleRateAndByteCap) {
  CollectSink sink;
  VirtualClock clock;
  const auto report = run_device(quick_config(10.0), make_source(SineSpec::uniform(5.0, 1e-3), 16000.0, 1), sink, clock);
  EXPECT_NEAR(report.elapsed_s, 10.0, 0.01);
  EXPECT_NEAR(static_cast<double>(report.frames), 10000.0, 100.0);
  EXPECT_LE(report.bytes_per_s(), 11520.0);
}

TEST(RunDevice, StopFlagEndsRun) {
  CollectSink sink;
  VirtualClock clock;
  std::atomic<bool> stop{true};
  DeviceConfig cfg = quick_config(5.0);
  const auto report = run_device(cfg, make_source(SineSpec::uniform(5.0, 1e-3), 16000.0, 1), sink, clock, &stop);
  EXPECT_EQ(report.frames, 0u);
  EXPECT_TRUE(sink.closed);
}

TEST(RunDevice, TransportFailureIsReported) {
  FailingSink sink(100);
  VirtualClock clock;
  const auto report = run_device(quick_config(1.0), make_source(SineSpec::uniform(5.0, 1e-3), 16000.0, 1), sink, clock);
  EXPECT_FALSE(report.ok());
  EXPECT_NE(report.error.find("peer went away"), std::string::npos);
  EXPECT_EQ(report.frames, 9u);
}

TEST(TokenBucket, CapsBurstAndRefills) {
  VirtualClock clock;
  TokenBucket bucket(11520.0, 11.0, clock);
  EXPECT_TRUE(bucket.try_consume(11.0));
  EXPECT_FALSE(bucket.try_consume(1.0));
  clock.sleep_until(1.0 / 11520.0 * 5.0);
  EXPECT_NEAR(bucket.available(), 5.0, 1e-9);
  clock.sleep_until(100.0);
  EXPECT_NEAR(bucket.available(), 11.0, 1e-12);
  bucket.consume(11.0);
  const double before = clock.now();
  bucket.consume(11.0);
  EXPECT_NEAR(clock.now() - before, 11.0 / 11520.0, 1e-9);
}

TEST(Transport, ConnectRefusedThrows) {
  // Grab a free port, then close the listener so nobody is there.
  std::uint16_t port = 0;
  {
    TcpListener l(Endpoint{"127.0.0.1", 0});
    port = l.port();
  }
  EXPECT_THROW(tcp_connect(Endpoint{"127.0.0.1", port}), TransportError);
}

TEST(Transport, EndpointParsing) {
  const auto a = parse_endpoint("tcp:localhost:7000");
  EXPECT_EQ(a.host, "localhost");
  EXPECT_EQ(a.port, 7000);
  const auto b = parse_endpoint("10.0.0.2:1");
  EXPECT_EQ(b.host, "10.0.0.2");
  EXPECT_EQ(b.port, 1);
  EXPECT_THROW(parse_endpoint("nope"), ConfigError);
  EXPECT_THROW(parse_endpoint("h:99999"), ConfigError);
}

TEST(Transport, TcpRoundTrip) {
  TcpListener listener(Endpoint{"127.0.0.1", 0});
  std::vector<std::uint8_t> got;
  std::thread server([&] {
    auto conn = listener.accept();
    std::uint8_t buf[64];
    while (const std::size_t n = conn->read(buf)) got.insert(got.end(), buf, buf + n);
  });
  {
    auto client = tcp_connect(Endpoint{"127.0.0.1", listener.port()});
    const std::vector<std::uint8_t> msg = {1, 2, 3, 0xFF, 0};
    client->write(msg);
    client->close();
  }
  server.join();
  EXPECT_EQ(got, (std::vector<std::uint8_t>{1, 2, 3, 0xFF, 0}));
}

TEST(Transport, LoopbackReaderCloseFailsWriter) {
  auto [sink, source] = make_loopback(16);
  const std::vector<std::uint8_t> bytes(8, 7);
  sink->write(bytes);
  std::uint8_t buf[4];
  EXPECT_EQ(source->read(buf), 4u);
  source->interrupt();
  EXPECT_THROW(sink->write(bytes), TransportError);
}

}  // namespace
}  // namespace emgwire
