#include <benchmark/benchmark.h>

#include <vector>

#include "emgwire/device.hpp"
#include "emgwire/host.hpp"
#include "emgwire/sources.hpp"

namespace {

using namespace emgwire;

// Frames built per second by the simulated device (oversampled chain).
void BM_DeviceFrame(benchmark::State& state) {
  DeviceConfig cfg;
  DeviceSimulator dev(cfg, make_source(GestureScript::standard(), cfg.internal_rate(), 1));
  for (auto _ : state) benchmark::DoNotOptimize(dev.next_frame());
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_DeviceFrame);

void BM_StreamDecode(benchmark::State& state) {
  DeviceConfig cfg;
  DeviceSimulator dev(cfg, make_source(GestureScript::standard(), cfg.internal_rate(), 1));
  std::vector<std::uint8_t> bytes;
  for (int i = 0; i < 1000; ++i) {
    const auto f = dev.next_frame();
    bytes.insert(bytes.end(), f.bytes.begin(), f.bytes.end());
  }
  const NotchSpec notch{};
  for (auto _ : state) {
    StreamDecoder dec(notch);
    std::size_t n = 0;
    dec.feed(bytes, [&](const DecodedSample&) { ++n; });
    benchmark::DoNotOptimize(n);
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(bytes.size()));
}
BENCHMARK(BM_StreamDecode);

}  // namespace
