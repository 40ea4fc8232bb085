#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "emgwire/codec.hpp"
#include "emgwire/frame_sync.hpp"

namespace {

using namespace emgwire;

std::vector<ChannelCodes> random_codes(std::size_t n) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> mag(0, kMaxMagnitude);
  std::bernoulli_distribution sign(0.5);
  std::vector<ChannelCodes> out(n);
  for (auto& codes : out)
    for (auto& c : codes) c = {sign(rng), static_cast<std::uint16_t>(mag(rng))};
  return out;
}

void BM_EncodeWindow(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::int32_t> raw(kRawMin, kRawMax);
  std::vector<Raw24Sample> samples(4096);
  for (auto& s : samples) s.value = raw(rng);
  for (auto _ : state) {
    for (const auto& s : samples) benchmark::DoNotOptimize(encode_window(s));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(samples.size()));
}
BENCHMARK(BM_EncodeWindow);

void BM_PackFrame(benchmark::State& state) {
  const auto codes = random_codes(1024);
  for (auto _ : state) {
    for (const auto& c : codes) benchmark::DoNotOptimize(pack_frame(c));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(codes.size()));
}
BENCHMARK(BM_PackFrame);

void BM_UnpackFrame(benchmark::State& state) {
  std::vector<Frame> frames;
  for (const auto& c : random_codes(1024)) frames.push_back(pack_frame(c));
  for (auto _ : state) {
    for (const auto& f : frames) benchmark::DoNotOptimize(unpack_frame(f));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames.size()));
}
BENCHMARK(BM_UnpackFrame);

// Bytes per second through a locked synchroniser.
void BM_FrameSyncPush(benchmark::State& state) {
  std::vector<std::uint8_t> stream;
  for (const auto& c : random_codes(4096)) {
    const auto f = pack_frame(c);
    stream.insert(stream.end(), f.bytes.begin(), f.bytes.end());
  }
  for (auto _ : state) {
    FrameSync sync;
    std::size_t frames = 0;
    for (auto b : stream) frames += sync.push(b).has_value();
    benchmark::DoNotOptimize(frames);
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(stream.size()));
}
BENCHMARK(BM_FrameSyncPush);

}  // namespace
