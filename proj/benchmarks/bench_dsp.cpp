#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "emgwire/analysis.hpp"
#include "emgwire/signal_chain.hpp"

namespace {

using namespace emgwire;

std::vector<double> noise(std::size_t n) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1e-3);
  std::vector<double> x(n);
  for (double& v : x) v = g(rng);
  return x;
}

void BM_BandPass16k(benchmark::State& state) {
  const auto x = noise(16000);
  std::vector<double> y(x.size());
  BandPassFilter bp(BandPassSpec{}, 16000.0);
  for (auto _ : state) {
    bp.apply(x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_BandPass16k);

void BM_Notch1k(benchmark::State& state) {
  const auto x = noise(1000);
  std::vector<double> y(x.size());
  NotchFilter notch;
  for (auto _ : state) {
    notch.apply(x, y);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_Notch1k);

void BM_AdcQuantize(benchmark::State& state) {
  const auto x = noise(4096);
  const AdcSpec adc;
  for (auto _ : state) {
    for (double v : x) benchmark::DoNotOptimize(adc_quantize(adc, v));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_AdcQuantize);

void BM_Spectrum(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto x = noise(n);
  for (std::size_t i = 0; i < n; ++i) x[i] += std::sin(2.0 * std::numbers::pi * 60.0 * i / 1000.0);
  for (auto _ : state) benchmark::DoNotOptimize(spectrum(x, 1000.0));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Spectrum)->Arg(6000)->Arg(60000);

}  // namespace
