// Serial reference kernels against the OpenMP versions, across canvas sizes.
// Run with OMP_NUM_THREADS set to compare scaling.

#include <benchmark/benchmark.h>

#include <vector>

#include "sakugaflow/kernels.hpp"

namespace k = sakugaflow::kernels;

namespace {

std::vector<std::uint8_t> noise(std::size_t edge, std::uint64_t seed) {
  std::vector<std::uint8_t> v(edge * edge * 4);
  k::reference::fill_noise(seed, v);
  return v;
}

std::vector<std::uint8_t> half_mask(std::size_t edge) {
  std::vector<std::uint8_t> m(edge * edge);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = (i / edge) < edge / 2;
  return m;
}

template <void (*Fill)(std::uint64_t, std::span<std::uint8_t>)>
void BM_FillNoise(benchmark::State& state) {
  const auto edge = static_cast<std::size_t>(state.range(0));
  std::vector<std::uint8_t> px(edge * edge * 4);
  for (auto _ : state) {
    Fill(0xf753c0e1fc80fc5fULL, px);
    benchmark::DoNotOptimize(px.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * px.size()));
}

template <void (*Blend)(std::span<std::uint8_t>, std::span<const std::uint8_t>, double)>
void BM_Blend(benchmark::State& state) {
  const auto edge = static_cast<std::size_t>(state.range(0));
  auto base = noise(edge, 1);
  auto px = noise(edge, 2);
  for (auto _ : state) {
    Blend(px, base, 0.6);
    benchmark::DoNotOptimize(px.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * px.size()));
}

template <void (*Copy)(std::span<std::uint8_t>, std::span<const std::uint8_t>,
                       std::span<const std::uint8_t>)>
void BM_CopyUnmasked(benchmark::State& state) {
  const auto edge = static_cast<std::size_t>(state.range(0));
  auto base = noise(edge, 1);
  auto px = noise(edge, 2);
  auto mask = half_mask(edge);
  for (auto _ : state) {
    Copy(px, base, mask);
    benchmark::DoNotOptimize(px.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * px.size()));
}

template <std::size_t (*Count)(std::span<const std::uint8_t>, std::span<const std::uint8_t>)>
void BM_CountDiffering(benchmark::State& state) {
  const auto edge = static_cast<std::size_t>(state.range(0));
  auto a = noise(edge, 1);
  auto b = a;
  for (std::size_t i = 0; i < b.size(); i += 37) b[i] ^= 1;
  for (auto _ : state) benchmark::DoNotOptimize(Count(a, b));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * a.size() * 2));
}

#define SIZES ->Arg(64)->Arg(512)->Arg(2048)

BENCHMARK(BM_FillNoise<k::reference::fill_noise>) SIZES;
BENCHMARK(BM_FillNoise<k::fill_noise>) SIZES;
BENCHMARK(BM_Blend<k::reference::blend>) SIZES;
BENCHMARK(BM_Blend<k::blend>) SIZES;
BENCHMARK(BM_CopyUnmasked<k::reference::copy_unmasked>) SIZES;
BENCHMARK(BM_CopyUnmasked<k::copy_unmasked>) SIZES;
BENCHMARK(BM_CountDiffering<k::reference::count_differing_pixels>) SIZES;
BENCHMARK(BM_CountDiffering<k::count_differing_pixels>) SIZES;

}  // namespace

BENCHMARK_MAIN();
