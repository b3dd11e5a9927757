#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>

#include "ksvc/dsp.hpp"
#include "ksvc/matcher.hpp"
#include "ksvc/smoother.hpp"
#include "ksvc/synth.hpp"

namespace {

ksvc::FeatureSequence random_rows(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  ksvc::FeatureSequence f{ksvc::FrameMatrix(rows, dim)};
  for (auto& v : f.frames.data()) v = g(rng);
  return f;
}

ksvc::ReferencePool random_pool(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  ksvc::matcher::Utterance u;
  u.features = random_rows(rows, dim, seed);
  u.pitch.f0.assign(rows, 0.0f);
  u.harmonics.amplitudes = ksvc::FrameMatrix(rows, 1);
  return ksvc::matcher::build_pool({u});
}

void BM_KnnQuery(benchmark::State& state) {
  const auto pool_rows = static_cast<std::size_t>(state.range(0));
  const auto dim = static_cast<std::size_t>(state.range(1));
  const auto pool = random_pool(pool_rows, dim, 1);
  const auto queries = random_rows(100, dim, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ksvc::matcher::knn_query(pool, queries, 4));
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_KnnQuery)->Args({1000, 80})->Args({10000, 80})->Args({10000, 1024})->Unit(benchmark::kMillisecond);

void BM_Reselect(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  const auto pool = random_pool(5000, 80, 3);
  const auto source = random_rows(frames, 80, 4);
  const auto knn = ksvc::matcher::knn_query(pool, source, 4);
  const ksvc::smoother::SmootherConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(ksvc::smoother::reselect(pool, source, knn, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames));
}
BENCHMARK(BM_Reselect)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_OptimizeWeights(benchmark::State& state) {
  const auto frames = static_cast<std::size_t>(state.range(0));
  const auto pool = random_pool(5000, 80, 5);
  const auto source = random_rows(frames, 80, 6);
  const ksvc::smoother::SmootherConfig cfg;
  const auto sets = ksvc::smoother::reselect(pool, source, ksvc::matcher::knn_query(pool, source, 4), cfg);
  for (auto _ : state) benchmark::DoNotOptimize(ksvc::smoother::optimize_weights(pool, sets, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames));
}
BENCHMARK(BM_OptimizeWeights)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Stft(benchmark::State& state) {
  const ksvc::AudioConfig cfg;
  ksvc::Waveform w{std::vector<float>(static_cast<std::size_t>(state.range(0)) * 16000), 16000};
  for (std::size_t i = 0; i < w.size(); ++i) w.samples[i] = static_cast<float>(std::sin(0.05 * i));
  for (auto _ : state) benchmark::DoNotOptimize(ksvc::dsp::stft(w, cfg));
}
BENCHMARK(BM_Stft)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_DetectPitch(benchmark::State& state) {
  const ksvc::AudioConfig cfg;
  ksvc::Waveform w{std::vector<float>(static_cast<std::size_t>(state.range(0)) * 16000), 16000};
  for (std::size_t i = 0; i < w.size(); ++i) {
    w.samples[i] = static_cast<float>(std::sin(2.0 * std::numbers::pi * 220.0 * i / 16000.0));
  }
  for (auto _ : state) benchmark::DoNotOptimize(ksvc::dsp::detect_pitch(w, cfg, {}));
}
BENCHMARK(BM_DetectPitch)->Arg(10)->Unit(benchmark::kMillisecond);

void BM_RenderHarmonics(benchmark::State& state) {
  const ksvc::AudioConfig cfg;
  const std::size_t frames = 500;
  const auto n = static_cast<std::size_t>(state.range(0));
  ksvc::PitchTrack pitch{std::vector<float>(frames, 180.0f)};
  ksvc::HarmonicTable table{ksvc::FrameMatrix(frames, n, 0.5f / static_cast<float>(n))};
  for (auto _ : state) benchmark::DoNotOptimize(ksvc::synth::render_harmonics(pitch, table, cfg));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(frames * cfg.hop_size));
}
BENCHMARK(BM_RenderHarmonics)->Arg(10)->Arg(50)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
