// Compares the OpenMP kernels against the serial reference path.

#include <benchmark/benchmark.h>

#include "spk/features.hpp"
#include "spk/kernels.hpp"
#include "spk/nn.hpp"
#include "spk/rng.hpp"

using namespace spk;

namespace {

audio::Waveform bench_waveform(std::size_t n) {
  audio::Waveform w;
  w.sample_rate = 16000;
  auto g = rng::stream(7, 0);
  w.samples.resize(n);
  for (auto& x : w.samples) x = 2.0 * rng::uniform01(g) - 1.0;
  return w;
}

void bench_stft(benchmark::State& state, bool parallel) {
  kernels::parallel_enabled() = parallel;
  const auto w = bench_waveform(48240);
  const feat::FrameSpec spec;
  for (auto _ : state) {
    auto s = feat::stft_amplitude(w, spec);
    benchmark::DoNotOptimize(s.data());
  }
  kernels::parallel_enabled() = true;
}

void bench_conv(benchmark::State& state, bool parallel) {
  kernels::parallel_enabled() = parallel;
  auto g = rng::stream(7, 1);
  TensorF in({16, 75, 65});
  TensorF weight({32, 16, 3, 3});
  TensorF bias({32});
  for (auto& x : in.v) x = float(rng::normal(g));
  for (auto& x : weight.v) x = float(rng::normal(g));
  for (auto _ : state) {
    TensorF out;
    kernels::conv3x3_forward(in, weight, bias, 2, out);
    benchmark::DoNotOptimize(out.data());
  }
  kernels::parallel_enabled() = true;
}

void bench_encoder_forward(benchmark::State& state, bool parallel) {
  kernels::parallel_enabled() = parallel;
  const auto cfg = nn::small_encoder_config(64, 300, 257);
  auto g = rng::stream(7, 2);
  const auto params = nn::init_params<float>(cfg, g);
  TensorF input({1, 300, 257});
  for (auto& x : input.v) x = float(rng::normal(g));
  for (auto _ : state) {
    auto emb = nn::forward(cfg, params, input, false, nullptr);
    benchmark::DoNotOptimize(emb.data());
  }
  kernels::parallel_enabled() = true;
}

}  // namespace

BENCHMARK_CAPTURE(bench_stft, serial, false);
BENCHMARK_CAPTURE(bench_stft, openmp, true);
BENCHMARK_CAPTURE(bench_conv, serial, false);
BENCHMARK_CAPTURE(bench_conv, openmp, true);
BENCHMARK_CAPTURE(bench_encoder_forward, serial, false);
BENCHMARK_CAPTURE(bench_encoder_forward, openmp, true);

BENCHMARK_MAIN();
