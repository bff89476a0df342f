// Copyright 2026 The svbrdf Authors.
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <vector>

#include "svbrdf/common.hpp"
#include "svbrdf/diff_render.hpp"
#include "svbrdf/kernels.hpp"

namespace {

using namespace svbrdf;

std::vector<float> random_buffer(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

kernels::ConvShape conv_shape(const benchmark::State& state) {
  kernels::ConvShape s;
  s.batch = 4;
  s.in_channels = static_cast<int>(state.range(0));
  s.out_channels = static_cast<int>(state.range(0));
  s.in_height = s.in_width = static_cast<int>(state.range(1)) + 2;
  s.kernel = 3;
  return s;
}

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  const kernels::ConvShape s = conv_shape(state);
  const auto in = random_buffer(s.input_size(), 1);
  const auto w = random_buffer(s.weight_size(), 2);
  std::vector<float> out(s.output_size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::conv_forward<float>(s, in, w, out);
    } else {
      kernels::reference::conv_forward<float>(s, in, w, out);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(s.output_size()) * s.in_channels * 9);
}

template <bool Parallel>
void BM_ConvBackwardWeight(benchmark::State& state) {
  const kernels::ConvShape s = conv_shape(state);
  const auto in = random_buffer(s.input_size(), 1);
  const auto go = random_buffer(s.output_size(), 3);
  std::vector<float> gw(s.weight_size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::conv_backward_weight<float>(s, in, go, gw);
    } else {
      kernels::reference::conv_backward_weight<float>(s, in, go, gw);
    }
    benchmark::DoNotOptimize(gw.data());
  }
}

template <bool Parallel>
void BM_InstanceNorm(benchmark::State& state) {
  kernels::NormShape s{4, static_cast<int>(state.range(0)), static_cast<int>(state.range(1) * state.range(1))};
  const std::size_t n = static_cast<std::size_t>(s.batch) * s.channels * s.pixels;
  const auto in = random_buffer(n, 4);
  std::vector<float> gamma(s.channels, 1.0f), beta(s.channels, 0.0f), out(n), xhat(n),
      inv(static_cast<std::size_t>(s.batch) * s.channels);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::instance_norm_forward<float>(s, in, gamma, beta, 1e-5f, out, xhat, inv);
    } else {
      kernels::reference::instance_norm_forward<float>(s, in, gamma, beta, 1e-5f, out, xhat, inv);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

SvbrdfMaps bench_material(int res) {
  return SvbrdfMaps::uniform(res, res, {0.6f, 0.4f, 0.3f}, {0.0f, 0.0f, 1.0f}, 0.4f, 0.2f);
}

template <bool Parallel>
void BM_RenderPointLight(benchmark::State& state) {
  const int res = static_cast<int>(state.range(0));
  const SvbrdfMaps maps = bench_material(res);
  const SceneConfig cfg;
  const PointLight light{{0.1, 0.05, 0.5}, {1.0, 1.0, 1.0}};
  const Vec3d view{0.0, 0.0, 0.5};
  for (auto _ : state) {
    HdrImage img = Parallel ? render_point_light(maps, light, view, cfg)
                            : reference::render_point_light(maps, light, view, cfg);
    benchmark::DoNotOptimize(img.data.data());
  }
  state.SetItemsProcessed(state.iterations() * res * res);
}

}  // namespace

BENCHMARK(BM_ConvForward<true>)->Args({32, 32})->Args({64, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForward<false>)->Args({32, 32})->Args({64, 64})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardWeight<true>)->Args({32, 32})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardWeight<false>)->Args({32, 32})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InstanceNorm<true>)->Args({64, 64})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_InstanceNorm<false>)->Args({64, 64})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_RenderPointLight<true>)->Arg(256)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RenderPointLight<false>)->Arg(256)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
