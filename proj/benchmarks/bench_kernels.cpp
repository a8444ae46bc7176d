/* Copyright 2026 The Dredge Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Per-kernel throughput, f32 against i8, at shapes the builders produce.

#include <benchmark/benchmark.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "dredge/memory_plan.hpp"
#include "dredge/ops.hpp"
#include "dredge/random.hpp"
#include "dredge/tensor.hpp"

namespace dredge {
namespace {

Tensor uniform(Rng& rng, Shape s, double lo, double hi) {
  std::vector<float> v(static_cast<std::size_t>(s.elements()));
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return Tensor::f32(s, std::move(v));
}

QuantParams range_qparams(const Tensor& t) {
  const RangeObservation r = observe(t);
  return qparams_from_range(r.min, r.max, false);
}

Tensor quantize_tensor(const Tensor& t) { return quantize(t, range_qparams(t)); }

// Symmetric weights; the bias goes to i32 at s_in * s_w.
struct QuantConv {
  Tensor input, weights, bias;
  QuantParams out;
};

QuantConv quant_conv(const Tensor& in, const Tensor& w, const Tensor& b) {
  QuantConv q;
  q.input = quantize_tensor(in);
  const auto wv = w.data<float>();
  float m = 0.0f;
  for (const float x : wv) m = std::max(m, std::abs(x));
  const QuantParams wq{m / 127.0f, 0};
  q.weights = quantize(w, wq);
  const float bs = q.input.qparams()->scale * wq.scale;
  std::vector<std::int32_t> bi;
  for (const float x : b.data<float>()) bi.push_back(static_cast<std::int32_t>(std::lround(x / bs)));
  q.bias = Tensor::i32(b.shape(), std::move(bi), QuantParams{bs, 0});
  // Wide enough that the requantization multiplier stays below one.
  q.out = QuantParams{0.25f, -20};
  return q;
}

// args: spatial size, channels in, channels out, kernel, stride
void BM_Conv2dF32(benchmark::State& state) {
  Rng rng(1);
  const int hw = static_cast<int>(state.range(0)), cin = static_cast<int>(state.range(1)),
            cout = static_cast<int>(state.range(2)), k = static_cast<int>(state.range(3));
  const Tensor in = uniform(rng, {1, hw, hw, cin}, 0, 1);
  const Tensor w = uniform(rng, {k, k, cin, cout}, -0.05, 0.05);
  const Tensor b = uniform(rng, {1, 1, 1, cout}, -0.05, 0.05);
  ConvAttrs a;
  a.kernel_h = a.kernel_w = k;
  a.padding = Padding::kSame;
  a.out_channels = cout;
  a.fused_relu = true;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(in, w, b, a));
  state.SetItemsProcessed(state.iterations() * hw * hw * cout * k * k * cin);
}
BENCHMARK(BM_Conv2dF32)->Args({56, 32, 64, 1, 1})->Args({56, 32, 32, 3, 1})->Args({28, 128, 128, 1, 1});

void BM_Conv2dI8(benchmark::State& state) {
  Rng rng(1);
  const int hw = static_cast<int>(state.range(0)), cin = static_cast<int>(state.range(1)),
            cout = static_cast<int>(state.range(2)), k = static_cast<int>(state.range(3));
  const Tensor in = uniform(rng, {1, hw, hw, cin}, 0, 1);
  const Tensor w = uniform(rng, {k, k, cin, cout}, -0.05, 0.05);
  const Tensor b = uniform(rng, {1, 1, 1, cout}, -0.05, 0.05);
  const QuantConv q = quant_conv(in, w, b);
  ConvAttrs a;
  a.kernel_h = a.kernel_w = k;
  a.padding = Padding::kSame;
  a.out_channels = cout;
  a.fused_relu = true;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(q.input, q.weights, q.bias, a, q.out));
  state.SetItemsProcessed(state.iterations() * hw * hw * cout * k * k * cin);
}
BENCHMARK(BM_Conv2dI8)->Args({56, 32, 64, 1, 1})->Args({56, 32, 32, 3, 1})->Args({28, 128, 128, 1, 1});

void BM_DepthwiseSeparableF32(benchmark::State& state) {
  Rng rng(2);
  const int hw = static_cast<int>(state.range(0)), c = static_cast<int>(state.range(1));
  const Tensor in = uniform(rng, {1, hw, hw, c}, 0, 1);
  const DepthwiseSeparableWeights w = fold_depthwise_separable(
      uniform(rng, {3, 3, 1, c}, -0.05, 0.05), uniform(rng, {1, 1, c, 2 * c}, -0.05, 0.05),
      BatchNormParams::identity(c), BatchNormParams::identity(2 * c));
  DepthwiseSeparableAttrs a;
  a.out_channels = 2 * c;
  for (auto _ : state) benchmark::DoNotOptimize(depthwise_separable_block(in, w, a));
}
BENCHMARK(BM_DepthwiseSeparableF32)->Args({112, 32})->Args({28, 256});

void BM_ChannelShuffle(benchmark::State& state) {
  Rng rng(3);
  const Tensor in = uniform(rng, {1, 28, 28, 144}, -1, 1);
  const Tensor q = quantize_tensor(in);
  const Tensor& t = state.range(0) == 0 ? in : q;
  for (auto _ : state) benchmark::DoNotOptimize(channel_shuffle(t, 3));
}
BENCHMARK(BM_ChannelShuffle)->Arg(0)->Arg(1);

void BM_FireF32(benchmark::State& state) {
  Rng rng(4);
  const Tensor in = uniform(rng, {1, 55, 55, 64}, 0, 1);
  FireWeights w{uniform(rng, {1, 1, 64, 16}, -0.05, 0.05), uniform(rng, {1, 1, 1, 16}, -0.05, 0.05),
                uniform(rng, {1, 1, 16, 64}, -0.05, 0.05), uniform(rng, {1, 1, 1, 64}, -0.05, 0.05),
                uniform(rng, {3, 3, 16, 64}, -0.05, 0.05), uniform(rng, {1, 1, 1, 64}, -0.05, 0.05)};
  for (auto _ : state) benchmark::DoNotOptimize(fire(in, w, FireAttrs{16, 64, 64}));
}
BENCHMARK(BM_FireF32);

void BM_MaxPool(benchmark::State& state) {
  Rng rng(5);
  const Tensor in = uniform(rng, {1, 112, 112, 32}, -1, 1);
  for (auto _ : state) benchmark::DoNotOptimize(maxpool2d(in, PoolAttrs{}));
}
BENCHMARK(BM_MaxPool);

void BM_GlobalAvgPoolI8(benchmark::State& state) {
  Rng rng(6);
  const Tensor q = quantize_tensor(uniform(rng, {1, 7, 7, 1024}, 0, 6));
  const QuantParams out = *q.qparams();
  for (auto _ : state) benchmark::DoNotOptimize(global_avg_pool(q, out));
}
BENCHMARK(BM_GlobalAvgPoolI8);

void BM_PlanArena(benchmark::State& state) {
  Rng rng(7);
  std::vector<BufferLifetime> b;
  const int n = static_cast<int>(state.range(0));
  for (int i = 0; i < n; ++i) {
    b.push_back({static_cast<std::size_t>(1 + rng.below(1 << 20)), i,
                 i + 1 + static_cast<int>(rng.below(3))});
  }
  for (auto _ : state) benchmark::DoNotOptimize(plan_arena(b));
}
BENCHMARK(BM_PlanArena)->Arg(30)->Arg(120);

}  // namespace
}  // namespace dredge

BENCHMARK_MAIN();
