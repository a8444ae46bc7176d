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

// Whole-model single-image inference for the default builders.

#include <benchmark/benchmark.h>

#include <vector>

#include "dredge/builders.hpp"
#include "dredge/graph.hpp"
#include "dredge/quantizer.hpp"
#include "dredge/random.hpp"

namespace dredge {
namespace {

Tensor random_image_tensor(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(224 * 224 * 3);
  for (float& x : v) x = static_cast<float>(rng.unit());
  return Tensor::f32({1, 224, 224, 3}, std::move(v));
}

ModelGraph build(int which) {
  switch (which) {
    case 0: return build_mobilenet();
    case 1: return build_shufflenet();
    case 2: return build_squeezenet();
    default: return build_custom_dnn();
  }
}

const char* kNames[] = {"mobilenet", "shufflenet", "squeezenet", "customdnn"};

void BM_InferF32(benchmark::State& state) {
  const ModelGraph g = build(static_cast<int>(state.range(0)));
  state.SetLabel(kNames[state.range(0)]);
  const Tensor x = random_image_tensor(1);
  Executor ex(g);
  for (auto _ : state) benchmark::DoNotOptimize(ex.run(x));
}
BENCHMARK(BM_InferF32)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

void BM_InferI8(benchmark::State& state) {
  const ModelGraph g = build(static_cast<int>(state.range(0)));
  state.SetLabel(kNames[state.range(0)]);
  const std::vector<Tensor> calib = {random_image_tensor(2), random_image_tensor(3)};
  const ModelGraph q = quantize_graph(g, calibrate(g, calib));
  const Tensor x = random_image_tensor(1);
  Executor ex(q);
  for (auto _ : state) benchmark::DoNotOptimize(ex.run(x));
}
BENCHMARK(BM_InferI8)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace dredge

BENCHMARK_MAIN();
