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

// The four classifier architectures. Every schedule lives in a config
// struct; the defaults are sized so the int8 model files land near the
// target deployment sizes. Weights are uniform in [-0.05, 0.05] from a
// seeded generator; batch norms are folded at build time.

#ifndef DREDGE_BUILDERS_HPP_
#define DREDGE_BUILDERS_HPP_

#include <cstdint>
#include <vector>

#include "dredge/graph.hpp"
#include "dredge/random.hpp"

namespace dredge {

inline constexpr float kInitRange = 0.05f;

struct MobileNetBlock {
  int out_channels = 64;
  int stride = 1;
};

struct MobileNetConfig {
  double width_multiplier = 1.0;  // one of 0.25, 0.5, 0.75, 1.0
  int stem_channels = 32;
  std::vector<MobileNetBlock> blocks = {
      {64, 1},  {128, 2}, {128, 1}, {256, 2}, {256, 1},
      {512, 2}, {512, 1}, {512, 1}, {512, 1}, {512, 1},
      {512, 1}, {1024, 2}, {1024, 1}};
  std::uint64_t seed = kDefaultSeed;
};

struct ShuffleNetConfig {
  int groups = 3;
  double width_multiplier = 1.0;
  int stem_channels = 24;
  int stem_stride = 1;
  std::vector<int> stage_channels = {72, 144, 288};
  std::vector<int> stage_repeats = {2, 6, 2};
  int bottleneck_ratio = 4;  // bottleneck = out_channels / ratio
  std::uint64_t seed = kDefaultSeed;
};

struct SqueezeNetConfig {
  int stem_channels = 48;
  int stem_stride = 1;
  std::vector<FireAttrs> fires = {
      {8, 32, 32},   {8, 32, 32},   {16, 64, 64},   {16, 64, 64},
      {24, 96, 96},  {24, 96, 96},  {32, 128, 128}, {32, 128, 128}};
  // 3x3 stride-2 max pools follow these fire indices (0-based).
  std::vector<int> pool_after = {3, 6};
  std::uint64_t seed = kDefaultSeed;
};

struct CustomConvSpec {
  int out_channels = 32;
  int kernel = 3;
};

struct CustomDnnConfig {
  std::vector<CustomConvSpec> filters = {{32, 3}, {64, 3}, {128, 3}, {256, 3}};
  int dense_units = 32;
  std::uint64_t seed = kDefaultSeed;
};

ModelGraph build_mobilenet(const MobileNetConfig& config = {});
ModelGraph build_shufflenet(const ShuffleNetConfig& config = {});
ModelGraph build_squeezenet(const SqueezeNetConfig& config = {});
ModelGraph build_custom_dnn(const CustomDnnConfig& config = {});

}  // namespace dredge

#endif  // DREDGE_BUILDERS_HPP_
