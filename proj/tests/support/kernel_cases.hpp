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

// Randomized kernel-versus-oracle sweeps. Attributes are drawn from the
// ranges the builders use (1x1 and 3x3 kernels, strides 1 and 2, grouped
// and depthwise convolutions, 2x2 and 3x3 pools, fire ratios, dense heads),
// inputs are bounded by [-10, 10] and weights are builder scale.
//
// f32 paths must match the oracle within kF32Tolerance. i8 paths must land
// within kUnitTolerance quantized units of the quantized oracle computed on
// the dequantized operands; composite kernels are checked stage by stage,
// each stage fed the kernel's own int8 intermediate.

#ifndef DREDGE_TESTS_SUPPORT_KERNEL_CASES_HPP_
#define DREDGE_TESTS_SUPPORT_KERNEL_CASES_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace dredge::testing {

inline constexpr double kF32Tolerance = 1e-5;
inline constexpr std::int64_t kUnitTolerance = 1;

struct KernelSweep {
  std::string kernel;
  int cases = 0;
  int failures = 0;
  double worst_f32_error = 0.0;
  std::int64_t worst_unit_error = 0;
  std::string first_failure;

  bool ok() const { return cases > 0 && failures == 0; }
};

KernelSweep sweep_conv2d(std::uint64_t seed, int cases);
KernelSweep sweep_depthwise_separable(std::uint64_t seed, int cases);
KernelSweep sweep_channel_shuffle(std::uint64_t seed, int cases);
KernelSweep sweep_fire(std::uint64_t seed, int cases);
KernelSweep sweep_maxpool(std::uint64_t seed, int cases);
KernelSweep sweep_global_avg_pool(std::uint64_t seed, int cases);
KernelSweep sweep_relu(std::uint64_t seed, int cases);
KernelSweep sweep_dense(std::uint64_t seed, int cases);
KernelSweep sweep_softmax(std::uint64_t seed, int cases);

std::vector<KernelSweep> sweep_all_kernels(std::uint64_t seed, int cases);

}  // namespace dredge::testing

#endif  // DREDGE_TESTS_SUPPORT_KERNEL_CASES_HPP_
