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

// Cost model: multiply-accumulate counts, activation arena, ROM, and a
// per-device latency estimate of macs / throughput + overhead.

#ifndef DREDGE_PROFILER_HPP_
#define DREDGE_PROFILER_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dredge/graph.hpp"
#include "dredge/memory_plan.hpp"

namespace dredge {

struct MacReport {
  std::vector<std::int64_t> node_macs;         // parallel to graph.nodes
  std::vector<std::size_t> node_output_bytes;  // parallel to graph.nodes
  std::int64_t total = 0;
};

// Pooling, ReLU, shuffle, flatten and softmax count as zero.
MacReport count_macs(const ModelGraph& graph);

// Activation arena plus rom_bytes = estimate_rom(graph).
MemoryPlan plan_memory(const ModelGraph& graph);

// Exact serialized model size.
std::size_t estimate_rom(const ModelGraph& graph);

// Device classes in report order, slowest first.
inline constexpr std::array<std::string_view, 5> kDeviceClasses = {
    "Low-end MCU", "High-end MCU", "AI Accelerator", "CPU", "GPU"};

struct DeviceProfile {
  std::string name;
  double throughput = 1.0;  // MACs per millisecond
  double fixed_overhead_ms = 0.0;

  bool operator==(const DeviceProfile&) const = default;
};

struct LatencyAnchor {
  std::string model;
  std::string device;
  double observed_ms = 0.0;
};

// One profile per device named in the anchors. Each anchor gives
// macs / (observed_ms - overhead); anchors on the same device are averaged.
// Known device classes come first in report order, others follow in order
// of appearance. Overheads default to zero.
std::vector<DeviceProfile> fit_device_profiles(
    const std::vector<LatencyAnchor>& anchors,
    const std::map<std::string, std::int64_t>& model_macs,
    const std::map<std::string, double>& overhead_ms = {});

double estimate_latency(std::int64_t macs, const DeviceProfile& profile);
double estimate_latency(const ModelGraph& graph, const DeviceProfile& profile);

// Throws ValidationError for a non-positive or non-finite throughput or a
// negative overhead.
void check_profile(const DeviceProfile& profile);

// Profile files hold one device per line,
//   name=<device>;throughput=<macs per ms>;overhead_ms=<ms>
// Lines starting with '#' are comments.
std::vector<DeviceProfile> parse_profiles(std::string_view text);
std::string format_profiles(const std::vector<DeviceProfile>& profiles,
                            const std::vector<std::string>& header = {});
std::vector<DeviceProfile> load_profiles(const std::filesystem::path& path);

// Anchor files hold one measurement per line,
//   model=<name>;device=<device>;latency_ms=<ms>
std::vector<LatencyAnchor> parse_anchors(std::string_view text);
std::vector<LatencyAnchor> load_anchors(const std::filesystem::path& path);

// Fits on the anchors of fit_model and writes header lines comparing the
// prediction for every other anchored model against its measurement.
std::string fit_report_profiles(const std::vector<LatencyAnchor>& anchors,
                                const std::map<std::string, std::int64_t>& model_macs,
                                const std::string& fit_model);

}  // namespace dredge

#endif  // DREDGE_PROFILER_HPP_
