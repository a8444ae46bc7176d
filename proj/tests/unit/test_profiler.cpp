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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dredge/builders.hpp"
#include "dredge/error.hpp"
#include "dredge/model_io.hpp"
#include "dredge/profiler.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace dredge {
namespace {

// conv (given attrs) on the given input, then gap -> dense -> softmax.
ModelGraph conv_graph(Shape input, const ConvAttrs& a, Shape w_shape) {
  ModelGraph g;
  g.name = "conv";
  g.input_shape = input;
  g.nodes.push_back({0, a, {0}, 1});
  g.nodes.push_back({1, GapAttrs{}, {1}, 2});
  g.nodes.push_back({2, DenseAttrs{5, false}, {2}, 3});
  g.nodes.push_back({3, dr_softmax_attrs(), {3}, 4});
  g.weights["node000.weight"] = Tensor(w_shape, DType::kF32);
  g.weights["node000.bias"] = Tensor(Shape{1, 1, 1, a.out_channels}, DType::kF32);
  g.weights["node002.weight"] = Tensor(Shape{1, 1, a.out_channels, 5}, DType::kF32);
  g.weights["node002.bias"] = Tensor(Shape{1, 1, 1, 5}, DType::kF32);
  return g;
}

TEST(CountMacs, Examples) {
  ConvAttrs c;
  c.kernel_h = c.kernel_w = 3;
  c.out_channels = 16;
  const MacReport r = count_macs(conv_graph({1, 12, 12, 8}, c, {3, 3, 8, 16}));
  EXPECT_EQ(r.node_macs[0], 115200);
  EXPECT_EQ(r.node_macs[1], 0);   // gap
  EXPECT_EQ(r.node_macs[2], 80);  // dense 16 -> 5
  EXPECT_EQ(r.node_macs[3], 0);
  EXPECT_EQ(r.total, 115200 + 80);
  EXPECT_EQ(r.node_output_bytes[0], 10u * 10u * 16u * 4u);

  ConvAttrs dw = depthwise_attrs(8, 1, 1);
  EXPECT_EQ(count_macs(conv_graph({1, 10, 10, 8}, dw, {3, 3, 1, 8})).node_macs[0], 7200);

  ModelGraph d;
  d.name = "dense";
  d.input_shape = {1, 1, 1, 100};
  d.nodes.push_back({0, DenseAttrs{5, false}, {0}, 1});
  d.nodes.push_back({1, dr_softmax_attrs(), {1}, 2});
  d.weights["node000.weight"] = Tensor(Shape{1, 1, 100, 5}, DType::kF32);
  d.weights["node000.bias"] = Tensor(Shape{1, 1, 1, 5}, DType::kF32);
  EXPECT_EQ(count_macs(d).total, 500);
}

TEST(CountMacs, TotalIsSumForBuilders) {
  for (const ModelGraph& g : {build_shufflenet(), build_squeezenet()}) {
    const MacReport r = count_macs(g);
    std::int64_t sum = 0;
    for (auto m : r.node_macs) {
      EXPECT_GE(m, 0);
      sum += m;
    }
    EXPECT_EQ(sum, r.total);
  }
}

TEST(PlanMemory, Invariants) {
  for (const ModelGraph& g : {testing::small_fire_net(1), build_shufflenet(), build_squeezenet()}) {
    const MemoryPlan p = plan_memory(g);
    const auto life = p.lifetimes();
    std::vector<std::size_t> offsets;
    std::size_t total = 0;
    for (const auto& b : p.buffers) {
      offsets.push_back(b.offset);
      total += b.size;
    }
    EXPECT_TRUE(testing::overlap_free(life, offsets)) << g.name;
    EXPECT_GE(p.arena_bytes, testing::peak_live(life)) << g.name;
    EXPECT_LE(p.arena_bytes, total) << g.name;
    EXPECT_EQ(p.rom_bytes, serialized_size(g));
  }
}

TEST(PlanMemory, FireKeepsSqueezeAndOutputLive) {
  const ModelGraph g = testing::small_fire_net(2);
  const MemoryPlan p = plan_memory(g);
  const auto& sq = p.find({BufferKey::Kind::kScratch, 0});
  const auto& out = p.find({BufferKey::Kind::kTensor, 1});
  const auto& in = p.find({BufferKey::Kind::kTensor, 0});
  EXPECT_GE(p.arena_bytes, sq.size + out.size + in.size);
}

TEST(EstimateRom, EqualsFileLength) {
  testing::TempDir dir("rom");
  const ModelGraph g = build_shufflenet();
  save_model(g, dir / "s.edrm");
  EXPECT_EQ(estimate_rom(g), std::filesystem::file_size(dir / "s.edrm"));
}

TEST(Latency, Examples) {
  const DeviceProfile p{"dev", 1e4, 0.0};
  EXPECT_DOUBLE_EQ(estimate_latency(1'000'000, p), 100.0);
  EXPECT_DOUBLE_EQ(estimate_latency(0, DeviceProfile{"dev", 5.0, 2.5}), 2.5);
  EXPECT_THROW(check_profile({"bad", 0.0, 0.0}), ValidationError);
  EXPECT_THROW(check_profile({"bad", 1.0, -1.0}), ValidationError);
}

TEST(FitProfiles, SingleAnchorIsQuotient) {
  const std::map<std::string, std::int64_t> macs = {{"m", 567'000'000}};
  const auto p = fit_device_profiles({{"m", "GPU", 19.0}}, macs);
  ASSERT_EQ(p.size(), 1u);
  EXPECT_EQ(p[0].name, "GPU");
  EXPECT_DOUBLE_EQ(p[0].throughput, 567'000'000 / 19.0);
  const auto twice = fit_device_profiles({{"m", "GPU", 19.0}, {"m", "GPU", 19.0}}, macs);
  EXPECT_EQ(twice, p);
  EXPECT_THROW(fit_device_profiles({{"m", "GPU", 2.0}}, macs, {{"GPU", 2.0}}), ValidationError);
  EXPECT_THROW(fit_device_profiles({{"x", "GPU", 2.0}}, macs), ValidationError);
}

TEST(FitProfiles, ReportOrder) {
  const std::map<std::string, std::int64_t> macs = {{"m", 1000}};
  const auto p = fit_device_profiles(
      {{"m", "GPU", 1}, {"m", "Toaster", 9}, {"m", "Low-end MCU", 100}, {"m", "CPU", 2}}, macs);
  ASSERT_EQ(p.size(), 4u);
  EXPECT_EQ(p[0].name, "Low-end MCU");
  EXPECT_EQ(p[1].name, "CPU");
  EXPECT_EQ(p[2].name, "GPU");
  EXPECT_EQ(p[3].name, "Toaster");
}

TEST(ProfileFiles, RoundTripAndErrors) {
  const std::vector<DeviceProfile> p = {{"Low-end MCU", 3617.25, 0.0}, {"GPU", 2.5e7, 1.5}};
  const std::string text = format_profiles(p, {"header line"});
  EXPECT_EQ(text.rfind("# header line", 0), 0u);
  EXPECT_EQ(parse_profiles(text), p);
  EXPECT_THROW(parse_profiles("name=x;throughput=abc;overhead_ms=0\n"), FormatError);
  EXPECT_THROW(parse_profiles("name=x;speed=1;overhead_ms=0\n"), FormatError);
  EXPECT_THROW(parse_profiles("# nothing\n"), FormatError);
  EXPECT_THROW(parse_profiles("name=x;throughput=-1;overhead_ms=0\n"), FormatError);
  const auto a = parse_anchors("# c\nmodel=m;device=GPU;latency_ms=19\n");
  ASSERT_EQ(a.size(), 1u);
  EXPECT_EQ(a[0].device, "GPU");
  EXPECT_EQ(a[0].observed_ms, 19.0);
  EXPECT_THROW(load_profiles("/nonexistent.profile"), IoError);
}

TEST(ProfileFiles, ShippedProfileIsOrdered) {
  const auto p = load_profiles(DREDGE_PROFILE_DIR "/devices.profile");
  ASSERT_EQ(p.size(), kDeviceClasses.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    EXPECT_EQ(p[i].name, kDeviceClasses[i]);
    if (i) EXPECT_GT(p[i].throughput, p[i - 1].throughput);
  }
}

}  // namespace
}  // namespace dredge
