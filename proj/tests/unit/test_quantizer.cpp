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

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dredge/error.hpp"
#include "dredge/model_io.hpp"
#include "dredge/quantizer.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace dredge {
namespace {

std::vector<Tensor> samples(const ModelGraph& g, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor> s;
  for (int i = 0; i < n; ++i) s.push_back(testing::random_input(rng, g.input_shape));
  return s;
}

TEST(Calibrate, CoversEveryTensor) {
  const ModelGraph g = testing::small_fire_net(1);
  const RangeMap r = calibrate(g, samples(g, 3, 2));
  const ShapeReport shapes = validate(g);
  for (const auto& [id, info] : shapes.tensors) {
    ASSERT_TRUE(r.tensors.count(id)) << id;
    EXPECT_EQ(r.tensors.at(id).count, 3u * static_cast<std::uint64_t>(info.shape.elements()));
    EXPECT_LE(r.tensors.at(id).min, r.tensors.at(id).max);
  }
  EXPECT_TRUE(r.internal.count(0));
}

TEST(Calibrate, ZeroSampleGivesZeroPostReluRanges) {
  const ModelGraph g = testing::small_cnn(3);
  std::vector<Tensor> zero = {Tensor(g.input_shape, DType::kF32)};
  ModelGraph zeroed = g;
  for (const char* slot : {"node000.bias"}) {
    for (float& v : zeroed.weights.at(slot).data<float>()) v = 0.0f;
  }
  const RangeMap r = calibrate(zeroed, zero);
  EXPECT_EQ(r.tensors.at(1).min, 0.0);
  EXPECT_EQ(r.tensors.at(1).max, 0.0);
  const ModelGraph q = quantize_graph(zeroed, r);
  EXPECT_EQ(q.nodes[0].output_qparams, (QuantParams{1.0f, 0}));
  const Tensor p = execute(q, zero[0]);
  double s = 0;
  for (float v : p.data<float>()) s += v;
  EXPECT_NEAR(s, 1.0, 1e-6);
}

TEST(Calibrate, TwoSamplesEqualMergeOfEach) {
  const ModelGraph g = testing::small_fire_net(4);
  const auto s = samples(g, 2, 5);
  const RangeMap both = calibrate(g, s);
  const RangeMap a = calibrate(g, std::span(s).first(1));
  const RangeMap b = calibrate(g, std::span(s).last(1));
  EXPECT_EQ(both, merge(a, b));
  EXPECT_EQ(both, merge(b, a));
}

TEST(Calibrate, OrderIndependent) {
  const ModelGraph g = testing::small_cnn(6);
  auto s = samples(g, 9, 7);
  const RangeMap base = calibrate(g, s);
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    for (std::size_t i = s.size(); i > 1; --i) std::swap(s[i - 1], s[rng.below(i)]);
    EXPECT_EQ(calibrate(g, s), base);
  }
}

TEST(QuantizeGraph, QparamsMatchHandApplication) {
  const ModelGraph g = testing::small_cnn(9);
  const RangeMap r = calibrate(g, samples(g, 4, 10));
  const ModelGraph q = quantize_graph(g, r);
  EXPECT_EQ(q.precision, Precision::kI8);
  EXPECT_EQ(q.input_qparams, qparams_from_range(0.0, 1.0, false));
  // conv output from its own observed range
  const auto& c = r.tensors.at(1);
  EXPECT_EQ(q.nodes[0].output_qparams, qparams_from_range(c.min, c.max, false));
  // conv weights symmetric over the observed weight range
  const auto w = g.weights.at("node000.weight").data<float>();
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  EXPECT_EQ(q.weights.at("node000.weight").qparams(), qparams_from_range(*lo, *hi, true));
  EXPECT_EQ(q.weights.at("node000.weight").qparams()->zero_point, 0);
  // bias at s_in * s_w
  const float s_acc = q.input_qparams->scale * q.weights.at("node000.weight").qparams()->scale;
  EXPECT_FLOAT_EQ(q.weights.at("node000.bias").qparams()->scale, s_acc);
  EXPECT_EQ(q.weights.at("node000.bias").dtype(), DType::kI32);
  // maxpool passes its input's qparams through
  EXPECT_EQ(q.nodes[1].output_qparams, q.nodes[0].output_qparams);
  // softmax stays f32
  EXPECT_FALSE(q.nodes.back().output_qparams.has_value());
}

TEST(QuantizeGraph, FireBranchesShareJointRange) {
  const ModelGraph g = testing::small_fire_net(11);
  const RangeMap r = calibrate(g, samples(g, 4, 12));
  const ModelGraph q = quantize_graph(g, r);
  // Observe each expand branch separately and take the union by hand.
  double lo = 0, hi = 0;
  for (const Tensor& x : samples(g, 4, 12)) {
    Executor ex(g);
    ex.run(x, [&](std::size_t i, const OpNode&, bool internal, const TensorView& v) {
      if (i != 0 || internal) return;
      for (float f : v.as<float>()) {
        lo = std::min<double>(lo, f);
        hi = std::max<double>(hi, f);
      }
    });
  }
  EXPECT_EQ(q.nodes[0].output_qparams, qparams_from_range(lo, hi, false));
  EXPECT_EQ(q.nodes[0].internal_qparams,
            qparams_from_range(r.internal.at(0).min, r.internal.at(0).max, false));
}

TEST(QuantizeGraph, AllZeroWeights) {
  ModelGraph g = testing::small_cnn(13);
  for (auto& [name, t] : g.weights) {
    for (float& v : t.data<float>()) v = 0.0f;
  }
  const auto s = samples(g, 2, 14);
  const ModelGraph q = quantize_graph(g, calibrate(g, s));
  EXPECT_EQ(q.weights.at("node000.weight").qparams(), (QuantParams{1.0f, 0}));
  const Tensor p = execute(q, s[0]);
  for (float v : p.data<float>()) EXPECT_NEAR(v, 0.2f, 1e-6);
}

TEST(QuantizeGraph, Errors) {
  const ModelGraph g = testing::small_cnn(15);
  RangeMap r = calibrate(g, samples(g, 2, 16));
  const ModelGraph q = quantize_graph(g, r);
  EXPECT_THROW(quantize_graph(q, r), ValidationError);
  RangeMap incomplete = r;
  incomplete.tensors.erase(2);
  EXPECT_THROW(quantize_graph(g, incomplete), ValidationError);
  RangeMap squeezed = r;
  squeezed.tensors[1] = {-1e-7, 1e-7, 1};
  try {
    quantize_graph(g, squeezed);
    FAIL() << "pathological multiplier accepted";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("tensor 0 -> tensor 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("node 0"), std::string::npos) << msg;
  }
}

TEST(QuantizeGraph, PayloadNearQuarter) {
  const ModelGraph g = testing::small_cnn(17);
  const ModelGraph q = quantize_graph(g, calibrate(g, samples(g, 2, 18)));
  const double ratio = static_cast<double>(weight_payload_bytes(q)) /
                       static_cast<double>(weight_payload_bytes(g));
  // Biases stay 4 bytes wide, so the ratio sits a little above a quarter.
  EXPECT_GE(ratio, 0.25);
  EXPECT_LE(ratio, 0.3);
}

TEST(Fidelity, SelfComparison) {
  const ModelGraph g = testing::small_fire_net(19);
  const auto s = samples(g, 6, 20);
  const ModelGraph q = quantize_graph(g, calibrate(g, s));
  const QuantReport self = fidelity_report(q, q, s);
  EXPECT_EQ(self.agreement, 1.0);
  EXPECT_EQ(self.max_logit_error, 0.0);
  EXPECT_EQ(self.max_unit_error(), 0);
  const QuantReport f = fidelity_report(g, q, s);
  EXPECT_EQ(f.samples, 6u);
  EXPECT_GE(f.agreement, 0.0);
  EXPECT_LE(f.agreement, 1.0);
  EXPECT_LT(f.candidate_bytes, f.reference_bytes);
  EXPECT_EQ(f.layer_max_unit_error.size(), g.nodes.size());
  EXPECT_THROW(fidelity_report(g, testing::small_cnn(1), s), ValidationError);
}

TEST(Fidelity, SingleDenseWithinOneOutputUnit) {
  // Weights, bias and inputs all sit on the int8 grids the quantizer will
  // pick, so the only rounding left is the output requantization.
  constexpr int k = 48;
  Rng rng(21);
  const double s_in = 1.0 / 255.0;
  const double s_w = 0.004;
  std::vector<float> w(static_cast<std::size_t>(k) * 5);
  for (float& v : w) v = static_cast<float>(testing::uniform_int(rng, -127, 127) * s_w);
  w[0] = static_cast<float>(127 * s_w);
  std::vector<float> b(5);
  for (float& v : b) v = static_cast<float>(testing::uniform_int(rng, -2000, 2000) * s_in * s_w);
  ModelGraph g;
  g.name = "single_dense";
  g.input_shape = {1, 1, 1, k};
  g.nodes.push_back({0, DenseAttrs{5, false}, {0}, 1});
  g.nodes.push_back({1, dr_softmax_attrs(), {1}, 2});
  g.weights["node000.weight"] = Tensor::f32({1, 1, k, 5}, w);
  g.weights["node000.bias"] = Tensor::f32({1, 1, 1, 5}, b);
  std::vector<Tensor> s;
  for (int i = 0; i < 16; ++i) {
    std::vector<float> x(k);
    for (float& v : x) v = static_cast<float>(testing::uniform_int(rng, 0, 255) * s_in);
    s.push_back(Tensor::f32({1, 1, 1, k}, x));
  }
  const ModelGraph q = quantize_graph(g, calibrate(g, s));
  const QuantReport rep = fidelity_report(g, q, s);
  const double s_out = q.nodes[0].output_qparams->scale;
  EXPECT_LE(rep.max_logit_error, s_out * (1.0 + 1e-5));
  EXPECT_LE(rep.layer_max_unit_error[0], 1);
}

}  // namespace
}  // namespace dredge
