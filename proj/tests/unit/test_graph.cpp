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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "dredge/error.hpp"
#include "dredge/graph.hpp"
#include "dredge/quantizer.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace dredge {
namespace {

// dense 3 -> 4 (relu) -> dense 4 -> 5 -> softmax on a 1x1x1x3 input.
ModelGraph two_layer(const std::vector<float>& w1, const std::vector<float>& b1,
                     const std::vector<float>& w2, const std::vector<float>& b2) {
  ModelGraph g;
  g.name = "two_layer";
  g.input_shape = {1, 1, 1, 3};
  g.nodes.push_back({0, DenseAttrs{4, true}, {0}, 1});
  g.nodes.push_back({1, DenseAttrs{5, false}, {1}, 2});
  g.nodes.push_back({2, dr_softmax_attrs(), {2}, 3});
  g.weights["node000.weight"] = Tensor::f32({1, 1, 3, 4}, w1);
  g.weights["node000.bias"] = Tensor::f32({1, 1, 1, 4}, b1);
  g.weights["node001.weight"] = Tensor::f32({1, 1, 4, 5}, w2);
  g.weights["node001.bias"] = Tensor::f32({1, 1, 1, 5}, b2);
  return g;
}

TEST(Labels, FixedOrder) {
  EXPECT_EQ(label_name(DRLabel::kNoDR), "NoDR");
  EXPECT_EQ(label_name(DRLabel::kProliferative), "Proliferative");
  for (int i = 0; i < kNumClasses; ++i) {
    EXPECT_EQ(static_cast<int>(all_labels()[static_cast<std::size_t>(i)]), i);
    EXPECT_EQ(label_from_name(label_name(static_cast<DRLabel>(i))), static_cast<DRLabel>(i));
  }
  EXPECT_FALSE(label_from_name("Unknown").has_value());
}

TEST(Execute, TwoLayerMatchesHandComputation) {
  const std::vector<float> w1 = {0.5f, -1.0f, 0.25f, 2.0f,   // row for x0
                                 1.0f, 0.5f, -0.5f, 0.0f,    // x1
                                 -0.25f, 1.5f, 1.0f, -1.0f};  // x2
  const std::vector<float> b1 = {0.1f, -0.2f, 0.0f, 0.3f};
  const std::vector<float> w2 = {1, 0, 0, 0, 1, 0, 1, 0, 0, -1, 0, 0, 1, 0.5f, 0,
                                 0, 0, 0, 1, 2};
  const std::vector<float> b2 = {0, 0.1f, 0.2f, 0.3f, 0.4f};
  const ModelGraph g = two_layer(w1, b1, w2, b2);
  const std::vector<double> x = {1.0, 2.0, -1.0};
  // Layer 1 by hand.
  double h[4];
  for (int j = 0; j < 4; ++j) {
    double a = b1[static_cast<std::size_t>(j)];
    for (int i = 0; i < 3; ++i) a += x[static_cast<std::size_t>(i)] * w1[static_cast<std::size_t>(i * 4 + j)];
    h[j] = a > 0 ? a : 0;
  }
  // h = (2.85, -0.2 -> 0, 0, 4.3): check one value explicitly.
  EXPECT_NEAR(h[0], 0.1 + 0.5 + 2.0 + 0.25, 1e-7);  // b1 holds 0.1f
  double z[5];
  double sum = 0;
  for (int k = 0; k < 5; ++k) {
    double a = b2[static_cast<std::size_t>(k)];
    for (int j = 0; j < 4; ++j) a += h[j] * w2[static_cast<std::size_t>(j * 5 + k)];
    z[k] = a;
  }
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  for (double& v : z) sum += (v = std::exp(v - m));
  const Tensor out = execute(g, Tensor::f32({1, 1, 1, 3}, {1.0f, 2.0f, -1.0f}));
  for (int k = 0; k < 5; ++k) EXPECT_NEAR(out.data<float>()[static_cast<std::size_t>(k)], z[k] / sum, 1e-5);
}

TEST(Validate, DenseMismatchNamesNode) {
  ModelGraph g = two_layer(std::vector<float>(12), std::vector<float>(4),
                           std::vector<float>(20), std::vector<float>(5));
  g.weights["node001.weight"] = Tensor::f32({1, 1, 6, 5}, std::vector<float>(30));
  try {
    validate(g);
    FAIL() << "mismatch accepted";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("node 1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("dense"), std::string::npos) << msg;
  }
}

TEST(Validate, StructuralErrors) {
  ModelGraph g = testing::small_cnn(1);
  EXPECT_NO_THROW(validate(g));
  ModelGraph dangling = g;
  dangling.nodes[1].inputs = {42};
  EXPECT_THROW(validate(dangling), ValidationError);
  ModelGraph no_softmax = g;
  no_softmax.nodes.pop_back();
  EXPECT_THROW(validate(no_softmax), ValidationError);
  ModelGraph missing = g;
  missing.weights.erase("node000.bias");
  EXPECT_THROW(validate(missing), ValidationError);
  ModelGraph bad_labels = g;
  std::get<SoftmaxAttrs>(bad_labels.nodes.back().attrs).labels[0] = "Healthy";
  EXPECT_THROW(validate(bad_labels), ValidationError);
  ModelGraph f32_with_qp = g;
  f32_with_qp.nodes[0].output_qparams = QuantParams{};
  EXPECT_THROW(validate(f32_with_qp), ValidationError);
}

TEST(Execute, ProbabilitiesAndDeterminism) {
  const ModelGraph g = testing::small_fire_net(3);
  Rng rng(4);
  Executor ex(g);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = testing::random_input(rng, g.input_shape);
    const Tensor p = ex.run(x);
    double s = 0;
    for (float v : p.data<float>()) {
      EXPECT_GE(v, 0.0f);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
    EXPECT_EQ(p, execute(g, x));
  }
  EXPECT_THROW(ex.run(testing::random_input(rng, {1, 9, 8, 3})), ValidationError);
}

ModelGraph quantized(const ModelGraph& g, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Tensor> samples;
  for (int i = 0; i < 8; ++i) samples.push_back(testing::random_input(rng, g.input_shape));
  return quantize_graph(g, calibrate(g, samples));
}

TEST(Execute, QuantizedInputIdempotence) {
  const ModelGraph g = testing::small_cnn(5);
  const ModelGraph q = quantized(g, 6);
  Rng rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = testing::random_input(rng, g.input_shape);
    const Tensor requant = dequantize(quantize(x, *q.input_qparams));
    EXPECT_EQ(execute(q, x), execute(q, requant));
    EXPECT_EQ(execute(q, x), execute(q, quantize(x, *q.input_qparams)));
  }
}

TEST(Execute, QuantizedGraphEqualsKernelComposition) {
  for (const ModelGraph& g : {testing::small_cnn(8), testing::small_fire_net(9)}) {
    const ModelGraph q = quantized(g, 10);
    Rng rng(11);
    const Tensor x = testing::random_input(rng, g.input_shape);
    std::vector<Tensor> seen;
    Executor ex(q);
    const Tensor probs = ex.run(x, [&](std::size_t, const OpNode&, bool internal, const TensorView& v) {
      if (!internal) seen.push_back(to_tensor(v));
    });
    // Re-run node by node with the allocating kernels.
    Tensor cur = quantize(x, *q.input_qparams);
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
      const OpNode& n = q.nodes[i];
      auto w = [&](const char* slot) -> const Tensor& { return q.weight(n.id, slot); };
      switch (n.kind()) {
        case OpKind::kConv2D:
          cur = conv2d(cur, w("weight"), w("bias"), std::get<ConvAttrs>(n.attrs), n.output_qparams);
          break;
        case OpKind::kFire:
          cur = fire(cur,
                     FireWeights{w("squeeze_weight"), w("squeeze_bias"), w("expand1_weight"),
                                 w("expand1_bias"), w("expand3_weight"), w("expand3_bias")},
                     std::get<FireAttrs>(n.attrs), n.internal_qparams, n.output_qparams);
          break;
        case OpKind::kMaxPool:
          cur = maxpool2d(cur, std::get<PoolAttrs>(n.attrs));
          break;
        case OpKind::kGlobalAvgPool:
          cur = global_avg_pool(cur, n.output_qparams);
          break;
        case OpKind::kDense:
          cur = dense(cur, w("weight"), w("bias"), std::get<DenseAttrs>(n.attrs).fused_relu,
                      n.output_qparams);
          break;
        case OpKind::kSoftmax:
          cur = softmax(cur);
          break;
        default:
          FAIL() << "unexpected node kind";
      }
      ASSERT_EQ(cur, seen[i]) << "node " << i;
    }
    EXPECT_EQ(cur, probs);
  }
}

TEST(Classify, ArgmaxAndTies) {
  const std::vector<float> p = {0.1f, 0.2f, 0.4f, 0.2f, 0.1f};
  EXPECT_EQ(argmax_label(p), DRLabel::kModerate);
  const std::vector<float> u(5, 0.2f);
  EXPECT_EQ(argmax_label(u), DRLabel::kNoDR);
  EXPECT_THROW(argmax_label(std::vector<float>(4, 0.25f)), ValidationError);
}

TEST(Classify, InvariantUnderMonotoneLogitRescale) {
  // Scaling the last dense layer by a positive factor rescales the logits
  // monotonically, so the label must not move.
  const ModelGraph g = testing::small_cnn(12);
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor x = testing::random_input(rng, g.input_shape);
    ModelGraph scaled = g;
    const double f = rng.uniform(0.1, 10.0);
    for (const char* slot : {"node003.weight", "node003.bias"}) {
      for (float& v : scaled.weights.at(slot).data<float>()) v = static_cast<float>(v * f);
    }
    EXPECT_EQ(classify(g, x).label, classify(scaled, x).label);
  }
}

TEST(PlanActivations, ExecutorPlanIsSound) {
  const ModelGraph g = testing::small_fire_net(14);
  const ShapeReport shapes = validate(g);
  const MemoryPlan plan = plan_activations(g, shapes);
  const auto life = plan.lifetimes();
  std::vector<std::size_t> offsets;
  for (const auto& b : plan.buffers) {
    offsets.push_back(b.offset);
    EXPECT_EQ(b.offset % kArenaAlignment, 0u);
    EXPECT_EQ(b.size % kArenaAlignment, 0u);
  }
  EXPECT_TRUE(testing::overlap_free(life, offsets));
  EXPECT_GE(plan.arena_bytes, testing::peak_live(life));
  // The fire scratch lives alongside the module's input and output.
  const auto& sq = plan.find({BufferKey::Kind::kScratch, 0});
  const auto& out = plan.find({BufferKey::Kind::kTensor, 1});
  EXPECT_TRUE((BufferLifetime{sq.size, sq.first_use, sq.last_use})
                  .overlaps({out.size, out.first_use, out.last_use}));
}

}  // namespace
}  // namespace dredge
