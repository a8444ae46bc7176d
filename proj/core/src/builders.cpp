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

#include "dredge/builders.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "dredge/error.hpp"

namespace dredge {

namespace {

// Appends nodes to a single-input chain, drawing weights as it goes.
class ChainBuilder {
 public:
  ChainBuilder(std::string name, std::uint64_t seed) : rng_(seed) {
    graph_.name = std::move(name);
    shape_ = graph_.input_shape;
  }

  const Shape& shape() const { return shape_; }

  // BN parameters chosen so a folded layer keeps unit-ish activation scale
  // under the uniform init: var = fan_in * E[w^2].
  void conv(const ConvAttrs& attrs, bool batch_norm) {
    const Shape out = conv2d_output_shape(shape_, {}, attrs);
    const Shape wshape{attrs.kernel_h, attrs.kernel_w, shape_.c / attrs.groups,
                       attrs.out_channels};
    Tensor w = random_weights(wshape);
    Tensor b = zero_bias(attrs.out_channels);
    if (batch_norm) {
      FoldedWeights f = fold_batchnorm(w, b, init_bn(wshape));
      w = std::move(f.weights);
      b = std::move(f.bias);
    }
    const std::uint32_t id = add(attrs, out);
    put(id, "weight", std::move(w));
    put(id, "bias", std::move(b));
  }

  void dwsep(int out_channels, int stride) {
    const DepthwiseSeparableAttrs attrs{stride, stride, out_channels};
    const Shape mid = depthwise_separable_mid_shape(shape_, attrs);
    const Shape dw_shape{3, 3, 1, shape_.c};
    const Shape pw_shape{1, 1, shape_.c, out_channels};
    Tensor dw = random_weights(dw_shape);
    Tensor pw = random_weights(pw_shape);
    DepthwiseSeparableWeights f =
        fold_depthwise_separable(dw, pw, init_bn(dw_shape), init_bn(pw_shape));
    const std::uint32_t id =
        add(attrs, Shape{mid.n, mid.h, mid.w, out_channels});
    put(id, "dw_weight", std::move(f.dw_weights));
    put(id, "dw_bias", std::move(f.dw_bias));
    put(id, "pw_weight", std::move(f.pw_weights));
    put(id, "pw_bias", std::move(f.pw_bias));
  }

  void shuffle(int groups) {
    if (groups < 1 || shape_.c % groups != 0) {
      throw ValidationError("channel shuffle: " + std::to_string(shape_.c) +
                            " channels not divisible by " +
                            std::to_string(groups) + " groups");
    }
    add(ShuffleAttrs{groups}, shape_);
  }

  void fire(const FireAttrs& attrs) {
    const std::int64_t cin = shape_.c;
    const std::uint32_t id =
        add(attrs, Shape{shape_.n, shape_.h, shape_.w, attrs.out_channels()});
    put(id, "squeeze_weight",
        random_weights({1, 1, cin, attrs.squeeze_channels}));
    put(id, "squeeze_bias", zero_bias(attrs.squeeze_channels));
    put(id, "expand1_weight",
        random_weights({1, 1, attrs.squeeze_channels, attrs.expand1_channels}));
    put(id, "expand1_bias", zero_bias(attrs.expand1_channels));
    put(id, "expand3_weight",
        random_weights({3, 3, attrs.squeeze_channels, attrs.expand3_channels}));
    put(id, "expand3_bias", zero_bias(attrs.expand3_channels));
  }

  void maxpool(const PoolAttrs& attrs) {
    add(attrs, pool_output_shape(shape_, attrs));
  }

  void gap() { add(GapAttrs{}, Shape{shape_.n, 1, 1, shape_.c}); }

  void flatten() {
    add(FlattenAttrs{}, Shape{shape_.n, 1, 1, shape_.h * shape_.w * shape_.c});
  }

  void dense(int out_features, bool fused_relu) {
    const std::int64_t k = shape_.c;
    const std::uint32_t id =
        add(DenseAttrs{out_features, fused_relu}, Shape{shape_.n, 1, 1, out_features});
    put(id, "weight", random_weights({1, 1, k, out_features}));
    put(id, "bias", zero_bias(out_features));
  }

  ModelGraph finish() {
    add(dr_softmax_attrs(), shape_);
    validate(graph_);
    return std::move(graph_);
  }

 private:
  std::uint32_t add(NodeAttrs attrs, const Shape& out) {
    const auto id = static_cast<std::uint32_t>(graph_.nodes.size());
    OpNode node;
    node.id = id;
    node.attrs = std::move(attrs);
    node.inputs = {current_};
    node.output = id + 1;
    graph_.nodes.push_back(std::move(node));
    current_ = id + 1;
    shape_ = out;
    return id;
  }

  void put(std::uint32_t id, std::string_view slot, Tensor t) {
    graph_.weights.emplace(ModelGraph::weight_name(id, slot), std::move(t));
  }

  Tensor random_weights(const Shape& shape) {
    std::vector<float> v(static_cast<std::size_t>(shape.elements()));
    for (float& x : v) {
      x = static_cast<float>(rng_.uniform(-kInitRange, kInitRange));
    }
    return Tensor::f32(shape, std::move(v));
  }

  static Tensor zero_bias(int channels) {
    return Tensor::f32({1, 1, 1, channels},
                       std::vector<float>(static_cast<std::size_t>(channels)));
  }

  static BatchNormParams init_bn(const Shape& wshape) {
    const auto c = static_cast<int>(wshape.c);
    BatchNormParams bn = BatchNormParams::identity(c);
    const double fan_in = static_cast<double>(wshape.n * wshape.h * wshape.w);
    const double second_moment = kInitRange * kInitRange / 3.0;
    bn.moving_var.assign(static_cast<std::size_t>(c),
                         static_cast<float>(fan_in * second_moment));
    bn.epsilon = 1e-3f;
    return bn;
  }

  ModelGraph graph_;
  Rng rng_;
  Shape shape_;
  TensorId current_ = kInputTensor;
};

int scaled(int channels, double multiplier) {
  return std::max(1, static_cast<int>(channels * multiplier));
}

void require_divisible(std::int64_t channels, int groups, const std::string& what) {
  if (channels % groups != 0) {
    throw ValidationError(what + " (" + std::to_string(channels) +
                          " channels) not divisible by groups = " +
                          std::to_string(groups));
  }
}

}  // namespace

ModelGraph build_mobilenet(const MobileNetConfig& config) {
  const double a = config.width_multiplier;
  if (a != 0.25 && a != 0.5 && a != 0.75 && a != 1.0) {
    throw ValidationError("mobilenet: width multiplier must be one of 0.25, "
                          "0.5, 0.75, 1.0 (got " + std::to_string(a) + ")");
  }
  if (config.blocks.empty()) throw ValidationError("mobilenet: no blocks");
  ChainBuilder b("mobilenet", config.seed);
  ConvAttrs stem;
  stem.kernel_h = stem.kernel_w = 3;
  stem.stride_h = stem.stride_w = 2;
  stem.padding = Padding::kSame;
  stem.out_channels = scaled(config.stem_channels, a);
  stem.fused_relu = true;
  b.conv(stem, true);
  for (const MobileNetBlock& blk : config.blocks) {
    b.dwsep(scaled(blk.out_channels, a), blk.stride);
  }
  b.gap();
  b.dense(kNumClasses, false);
  return b.finish();
}

ModelGraph build_shufflenet(const ShuffleNetConfig& config) {
  const int g = config.groups;
  if (g < 1) throw ValidationError("shufflenet: groups must be positive");
  if (!(config.width_multiplier > 0.0)) {
    throw ValidationError("shufflenet: width multiplier must be positive");
  }
  if (config.stage_channels.size() != config.stage_repeats.size() ||
      config.stage_channels.empty()) {
    throw ValidationError("shufflenet: stage channel and repeat lists differ");
  }
  if (config.bottleneck_ratio < 1) {
    throw ValidationError("shufflenet: bottleneck ratio must be positive");
  }
  const int stem_channels = config.stem_channels;
  require_divisible(stem_channels, g, "shufflenet: stem output");
  for (std::size_t s = 0; s < config.stage_channels.size(); ++s) {
    const int out = scaled(config.stage_channels[s], config.width_multiplier);
    const std::string stage = "shufflenet: stage " + std::to_string(s);
    require_divisible(out, g, stage + " output");
    if (out % config.bottleneck_ratio != 0) {
      throw ValidationError(stage + " output (" + std::to_string(out) +
                            ") not divisible by the bottleneck ratio");
    }
    require_divisible(out / config.bottleneck_ratio, g, stage + " bottleneck");
    if (config.stage_repeats[s] < 1) {
      throw ValidationError(stage + " needs at least one block");
    }
  }

  ChainBuilder b("shufflenet", config.seed);
  ConvAttrs stem;
  stem.kernel_h = stem.kernel_w = 3;
  stem.stride_h = stem.stride_w = config.stem_stride;
  stem.padding = Padding::kSame;
  stem.out_channels = stem_channels;
  stem.fused_relu = true;
  b.conv(stem, true);
  b.maxpool(PoolAttrs{3, 3, 2, 2});
  for (std::size_t s = 0; s < config.stage_channels.size(); ++s) {
    const int out = scaled(config.stage_channels[s], config.width_multiplier);
    const int mid = out / config.bottleneck_ratio;
    for (int r = 0; r < config.stage_repeats[s]; ++r) {
      const int stride = r == 0 ? 2 : 1;
      b.conv(pointwise_attrs(mid, g, true), true);
      b.shuffle(g);
      ConvAttrs dw = depthwise_attrs(mid, stride, stride);
      dw.fused_relu = false;
      b.conv(dw, true);
      b.conv(pointwise_attrs(out, g, true), true);
    }
  }
  b.gap();
  b.dense(kNumClasses, false);
  return b.finish();
}

ModelGraph build_squeezenet(const SqueezeNetConfig& config) {
  if (config.fires.empty()) throw ValidationError("squeezenet: no fire modules");
  ChainBuilder b("squeezenet", config.seed);
  ConvAttrs stem;
  stem.kernel_h = stem.kernel_w = 3;
  stem.stride_h = stem.stride_w = config.stem_stride;
  stem.padding = Padding::kSame;
  stem.out_channels = config.stem_channels;
  stem.fused_relu = true;
  b.conv(stem, false);
  b.maxpool(PoolAttrs{3, 3, 2, 2});
  for (std::size_t i = 0; i < config.fires.size(); ++i) {
    b.fire(config.fires[i]);
    for (const int p : config.pool_after) {
      if (p == static_cast<int>(i)) b.maxpool(PoolAttrs{3, 3, 2, 2});
    }
  }
  ConvAttrs head = pointwise_attrs(kNumClasses, 1, false);
  b.conv(head, false);
  b.gap();
  return b.finish();
}

ModelGraph build_custom_dnn(const CustomDnnConfig& config) {
  if (config.filters.empty()) throw ValidationError("custom dnn: empty filter list");
  if (config.dense_units < 1) {
    throw ValidationError("custom dnn: dense units must be positive");
  }
  ChainBuilder b("customdnn", config.seed);
  for (std::size_t i = 0; i < config.filters.size(); ++i) {
    const CustomConvSpec& f = config.filters[i];
    const std::string layer = "custom dnn: layer " + std::to_string(i);
    const Shape& s = b.shape();
    if (f.kernel < 1 || f.out_channels < 1) {
      throw ValidationError(layer + " has a non-positive kernel or width");
    }
    if (s.h < f.kernel || s.w < f.kernel) {
      throw ValidationError(layer + ": " + std::to_string(f.kernel) + "x" +
                            std::to_string(f.kernel) + " kernel exceeds " +
                            std::to_string(s.h) + "x" + std::to_string(s.w) +
                            " input");
    }
    if (s.h - f.kernel + 1 < 2 || s.w - f.kernel + 1 < 2) {
      throw ValidationError(layer + ": 2x2 pooling would shrink " +
                            std::to_string(s.h - f.kernel + 1) +
                            " pixels below 1x1");
    }
    ConvAttrs conv;
    conv.kernel_h = conv.kernel_w = f.kernel;
    conv.out_channels = f.out_channels;
    conv.fused_relu = true;
    b.conv(conv, false);
    b.maxpool(PoolAttrs{2, 2, 2, 2});
  }
  b.flatten();
  b.dense(config.dense_units, true);
  b.dense(kNumClasses, false);
  return b.finish();
}

}  // namespace dredge
