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

// Layer kernels. Every kernel has an f32 reference path and an i8 path that
// accumulates in int32 and requantizes with a fixed-point multiplier.
//
// Layout conventions:
//   activations      N x H x W x C
//   conv weights     KH x KW x (C_in / groups) x C_out   (stored in a Shape
//                    as n=KH, h=KW, w=C_in/groups, c=C_out)
//   dense weights    1 x 1 x K x M
//   bias             1 x 1 x 1 x C_out (f32, or i32 at scale s_in * s_w)
//
// The view overloads write into caller-provided memory and are what the
// graph executor calls; the Tensor overloads allocate their result.

#ifndef DREDGE_OPS_HPP_
#define DREDGE_OPS_HPP_

#include <cstdint>
#include <optional>
#include <vector>

#include "dredge/tensor.hpp"

namespace dredge {

enum class Padding : std::uint8_t {
  kValid = 0,
  // Symmetric padding; when the total is odd the extra pixel goes on the
  // bottom / right.
  kSame = 1,
};

struct ConvAttrs {
  int kernel_h = 1;
  int kernel_w = 1;
  int stride_h = 1;
  int stride_w = 1;
  Padding padding = Padding::kValid;
  int groups = 1;
  int out_channels = 1;
  bool fused_relu = false;

  bool operator==(const ConvAttrs&) const = default;
};

struct FireAttrs {
  int squeeze_channels = 1;
  int expand1_channels = 1;
  int expand3_channels = 1;

  int out_channels() const { return expand1_channels + expand3_channels; }
  bool operator==(const FireAttrs&) const = default;
};

struct PoolAttrs {
  int window_h = 2;
  int window_w = 2;
  int stride_h = 2;
  int stride_w = 2;

  bool operator==(const PoolAttrs&) const = default;
};

struct DepthwiseSeparableAttrs {
  int stride_h = 1;
  int stride_w = 1;
  int out_channels = 1;

  bool operator==(const DepthwiseSeparableAttrs&) const = default;
};

struct BatchNormParams {
  std::vector<float> gamma;
  std::vector<float> beta;
  std::vector<float> moving_mean;
  std::vector<float> moving_var;
  float epsilon = 1e-3f;

  static BatchNormParams identity(int channels);
};

// Output extent along one axis plus the leading pad.
struct AxisExtent {
  std::int64_t out = 0;
  std::int64_t pad_before = 0;
};

AxisExtent conv_axis_extent(std::int64_t in, int kernel, int stride,
                            Padding padding, const char* axis);

Shape conv2d_output_shape(const Shape& input, const Shape& weights,
                          const ConvAttrs& attrs);
Shape pool_output_shape(const Shape& input, const PoolAttrs& attrs);

// Attribute sets of the two convolutions inside a depthwise separable block.
ConvAttrs depthwise_attrs(int channels, int stride_h, int stride_w);
ConvAttrs pointwise_attrs(int out_channels, int groups = 1,
                          bool fused_relu = true);

// --- conv2d ----------------------------------------------------------------

// Writes attrs.out_channels channels into `out` starting at channel_offset,
// so two convolutions can fill one concatenated output.
void conv2d(const TensorView& input, const TensorView& weights,
            const TensorView& bias, const ConvAttrs& attrs,
            const MutableTensorView& out, std::int64_t channel_offset = 0);

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              const ConvAttrs& attrs,
              std::optional<QuantParams> out_qparams = std::nullopt);

// --- depthwise separable block ------------------------------------------------

struct DepthwiseSeparableWeightViews {
  TensorView dw_weights;
  TensorView dw_bias;
  TensorView pw_weights;
  TensorView pw_bias;
};

struct DepthwiseSeparableWeights {
  Tensor dw_weights;
  Tensor dw_bias;
  Tensor pw_weights;
  Tensor pw_bias;

  DepthwiseSeparableWeightViews views() const {
    return {dw_weights.view(), dw_bias.view(), pw_weights.view(),
            pw_bias.view()};
  }
};

// Folds both batch norms into their convolutions (which have no bias of
// their own beforehand).
DepthwiseSeparableWeights fold_depthwise_separable(
    const Tensor& dw_weights, const Tensor& pw_weights,
    const BatchNormParams& bn_dw, const BatchNormParams& bn_pw);

// depthwise 3x3 (same) -> ReLU -> pointwise 1x1 -> ReLU.
void depthwise_separable_block(const TensorView& input,
                               const DepthwiseSeparableWeightViews& weights,
                               const DepthwiseSeparableAttrs& attrs,
                               const MutableTensorView& mid_scratch,
                               const MutableTensorView& out);

Tensor depthwise_separable_block(
    const Tensor& input, const DepthwiseSeparableWeights& weights,
    const DepthwiseSeparableAttrs& attrs,
    std::optional<QuantParams> mid_qparams = std::nullopt,
    std::optional<QuantParams> out_qparams = std::nullopt);

// f32 convenience form: folds the batch norms, then runs the block.
Tensor depthwise_separable_block(const Tensor& input, const Tensor& dw_weights,
                                 const Tensor& pw_weights,
                                 const BatchNormParams& bn_dw,
                                 const BatchNormParams& bn_pw,
                                 int stride = 1);

Shape depthwise_separable_mid_shape(const Shape& input,
                                    const DepthwiseSeparableAttrs& attrs);

// --- channel shuffle ---------------------------------------------------------

// out[j] = in[(j mod g) * (C / g) + j div g]
void channel_shuffle(const TensorView& input, int groups,
                     const MutableTensorView& out);
Tensor channel_shuffle(const Tensor& input, int groups);

// --- fire --------------------------------------------------------------------

struct FireWeightViews {
  TensorView squeeze_weights;
  TensorView squeeze_bias;
  TensorView expand1_weights;
  TensorView expand1_bias;
  TensorView expand3_weights;
  TensorView expand3_bias;
};

struct FireWeights {
  Tensor squeeze_weights;
  Tensor squeeze_bias;
  Tensor expand1_weights;
  Tensor expand1_bias;
  Tensor expand3_weights;
  Tensor expand3_bias;

  FireWeightViews views() const {
    return {squeeze_weights.view(), squeeze_bias.view(),
            expand1_weights.view(), expand1_bias.view(),
            expand3_weights.view(), expand3_bias.view()};
  }
};

Shape fire_squeeze_shape(const Shape& input, const FireAttrs& attrs);

// ReLU(squeeze 1x1) feeding ReLU(expand 1x1) and ReLU(expand 3x3, same),
// concatenated along channels. Both expand branches share out's qparams.
void fire(const TensorView& input, const FireWeightViews& weights,
          const FireAttrs& attrs, const MutableTensorView& squeeze_scratch,
          const MutableTensorView& out);

Tensor fire(const Tensor& input, const FireWeights& weights,
            const FireAttrs& attrs,
            std::optional<QuantParams> squeeze_qparams = std::nullopt,
            std::optional<QuantParams> out_qparams = std::nullopt);

// --- pooling, activations, head ---------------------------------------------

// Valid padding. The i8 path copies values, so out must share the input's
// qparams.
void maxpool2d(const TensorView& input, const PoolAttrs& attrs,
               const MutableTensorView& out);
Tensor maxpool2d(const Tensor& input, const PoolAttrs& attrs);

// i8: int32 sums requantized with M = s_in / (s_out * h * w).
void global_avg_pool(const TensorView& input, const MutableTensorView& out);
Tensor global_avg_pool(const Tensor& input,
                       std::optional<QuantParams> out_qparams = std::nullopt);

// i8: clamps below at the zero point.
void relu(const TensorView& input, const MutableTensorView& out);
Tensor relu(const Tensor& input);

// input N x 1 x 1 x K, weights 1 x 1 x K x M.
void dense(const TensorView& input, const TensorView& weights,
           const TensorView& bias, bool fused_relu,
           const MutableTensorView& out);
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias,
             bool fused_relu = false,
             std::optional<QuantParams> out_qparams = std::nullopt);

// Always computed in f32; i8 logits are dequantized first.
void softmax(const TensorView& logits, const MutableTensorView& out);
Tensor softmax(const Tensor& logits);

// --- batch norm folding -------------------------------------------------------

struct FoldedWeights {
  Tensor weights;
  Tensor bias;
};

// Per output channel (last weight axis):
//   w' = w * gamma / sqrt(var + eps)
//   b' = (b - mean) * gamma / sqrt(var + eps) + beta
FoldedWeights fold_batchnorm(const Tensor& weights, const Tensor& bias,
                             const BatchNormParams& bn);

}  // namespace dredge

#endif  // DREDGE_OPS_HPP_
