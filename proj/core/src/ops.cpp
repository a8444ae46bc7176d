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

#include "dredge/ops.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>
#include <limits>
#include <string>

#include "dredge/error.hpp"

namespace dredge {
namespace {

[[noreturn]] void reject(const std::string& what) {
  throw ValidationError(what);
}

void require_qparams(const TensorView& t, const char* role) {
  if (!t.qparams) {
    reject(std::string(role) + " tensor is missing quantization parameters");
  }
}

bool is_quantized(const TensorView& input, const char* op) {
  if (input.dtype == DType::kF32) return false;
  if (input.dtype == DType::kI8) {
    require_qparams(input, "input");
    return true;
  }
  reject(std::string(op) + ": unsupported input dtype " +
         std::string(dtype_name(input.dtype)));
}

void check_output(const MutableTensorView& out, const Shape& expected,
                  DType dtype, const char* op) {
  if (out.shape != expected) {
    reject(std::string(op) + ": output shape " + to_string(out.shape) +
           " does not match expected " + to_string(expected));
  }
  if (out.dtype != dtype) {
    reject(std::string(op) + ": output dtype mismatch");
  }
  if (dtype == DType::kI8) require_qparams(out.view(), "output");
}

// Inner loop shared by conv2d and dense. Produces one accumulator row per
// output pixel and hands it to `emit`.
template <typename T, typename AccT, typename Emit>
void conv_loop(const T* in, const Shape& is, const T* w, const AccT* bias,
               const ConvAttrs& a, const AxisExtent& ey, const AxisExtent& ex,
               AccT in_offset, Emit&& emit) {
  const int cout = a.out_channels;
  const int groups = a.groups;
  const auto cin_g = static_cast<int>(is.c / groups);
  const int cout_g = cout / groups;
  const bool depthwise = cin_g == 1 && cout_g == 1;
  std::vector<AccT> acc_buf(static_cast<std::size_t>(cout));
  AccT* __restrict acc = acc_buf.data();
  std::int64_t pixel = 0;
  for (std::int64_t n = 0; n < is.n; ++n) {
    for (std::int64_t oy = 0; oy < ey.out; ++oy) {
      for (std::int64_t ox = 0; ox < ex.out; ++ox, ++pixel) {
        std::copy(bias, bias + cout, acc);
        for (int ky = 0; ky < a.kernel_h; ++ky) {
          const std::int64_t iy = oy * a.stride_h - ey.pad_before + ky;
          if (iy < 0 || iy >= is.h) continue;
          for (int kx = 0; kx < a.kernel_w; ++kx) {
            const std::int64_t ix = ox * a.stride_w - ex.pad_before + kx;
            if (ix < 0 || ix >= is.w) continue;
            const T* __restrict px = in + ((n * is.h + iy) * is.w + ix) * is.c;
            const T* __restrict wk =
                w + static_cast<std::int64_t>(ky * a.kernel_w + kx) * cin_g *
                        cout;
            if (depthwise) {
              for (int c = 0; c < cout; ++c) {
                acc[c] += (static_cast<AccT>(px[c]) - in_offset) *
                          static_cast<AccT>(wk[c]);
              }
              continue;
            }
            for (int g = 0; g < groups; ++g) {
              const T* __restrict pg = px + g * cin_g;
              AccT* __restrict ag = acc + g * cout_g;
              const T* __restrict wg = wk + g * cout_g;
              for (int ci = 0; ci < cin_g; ++ci) {
                const AccT v = static_cast<AccT>(pg[ci]) - in_offset;
                const T* __restrict wr = wg + static_cast<std::int64_t>(ci) * cout;
                for (int co = 0; co < cout_g; ++co) {
                  ag[co] += v * static_cast<AccT>(wr[co]);
                }
              }
            }
          }
        }
        emit(pixel, acc);
      }
    }
  }
}

void check_conv_operands(const TensorView& input, const TensorView& weights,
                         const TensorView& bias, const ConvAttrs& a,
                         bool quantized) {
  if (a.groups < 1) reject("conv2d: groups must be positive");
  if (a.out_channels < 1) reject("conv2d: out_channels must be positive");
  if (input.shape.c % a.groups != 0) {
    reject("conv2d: input channels (" + std::to_string(input.shape.c) +
           ") not divisible by groups (" + std::to_string(a.groups) + ")");
  }
  if (a.out_channels % a.groups != 0) {
    reject("conv2d: out_channels (" + std::to_string(a.out_channels) +
           ") not divisible by groups (" + std::to_string(a.groups) + ")");
  }
  const Shape expected_w{a.kernel_h, a.kernel_w, input.shape.c / a.groups,
                         a.out_channels};
  if (weights.shape != expected_w) {
    reject("conv2d: weight shape " + to_string(weights.shape) +
           " does not match kernel/in-channel/out-channel layout " +
           to_string(expected_w));
  }
  if (bias.shape.elements() != a.out_channels) {
    reject("conv2d: bias has " + std::to_string(bias.shape.elements()) +
           " elements, expected out_channels = " +
           std::to_string(a.out_channels));
  }
  if (quantized) {
    if (weights.dtype != DType::kI8) reject("conv2d: i8 input needs i8 weights");
    if (bias.dtype != DType::kI32) reject("conv2d: i8 input needs i32 bias");
    require_qparams(weights, "weight");
    if (weights.qparams->zero_point != 0) {
      reject("conv2d: weights must be symmetrically quantized");
    }
  } else {
    if (weights.dtype != DType::kF32) reject("conv2d: f32 input needs f32 weights");
    if (bias.dtype != DType::kF32) reject("conv2d: f32 input needs f32 bias");
  }
}

#ifndef NDEBUG
void assert_accumulator_headroom(const TensorView& weights,
                                 const TensorView& bias) {
  const auto w = weights.as<std::int8_t>();
  int max_w = 0;
  for (auto v : w) max_w = std::max(max_w, std::abs(static_cast<int>(v)));
  std::int64_t max_b = 0;
  for (auto v : bias.as<std::int32_t>()) {
    max_b = std::max<std::int64_t>(max_b, std::llabs(v));
  }
  const std::int64_t taps =
      weights.shape.n * weights.shape.h * weights.shape.w;
  assert(taps * 255 * max_w + max_b < std::numeric_limits<std::int32_t>::max());
}
#endif

// Shared by conv2d and dense once shapes are settled.
void run_conv(const TensorView& input, const TensorView& weights,
              const TensorView& bias, const ConvAttrs& a, const AxisExtent& ey,
              const AxisExtent& ex, const MutableTensorView& out,
              std::int64_t channel_offset, bool quantized) {
  const std::int64_t out_c = out.shape.c;
  const int cout = a.out_channels;
  if (!quantized) {
    float* dst = static_cast<float*>(out.data);
    const bool relu = a.fused_relu;
    conv_loop<float, float>(
        static_cast<const float*>(input.data), input.shape,
        static_cast<const float*>(weights.data),
        static_cast<const float*>(bias.data), a, ey, ex, 0.0f,
        [&](std::int64_t pixel, const float* acc) {
          float* o = dst + pixel * out_c + channel_offset;
          for (int c = 0; c < cout; ++c) {
            o[c] = relu ? std::max(acc[c], 0.0f) : acc[c];
          }
        });
    return;
  }
#ifndef NDEBUG
  assert_accumulator_headroom(weights, bias);
#endif
  const QuantParams in_qp = *input.qparams;
  const QuantParams w_qp = *weights.qparams;
  const QuantParams out_qp = *out.qparams;
  const RequantMultiplier m =
      requant_multiplier(in_qp.scale, w_qp.scale, out_qp.scale);
  const std::int64_t lo = a.fused_relu ? std::max(-128, out_qp.zero_point) : -128;
  std::int8_t* dst = static_cast<std::int8_t*>(out.data);
  conv_loop<std::int8_t, std::int32_t>(
      static_cast<const std::int8_t*>(input.data), input.shape,
      static_cast<const std::int8_t*>(weights.data),
      static_cast<const std::int32_t*>(bias.data), a, ey, ex,
      in_qp.zero_point, [&](std::int64_t pixel, const std::int32_t* acc) {
        std::int8_t* o = dst + pixel * out_c + channel_offset;
        for (int c = 0; c < cout; ++c) {
          const std::int64_t q = out_qp.zero_point + apply_multiplier(acc[c], m);
          o[c] = static_cast<std::int8_t>(std::clamp<std::int64_t>(q, lo, 127));
        }
      });
}

Tensor make_output(const Shape& shape, bool quantized,
                   const std::optional<QuantParams>& qp, const char* op) {
  if (quantized && !qp) {
    reject(std::string(op) + ": i8 path needs output quantization parameters");
  }
  return quantized ? Tensor(shape, DType::kI8, qp) : Tensor(shape, DType::kF32);
}

Tensor zero_bias_like(const Tensor& weights) {
  return Tensor(Shape{1, 1, 1, weights.shape().c}, DType::kF32);
}

}  // namespace

BatchNormParams BatchNormParams::identity(int channels) {
  const auto n = static_cast<std::size_t>(channels);
  BatchNormParams bn;
  bn.gamma.assign(n, 1.0f);
  bn.beta.assign(n, 0.0f);
  bn.moving_mean.assign(n, 0.0f);
  bn.moving_var.assign(n, 1.0f);
  bn.epsilon = 0.0f;
  return bn;
}

AxisExtent conv_axis_extent(std::int64_t in, int kernel, int stride,
                            Padding padding, const char* axis) {
  if (kernel < 1) reject(std::string("kernel ") + axis + " must be positive");
  if (stride < 1) reject(std::string("stride ") + axis + " must be positive");
  if (padding == Padding::kValid) {
    if (in < kernel) {
      reject(std::string("kernel ") + axis + " (" + std::to_string(kernel) +
             ") larger than padded input " + axis + " (" + std::to_string(in) +
             ")");
    }
    return {(in - kernel) / stride + 1, 0};
  }
  if (in < 1) reject(std::string("empty input along ") + axis);
  const std::int64_t out = (in + stride - 1) / stride;
  const std::int64_t total =
      std::max<std::int64_t>((out - 1) * stride + kernel - in, 0);
  return {out, total / 2};
}

Shape conv2d_output_shape(const Shape& input, const Shape& weights,
                          const ConvAttrs& attrs) {
  (void)weights;
  const AxisExtent ey = conv_axis_extent(input.h, attrs.kernel_h,
                                         attrs.stride_h, attrs.padding, "height");
  const AxisExtent ex = conv_axis_extent(input.w, attrs.kernel_w,
                                         attrs.stride_w, attrs.padding, "width");
  return {input.n, ey.out, ex.out, attrs.out_channels};
}

Shape pool_output_shape(const Shape& input, const PoolAttrs& attrs) {
  const AxisExtent ey = conv_axis_extent(input.h, attrs.window_h,
                                         attrs.stride_h, Padding::kValid, "height");
  const AxisExtent ex = conv_axis_extent(input.w, attrs.window_w,
                                         attrs.stride_w, Padding::kValid, "width");
  return {input.n, ey.out, ex.out, input.c};
}

ConvAttrs depthwise_attrs(int channels, int stride_h, int stride_w) {
  ConvAttrs a;
  a.kernel_h = 3;
  a.kernel_w = 3;
  a.stride_h = stride_h;
  a.stride_w = stride_w;
  a.padding = Padding::kSame;
  a.groups = channels;
  a.out_channels = channels;
  a.fused_relu = true;
  return a;
}

ConvAttrs pointwise_attrs(int out_channels, int groups, bool fused_relu) {
  ConvAttrs a;
  a.groups = groups;
  a.out_channels = out_channels;
  a.fused_relu = fused_relu;
  return a;
}

// --- conv2d --------------------------------------------------------------------

void conv2d(const TensorView& input, const TensorView& weights,
            const TensorView& bias, const ConvAttrs& attrs,
            const MutableTensorView& out, std::int64_t channel_offset) {
  const bool quantized = is_quantized(input, "conv2d");
  check_conv_operands(input, weights, bias, attrs, quantized);
  const AxisExtent ey = conv_axis_extent(input.shape.h, attrs.kernel_h,
                                         attrs.stride_h, attrs.padding, "height");
  const AxisExtent ex = conv_axis_extent(input.shape.w, attrs.kernel_w,
                                         attrs.stride_w, attrs.padding, "width");
  const Shape expected{input.shape.n, ey.out, ex.out, out.shape.c};
  check_output(out, expected, quantized ? DType::kI8 : DType::kF32, "conv2d");
  if (channel_offset < 0 || channel_offset + attrs.out_channels > out.shape.c) {
    reject("conv2d: output channel slice [" + std::to_string(channel_offset) +
           ", " + std::to_string(channel_offset + attrs.out_channels) +
           ") exceeds output channels " + std::to_string(out.shape.c));
  }
  run_conv(input, weights, bias, attrs, ey, ex, out, channel_offset, quantized);
}

Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias,
              const ConvAttrs& attrs, std::optional<QuantParams> out_qparams) {
  const bool quantized = is_quantized(input.view(), "conv2d");
  check_conv_operands(input.view(), weights.view(), bias.view(), attrs,
                      quantized);
  Tensor out = make_output(
      conv2d_output_shape(input.shape(), weights.shape(), attrs), quantized,
      out_qparams, "conv2d");
  conv2d(input.view(), weights.view(), bias.view(), attrs, out.mutable_view());
  return out;
}

// --- depthwise separable ---------------------------------------------------------

DepthwiseSeparableWeights fold_depthwise_separable(
    const Tensor& dw_weights, const Tensor& pw_weights,
    const BatchNormParams& bn_dw, const BatchNormParams& bn_pw) {
  FoldedWeights dw = fold_batchnorm(dw_weights, zero_bias_like(dw_weights), bn_dw);
  FoldedWeights pw = fold_batchnorm(pw_weights, zero_bias_like(pw_weights), bn_pw);
  return {std::move(dw.weights), std::move(dw.bias), std::move(pw.weights),
          std::move(pw.bias)};
}

Shape depthwise_separable_mid_shape(const Shape& input,
                                    const DepthwiseSeparableAttrs& attrs) {
  const ConvAttrs dw = depthwise_attrs(static_cast<int>(input.c),
                                       attrs.stride_h, attrs.stride_w);
  return conv2d_output_shape(input, Shape{3, 3, 1, input.c}, dw);
}

void depthwise_separable_block(const TensorView& input,
                               const DepthwiseSeparableWeightViews& weights,
                               const DepthwiseSeparableAttrs& attrs,
                               const MutableTensorView& mid_scratch,
                               const MutableTensorView& out) {
  const auto channels = static_cast<int>(input.shape.c);
  if (weights.dw_weights.shape != Shape{3, 3, 1, input.shape.c}) {
    reject("depthwise_separable_block: depthwise kernel must be 3x3x1x" +
           std::to_string(channels) + ", got " +
           to_string(weights.dw_weights.shape));
  }
  conv2d(input, weights.dw_weights, weights.dw_bias,
         depthwise_attrs(channels, attrs.stride_h, attrs.stride_w), mid_scratch);
  conv2d(mid_scratch.view(), weights.pw_weights, weights.pw_bias,
         pointwise_attrs(attrs.out_channels), out);
}

Tensor depthwise_separable_block(const Tensor& input,
                                 const DepthwiseSeparableWeights& weights,
                                 const DepthwiseSeparableAttrs& attrs,
                                 std::optional<QuantParams> mid_qparams,
                                 std::optional<QuantParams> out_qparams) {
  const bool quantized = is_quantized(input.view(), "depthwise_separable_block");
  const Shape mid_shape = depthwise_separable_mid_shape(input.shape(), attrs);
  Tensor mid = make_output(mid_shape, quantized, mid_qparams,
                           "depthwise_separable_block");
  Shape out_shape = mid_shape;
  out_shape.c = attrs.out_channels;
  Tensor out = make_output(out_shape, quantized, out_qparams,
                           "depthwise_separable_block");
  depthwise_separable_block(input.view(), weights.views(), attrs,
                            mid.mutable_view(), out.mutable_view());
  return out;
}

Tensor depthwise_separable_block(const Tensor& input, const Tensor& dw_weights,
                                 const Tensor& pw_weights,
                                 const BatchNormParams& bn_dw,
                                 const BatchNormParams& bn_pw, int stride) {
  const DepthwiseSeparableWeights folded =
      fold_depthwise_separable(dw_weights, pw_weights, bn_dw, bn_pw);
  DepthwiseSeparableAttrs attrs;
  attrs.stride_h = stride;
  attrs.stride_w = stride;
  attrs.out_channels = static_cast<int>(pw_weights.shape().c);
  return depthwise_separable_block(input, folded, attrs);
}

// --- channel shuffle -------------------------------------------------------------

namespace {

template <typename T>
void shuffle_typed(const T* in, T* out, std::int64_t pixels, std::int64_t c,
                   std::int64_t groups) {
  const std::int64_t per_group = c / groups;
  std::vector<std::int64_t> src(static_cast<std::size_t>(c));
  for (std::int64_t j = 0; j < c; ++j) {
    src[static_cast<std::size_t>(j)] = (j % groups) * per_group + j / groups;
  }
  for (std::int64_t p = 0; p < pixels; ++p) {
    const T* ip = in + p * c;
    T* op = out + p * c;
    for (std::int64_t j = 0; j < c; ++j) op[j] = ip[src[static_cast<std::size_t>(j)]];
  }
}

}  // namespace

void channel_shuffle(const TensorView& input, int groups,
                     const MutableTensorView& out) {
  if (groups < 1) reject("channel_shuffle: groups must be positive");
  if (input.shape.c % groups != 0) {
    reject("channel_shuffle: channels (" + std::to_string(input.shape.c) +
           ") not divisible by groups (" + std::to_string(groups) + ")");
  }
  const bool quantized = is_quantized(input, "channel_shuffle");
  check_output(out, input.shape, input.dtype, "channel_shuffle");
  if (quantized && out.qparams != input.qparams) {
    reject("channel_shuffle: i8 output must share the input qparams");
  }
  if (quantized) {
    shuffle_typed(static_cast<const std::int8_t*>(input.data),
                  static_cast<std::int8_t*>(out.data), input.shape.pixels(),
                  input.shape.c, groups);
  } else {
    shuffle_typed(static_cast<const float*>(input.data),
                  static_cast<float*>(out.data), input.shape.pixels(),
                  input.shape.c, groups);
  }
}

Tensor channel_shuffle(const Tensor& input, int groups) {
  Tensor out(input.shape(), input.dtype(), input.qparams());
  channel_shuffle(input.view(), groups, out.mutable_view());
  return out;
}

// --- fire --------------------------------------------------------------------------

Shape fire_squeeze_shape(const Shape& input, const FireAttrs& attrs) {
  return {input.n, input.h, input.w, attrs.squeeze_channels};
}

void fire(const TensorView& input, const FireWeightViews& weights,
          const FireAttrs& attrs, const MutableTensorView& squeeze_scratch,
          const MutableTensorView& out) {
  if (attrs.squeeze_channels < 1 || attrs.expand1_channels < 1 ||
      attrs.expand3_channels < 1) {
    reject("fire: channel counts must be positive");
  }
  if (out.shape.c != attrs.out_channels()) {
    reject("fire: output has " + std::to_string(out.shape.c) +
           " channels, expected expand1 + expand3 = " +
           std::to_string(attrs.out_channels()));
  }
  conv2d(input, weights.squeeze_weights, weights.squeeze_bias,
         pointwise_attrs(attrs.squeeze_channels), squeeze_scratch);
  conv2d(squeeze_scratch.view(), weights.expand1_weights, weights.expand1_bias,
         pointwise_attrs(attrs.expand1_channels), out, 0);
  ConvAttrs e3;
  e3.kernel_h = 3;
  e3.kernel_w = 3;
  e3.padding = Padding::kSame;
  e3.out_channels = attrs.expand3_channels;
  e3.fused_relu = true;
  conv2d(squeeze_scratch.view(), weights.expand3_weights, weights.expand3_bias,
         e3, out, attrs.expand1_channels);
}

Tensor fire(const Tensor& input, const FireWeights& weights,
            const FireAttrs& attrs, std::optional<QuantParams> squeeze_qparams,
            std::optional<QuantParams> out_qparams) {
  const bool quantized = is_quantized(input.view(), "fire");
  Tensor squeeze = make_output(fire_squeeze_shape(input.shape(), attrs),
                               quantized, squeeze_qparams, "fire");
  Shape out_shape = input.shape();
  out_shape.c = attrs.out_channels();
  Tensor out = make_output(out_shape, quantized, out_qparams, "fire");
  fire(input.view(), weights.views(), attrs, squeeze.mutable_view(),
       out.mutable_view());
  return out;
}

// --- maxpool -------------------------------------------------------------------------

namespace {

template <typename T>
void maxpool_typed(const T* in, const Shape& is, T* out, const Shape& os,
                   const PoolAttrs& a) {
  std::int64_t o = 0;
  for (std::int64_t n = 0; n < is.n; ++n) {
    for (std::int64_t oy = 0; oy < os.h; ++oy) {
      for (std::int64_t ox = 0; ox < os.w; ++ox) {
        T* dst = out + o * os.c;
        ++o;
        const T* first =
            in + ((n * is.h + oy * a.stride_h) * is.w + ox * a.stride_w) * is.c;
        std::copy(first, first + is.c, dst);
        for (int ky = 0; ky < a.window_h; ++ky) {
          for (int kx = 0; kx < a.window_w; ++kx) {
            const T* src = in + ((n * is.h + oy * a.stride_h + ky) * is.w +
                                 ox * a.stride_w + kx) *
                                    is.c;
            for (std::int64_t c = 0; c < is.c; ++c) {
              dst[c] = std::max(dst[c], src[c]);
            }
          }
        }
      }
    }
  }
}

}  // namespace

void maxpool2d(const TensorView& input, const PoolAttrs& attrs,
               const MutableTensorView& out) {
  const bool quantized = is_quantized(input, "maxpool2d");
  const Shape os = pool_output_shape(input.shape, attrs);
  check_output(out, os, input.dtype, "maxpool2d");
  if (quantized && out.qparams != input.qparams) {
    reject("maxpool2d: i8 output must share the input qparams");
  }
  if (quantized) {
    maxpool_typed(static_cast<const std::int8_t*>(input.data), input.shape,
                  static_cast<std::int8_t*>(out.data), os, attrs);
  } else {
    maxpool_typed(static_cast<const float*>(input.data), input.shape,
                  static_cast<float*>(out.data), os, attrs);
  }
}

Tensor maxpool2d(const Tensor& input, const PoolAttrs& attrs) {
  Tensor out(pool_output_shape(input.shape(), attrs), input.dtype(),
             input.qparams());
  maxpool2d(input.view(), attrs, out.mutable_view());
  return out;
}

// --- global average pool -------------------------------------------------------------

void global_avg_pool(const TensorView& input, const MutableTensorView& out) {
  const bool quantized = is_quantized(input, "global_avg_pool");
  const Shape& is = input.shape;
  if (is.h < 1 || is.w < 1) reject("global_avg_pool: empty spatial extent");
  check_output(out, Shape{is.n, 1, 1, is.c}, input.dtype, "global_avg_pool");
  const std::int64_t hw = is.h * is.w;
  if (!quantized) {
    const float* in = static_cast<const float*>(input.data);
    float* dst = static_cast<float*>(out.data);
    std::vector<double> sum(static_cast<std::size_t>(is.c));
    for (std::int64_t n = 0; n < is.n; ++n) {
      std::fill(sum.begin(), sum.end(), 0.0);
      for (std::int64_t p = 0; p < hw; ++p) {
        const float* px = in + (n * hw + p) * is.c;
        for (std::int64_t c = 0; c < is.c; ++c) sum[static_cast<std::size_t>(c)] += px[c];
      }
      for (std::int64_t c = 0; c < is.c; ++c) {
        dst[n * is.c + c] =
            static_cast<float>(sum[static_cast<std::size_t>(c)] / static_cast<double>(hw));
      }
    }
    return;
  }
  const QuantParams in_qp = *input.qparams;
  const QuantParams out_qp = *out.qparams;
  const RequantMultiplier m = quantize_multiplier(
      static_cast<double>(in_qp.scale) /
      (static_cast<double>(out_qp.scale) * static_cast<double>(hw)));
  const std::int8_t* in = static_cast<const std::int8_t*>(input.data);
  std::int8_t* dst = static_cast<std::int8_t*>(out.data);
  std::vector<std::int64_t> sum(static_cast<std::size_t>(is.c));
  for (std::int64_t n = 0; n < is.n; ++n) {
    std::fill(sum.begin(), sum.end(), 0);
    for (std::int64_t p = 0; p < hw; ++p) {
      const std::int8_t* px = in + (n * hw + p) * is.c;
      for (std::int64_t c = 0; c < is.c; ++c) {
        sum[static_cast<std::size_t>(c)] += px[c] - in_qp.zero_point;
      }
    }
    for (std::int64_t c = 0; c < is.c; ++c) {
      const std::int64_t q =
          out_qp.zero_point + apply_multiplier(sum[static_cast<std::size_t>(c)], m);
      dst[n * is.c + c] =
          static_cast<std::int8_t>(std::clamp<std::int64_t>(q, -128, 127));
    }
  }
}

Tensor global_avg_pool(const Tensor& input,
                       std::optional<QuantParams> out_qparams) {
  const bool quantized = is_quantized(input.view(), "global_avg_pool");
  const Shape& is = input.shape();
  Tensor out = make_output(Shape{is.n, 1, 1, is.c}, quantized, out_qparams,
                           "global_avg_pool");
  global_avg_pool(input.view(), out.mutable_view());
  return out;
}

// --- relu --------------------------------------------------------------------------

void relu(const TensorView& input, const MutableTensorView& out) {
  const bool quantized = is_quantized(input, "relu");
  check_output(out, input.shape, input.dtype, "relu");
  if (quantized && out.qparams != input.qparams) {
    reject("relu: i8 output must share the input qparams");
  }
  const auto n = static_cast<std::size_t>(input.shape.elements());
  if (quantized) {
    const auto zp = static_cast<std::int8_t>(input.qparams->zero_point);
    const auto* in = static_cast<const std::int8_t*>(input.data);
    auto* dst = static_cast<std::int8_t*>(out.data);
    for (std::size_t i = 0; i < n; ++i) dst[i] = std::max(in[i], zp);
  } else {
    const auto* in = static_cast<const float*>(input.data);
    auto* dst = static_cast<float*>(out.data);
    for (std::size_t i = 0; i < n; ++i) dst[i] = std::max(in[i], 0.0f);
  }
}

Tensor relu(const Tensor& input) {
  Tensor out(input.shape(), input.dtype(), input.qparams());
  relu(input.view(), out.mutable_view());
  return out;
}

// --- dense ---------------------------------------------------------------------------

void dense(const TensorView& input, const TensorView& weights,
           const TensorView& bias, bool fused_relu,
           const MutableTensorView& out) {
  const bool quantized = is_quantized(input, "dense");
  if (input.shape.h != 1 || input.shape.w != 1) {
    reject("dense: input must be flattened to Nx1x1xK, got " +
           to_string(input.shape));
  }
  if (weights.shape.n != 1 || weights.shape.h != 1 ||
      weights.shape.w != input.shape.c) {
    reject("dense: inner dimension mismatch, input K = " +
           std::to_string(input.shape.c) + " but weights are " +
           to_string(weights.shape));
  }
  ConvAttrs a = pointwise_attrs(static_cast<int>(weights.shape.c), 1, fused_relu);
  check_conv_operands(input, weights, bias, a, quantized);
  check_output(out, Shape{input.shape.n, 1, 1, weights.shape.c},
               quantized ? DType::kI8 : DType::kF32, "dense");
  run_conv(input, weights, bias, a, AxisExtent{1, 0}, AxisExtent{1, 0}, out, 0,
           quantized);
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias,
             bool fused_relu, std::optional<QuantParams> out_qparams) {
  const bool quantized = is_quantized(input.view(), "dense");
  Tensor out = make_output(Shape{input.shape().n, 1, 1, weights.shape().c},
                           quantized, out_qparams, "dense");
  dense(input.view(), weights.view(), bias.view(), fused_relu,
        out.mutable_view());
  return out;
}

// --- softmax -------------------------------------------------------------------------

void softmax(const TensorView& logits, const MutableTensorView& out) {
  const bool quantized = is_quantized(logits, "softmax");
  check_output(out, logits.shape, DType::kF32, "softmax");
  const std::int64_t rows = logits.shape.pixels();
  const std::int64_t m = logits.shape.c;
  std::vector<double> x(static_cast<std::size_t>(m));
  float* dst = static_cast<float*>(out.data);
  for (std::int64_t r = 0; r < rows; ++r) {
    for (std::int64_t i = 0; i < m; ++i) {
      const auto k = static_cast<std::size_t>(r * m + i);
      x[static_cast<std::size_t>(i)] =
          quantized
              ? dequantize_value(static_cast<const std::int8_t*>(logits.data)[k],
                                 *logits.qparams)
              : static_cast<double>(static_cast<const float*>(logits.data)[k]);
    }
    const double peak = *std::max_element(x.begin(), x.end());
    double total = 0.0;
    for (double& v : x) {
      v = std::exp(v - peak);
      total += v;
    }
    for (std::int64_t i = 0; i < m; ++i) {
      dst[r * m + i] = static_cast<float>(x[static_cast<std::size_t>(i)] / total);
    }
  }
}

Tensor softmax(const Tensor& logits) {
  Tensor out(logits.shape(), DType::kF32);
  softmax(logits.view(), out.mutable_view());
  return out;
}

// --- batch norm folding --------------------------------------------------------------

FoldedWeights fold_batchnorm(const Tensor& weights, const Tensor& bias,
                             const BatchNormParams& bn) {
  const std::int64_t cout = weights.shape().c;
  const auto n = static_cast<std::size_t>(cout);
  if (bn.gamma.size() != n || bn.beta.size() != n ||
      bn.moving_mean.size() != n || bn.moving_var.size() != n) {
    reject("fold_batchnorm: batch norm vectors must have " +
           std::to_string(cout) + " entries");
  }
  if (bias.elements() != cout) {
    reject("fold_batchnorm: bias has " + std::to_string(bias.elements()) +
           " entries, expected " + std::to_string(cout));
  }
  std::vector<double> factor(n);
  for (std::size_t c = 0; c < n; ++c) {
    const double denom = static_cast<double>(bn.moving_var[c]) + bn.epsilon;
    if (!(denom > 0.0)) {
      reject("fold_batchnorm: moving_var + epsilon must be positive (channel " +
             std::to_string(c) + ")");
    }
    factor[c] = static_cast<double>(bn.gamma[c]) / std::sqrt(denom);
  }
  Tensor w = weights;
  auto wd = w.data<float>();
  for (std::size_t i = 0; i < wd.size(); ++i) {
    wd[i] = static_cast<float>(wd[i] * factor[i % n]);
  }
  Tensor b = bias;
  auto bd = b.data<float>();
  for (std::size_t c = 0; c < n; ++c) {
    bd[c] = static_cast<float>((static_cast<double>(bd[c]) - bn.moving_mean[c]) *
                                   factor[c] +
                               bn.beta[c]);
  }
  return {std::move(w), std::move(b)};
}

}  // namespace dredge
