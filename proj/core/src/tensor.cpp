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

#include "dredge/tensor.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "dredge/error.hpp"

namespace dredge {

std::size_t dtype_size(DType dtype) {
  switch (dtype) {
    case DType::kF32:
      return 4;
    case DType::kI8:
      return 1;
    case DType::kI32:
      return 4;
  }
  throw ValidationError("unknown dtype");
}

std::string_view dtype_name(DType dtype) {
  switch (dtype) {
    case DType::kF32:
      return "f32";
    case DType::kI8:
      return "i8";
    case DType::kI32:
      return "i32";
  }
  return "?";
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << shape.n << "x" << shape.h << "x" << shape.w << "x" << shape.c;
  return os.str();
}

std::string to_string(const QuantParams& qp) {
  std::ostringstream os;
  os << "(scale=" << qp.scale << ", zero_point=" << qp.zero_point << ")";
  return os.str();
}

void check_qparams(const QuantParams& qp) {
  if (!(qp.scale > 0.0f) || !std::isfinite(qp.scale)) {
    throw ValidationError("quantization scale must be positive and finite, got " +
                          to_string(qp));
  }
  if (qp.zero_point < -128 || qp.zero_point > 127) {
    throw ValidationError("zero point outside [-128, 127]: " + to_string(qp));
  }
}

void TensorView::check_dtype(DType expected) const {
  if (dtype != expected) {
    throw ValidationError("tensor dtype is " + std::string(dtype_name(dtype)) +
                          ", expected " + std::string(dtype_name(expected)));
  }
}

namespace {

void check_shape(const Shape& shape) {
  if (shape.n < 0 || shape.h < 0 || shape.w < 0 || shape.c < 0) {
    throw ValidationError("negative tensor extent in shape " +
                          to_string(shape));
  }
}

void check_dtype_qparams(DType dtype, const std::optional<QuantParams>& qp) {
  if (dtype == DType::kI8 && !qp) {
    throw ValidationError("i8 tensors require quantization parameters");
  }
  if (dtype == DType::kF32 && qp) {
    throw ValidationError("f32 tensors cannot carry quantization parameters");
  }
  if (qp) check_qparams(*qp);
}

}  // namespace

Tensor::Tensor() : storage_(std::vector<float>{}) { shape_ = {0, 0, 0, 0}; }

Tensor::Tensor(Shape shape, DType dtype, std::optional<QuantParams> qparams)
    : shape_(shape), dtype_(dtype), qparams_(qparams) {
  check_shape(shape);
  check_dtype_qparams(dtype, qparams);
  const auto n = static_cast<std::size_t>(shape.elements());
  switch (dtype) {
    case DType::kF32:
      storage_ = std::vector<float>(n, 0.0f);
      break;
    case DType::kI8:
      storage_ = std::vector<std::int8_t>(n, 0);
      break;
    case DType::kI32:
      storage_ = std::vector<std::int32_t>(n, 0);
      break;
  }
}

namespace {

template <typename T>
void check_length(const Shape& shape, const std::vector<T>& values) {
  if (static_cast<std::int64_t>(values.size()) != shape.elements()) {
    throw ValidationError("buffer holds " + std::to_string(values.size()) +
                          " elements but shape " + to_string(shape) +
                          " needs " + std::to_string(shape.elements()));
  }
}

}  // namespace

Tensor Tensor::f32(Shape shape, std::vector<float> values) {
  check_shape(shape);
  check_length(shape, values);
  Tensor t;
  t.shape_ = shape;
  t.dtype_ = DType::kF32;
  t.storage_ = std::move(values);
  return t;
}

Tensor Tensor::i8(Shape shape, std::vector<std::int8_t> values,
                  QuantParams qp) {
  check_shape(shape);
  check_length(shape, values);
  check_qparams(qp);
  Tensor t;
  t.shape_ = shape;
  t.dtype_ = DType::kI8;
  t.qparams_ = qp;
  t.storage_ = std::move(values);
  return t;
}

Tensor Tensor::i32(Shape shape, std::vector<std::int32_t> values,
                   std::optional<QuantParams> qp) {
  check_shape(shape);
  check_length(shape, values);
  if (qp) check_qparams(*qp);
  Tensor t;
  t.shape_ = shape;
  t.dtype_ = DType::kI32;
  t.qparams_ = qp;
  t.storage_ = std::move(values);
  return t;
}

std::size_t Tensor::byte_size() const {
  return static_cast<std::size_t>(elements()) * dtype_size(dtype_);
}

const Tensor::Storage& Tensor::checked(DType expected) const {
  view().check_dtype(expected);
  return storage_;
}

Tensor::Storage& Tensor::checked_mut(DType expected) {
  view().check_dtype(expected);
  return storage_;
}

const void* Tensor::raw() const {
  return std::visit([](const auto& v) -> const void* { return v.data(); },
                    storage_);
}

void* Tensor::raw() {
  return std::visit([](auto& v) -> void* { return v.data(); }, storage_);
}

bool Tensor::operator==(const Tensor& other) const {
  return shape_ == other.shape_ && dtype_ == other.dtype_ &&
         qparams_ == other.qparams_ && storage_ == other.storage_;
}

Tensor to_tensor(const TensorView& view) {
  Tensor t(view.shape, view.dtype, view.qparams);
  if (view.byte_size() > 0) std::memcpy(t.raw(), view.data, view.byte_size());
  return t;
}

// ---------------------------------------------------------------------------

std::int64_t round_half_away(double x) {
  return static_cast<std::int64_t>(std::round(x));
}

std::int8_t quantize_value(double x, const QuantParams& qp) {
  // Clamp before the integer conversion so huge inputs cannot overflow.
  const double scaled =
      std::clamp(x / static_cast<double>(qp.scale), -1e9, 1e9);
  const double q = static_cast<double>(round_half_away(scaled)) + qp.zero_point;
  return static_cast<std::int8_t>(std::clamp(q, -128.0, 127.0));
}

double dequantize_value(std::int8_t q, const QuantParams& qp) {
  return static_cast<double>(static_cast<int>(q) - qp.zero_point) *
         static_cast<double>(qp.scale);
}

Tensor quantize(const Tensor& t, const QuantParams& qp) {
  check_qparams(qp);
  const auto in = t.data<float>();
  std::vector<std::int8_t> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (!std::isfinite(in[i])) {
      throw ValidationError("cannot quantize non-finite value at flat index " +
                            std::to_string(i));
    }
    out[i] = quantize_value(in[i], qp);
  }
  return Tensor::i8(t.shape(), std::move(out), qp);
}

Tensor dequantize(const Tensor& t) {
  if (t.dtype() != DType::kI8) {
    throw ValidationError("dequantize expects an i8 tensor, got " +
                          std::string(dtype_name(t.dtype())));
  }
  if (!t.qparams()) {
    throw ValidationError("dequantize: tensor has no quantization parameters");
  }
  const QuantParams qp = *t.qparams();
  const auto in = t.data<std::int8_t>();
  std::vector<float> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = static_cast<float>(dequantize_value(in[i], qp));
  }
  return Tensor::f32(t.shape(), std::move(out));
}

RangeObservation merge(const RangeObservation& a, const RangeObservation& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  return {std::min(a.min, b.min), std::max(a.max, b.max), a.count + b.count};
}

RangeObservation observe(std::span<const float> values,
                         const RangeObservation& acc) {
  if (values.empty()) return acc;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return merge(acc, {static_cast<double>(*lo), static_cast<double>(*hi),
                     static_cast<std::uint64_t>(values.size())});
}

RangeObservation observe(const Tensor& t, const RangeObservation& acc) {
  return observe(t.data<float>(), acc);
}

QuantParams qparams_from_range(double min, double max, bool symmetric) {
  if (!std::isfinite(min) || !std::isfinite(max)) {
    throw ValidationError("quantization range bounds must be finite");
  }
  if (min > max) {
    throw ValidationError("quantization range has min > max");
  }
  const double lo = std::min(min, 0.0);
  const double hi = std::max(max, 0.0);
  double scale = 0.0;
  if (symmetric) {
    scale = std::max(std::fabs(lo), std::fabs(hi)) / 127.0;
  } else {
    scale = (hi - lo) / 255.0;
  }
  if (scale == 0.0) return {1.0f, 0};
  // Scales are stored as f32; keep them normal so dequantized values stay
  // well defined.
  const float stored = std::max(static_cast<float>(scale), FLT_MIN);
  if (symmetric) return {stored, 0};
  const double zp = -128.0 - lo / static_cast<double>(stored);
  const auto zero_point = static_cast<std::int32_t>(
      std::clamp<std::int64_t>(round_half_away(zp), -128, 127));
  return {stored, zero_point};
}

RequantMultiplier quantize_multiplier(double m) {
  if (!(m > 0.0) || !(m < 1.0) || !std::isfinite(m)) {
    std::ostringstream os;
    os << "requantization multiplier " << m
       << " outside (0, 1); calibration is invalid";
    throw ValidationError(os.str());
  }
  int exponent = 0;
  const double fraction = std::frexp(m, &exponent);  // m = fraction * 2^exp
  std::int64_t mantissa = round_half_away(std::ldexp(fraction, 31));
  if (mantissa == (std::int64_t{1} << 31)) {
    mantissa /= 2;
    ++exponent;
  }
  return {static_cast<std::int32_t>(mantissa), -exponent};
}

RequantMultiplier requant_multiplier(double s_in, double s_w, double s_out) {
  if (!(s_in > 0.0) || !(s_w > 0.0) || !(s_out > 0.0)) {
    throw ValidationError("requantization scales must be positive");
  }
  return quantize_multiplier(s_in * s_w / s_out);
}

}  // namespace dredge
