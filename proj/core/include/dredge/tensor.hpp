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

#ifndef DREDGE_TENSOR_HPP_
#define DREDGE_TENSOR_HPP_

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dredge {

enum class DType : std::uint8_t {
  kF32 = 0,
  kI8 = 1,
  kI32 = 2,
};

std::size_t dtype_size(DType dtype);
std::string_view dtype_name(DType dtype);

template <typename T>
struct DTypeOf;
template <>
struct DTypeOf<float> {
  static constexpr DType value = DType::kF32;
};
template <>
struct DTypeOf<std::int8_t> {
  static constexpr DType value = DType::kI8;
};
template <>
struct DTypeOf<std::int32_t> {
  static constexpr DType value = DType::kI32;
};

// NHWC extents.
struct Shape {
  std::int64_t n = 1;
  std::int64_t h = 1;
  std::int64_t w = 1;
  std::int64_t c = 1;

  constexpr std::int64_t elements() const { return n * h * w * c; }
  constexpr std::int64_t pixels() const { return n * h * w; }
  constexpr auto operator<=>(const Shape&) const = default;
};

std::string to_string(const Shape& shape);

// real = (q - zero_point) * scale
struct QuantParams {
  float scale = 1.0f;
  std::int32_t zero_point = 0;

  bool operator==(const QuantParams&) const = default;
};

// Throws ValidationError unless scale is positive and finite and the zero
// point fits in int8.
void check_qparams(const QuantParams& qp);

std::string to_string(const QuantParams& qp);

struct TensorView {
  Shape shape;
  DType dtype = DType::kF32;
  std::optional<QuantParams> qparams;
  const void* data = nullptr;

  template <typename T>
  std::span<const T> as() const {
    check_dtype(DTypeOf<T>::value);
    return {static_cast<const T*>(data),
            static_cast<std::size_t>(shape.elements())};
  }

  std::size_t byte_size() const {
    return static_cast<std::size_t>(shape.elements()) * dtype_size(dtype);
  }

  void check_dtype(DType expected) const;
};

struct MutableTensorView {
  Shape shape;
  DType dtype = DType::kF32;
  std::optional<QuantParams> qparams;
  void* data = nullptr;

  template <typename T>
  std::span<T> as() const {
    view().check_dtype(DTypeOf<T>::value);
    return {static_cast<T*>(data), static_cast<std::size_t>(shape.elements())};
  }

  TensorView view() const { return {shape, dtype, qparams, data}; }
  operator TensorView() const { return view(); }  // NOLINT
};

// Dense rank-4 NHWC array. Invariants: buffer length equals the shape's
// element count; i8 tensors always carry qparams; f32 tensors never do.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, DType dtype,
         std::optional<QuantParams> qparams = std::nullopt);

  static Tensor f32(Shape shape, std::vector<float> values);
  static Tensor i8(Shape shape, std::vector<std::int8_t> values,
                   QuantParams qp);
  static Tensor i32(Shape shape, std::vector<std::int32_t> values,
                    std::optional<QuantParams> qp = std::nullopt);

  const Shape& shape() const { return shape_; }
  DType dtype() const { return dtype_; }
  const std::optional<QuantParams>& qparams() const { return qparams_; }
  std::int64_t elements() const { return shape_.elements(); }
  std::size_t byte_size() const;

  template <typename T>
  std::span<const T> data() const {
    return std::get<std::vector<T>>(checked(DTypeOf<T>::value));
  }
  template <typename T>
  std::span<T> data() {
    return std::get<std::vector<T>>(checked_mut(DTypeOf<T>::value));
  }

  const void* raw() const;
  void* raw();

  TensorView view() const { return {shape_, dtype_, qparams_, raw()}; }
  MutableTensorView mutable_view() {
    return {shape_, dtype_, qparams_, raw()};
  }

  bool operator==(const Tensor& other) const;

 private:
  using Storage = std::variant<std::vector<float>, std::vector<std::int8_t>,
                               std::vector<std::int32_t>>;

  const Storage& checked(DType expected) const;
  Storage& checked_mut(DType expected);

  Shape shape_;
  DType dtype_ = DType::kF32;
  std::optional<QuantParams> qparams_;
  Storage storage_;
};

Tensor to_tensor(const TensorView& view);

// ---------------------------------------------------------------------------
// Affine quantization.

// Ties round away from zero; used by every quantizing path so int8 results
// do not depend on the host's rounding mode.
std::int64_t round_half_away(double x);

std::int8_t quantize_value(double x, const QuantParams& qp);
double dequantize_value(std::int8_t q, const QuantParams& qp);

// Non-finite elements are rejected with the flat index in the message.
Tensor quantize(const Tensor& t, const QuantParams& qp);
Tensor dequantize(const Tensor& t);

struct RangeObservation {
  double min = 0.0;
  double max = 0.0;
  std::uint64_t count = 0;

  bool empty() const { return count == 0; }
  bool operator==(const RangeObservation&) const = default;
};

RangeObservation merge(const RangeObservation& a, const RangeObservation& b);
RangeObservation observe(std::span<const float> values,
                         const RangeObservation& acc);
RangeObservation observe(const Tensor& t, const RangeObservation& acc = {});

// The range is widened to contain zero first, so zero is exactly
// representable. An all-zero range maps to scale 1, zero point 0.
QuantParams qparams_from_range(double min, double max, bool symmetric);

// M ~= mantissa * 2^-(31 + right_shift), mantissa in [2^30, 2^31).
struct RequantMultiplier {
  std::int32_t mantissa = 0;
  int right_shift = 0;

  bool operator==(const RequantMultiplier&) const = default;
};

// Requires 0 < m < 1.
RequantMultiplier quantize_multiplier(double m);
RequantMultiplier requant_multiplier(double s_in, double s_w, double s_out);

// round_half_away(acc * M) evaluated in 64-bit fixed point.
inline std::int64_t apply_multiplier(std::int64_t acc,
                                     const RequantMultiplier& m) {
  const int shift = 31 + m.right_shift;
  if (shift > 62) return 0;
  const std::int64_t prod = acc * static_cast<std::int64_t>(m.mantissa);
  const std::int64_t half = std::int64_t{1} << (shift - 1);
  if (prod >= 0) return (prod + half) >> shift;
  return -((-prod + half) >> shift);
}

}  // namespace dredge

#endif  // DREDGE_TENSOR_HPP_
