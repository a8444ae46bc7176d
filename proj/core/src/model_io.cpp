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

#include "dredge/model_io.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <utility>

#include "dredge/error.hpp"

namespace dredge {

namespace {

constexpr std::size_t kHeaderBytes = 4 + 2 + 1 + 1 + 4 + 4;
constexpr std::size_t kQParamsBytes = 1 + 4 + 4;
constexpr std::size_t kTrailerBytes = 4;

std::size_t attrs_bytes(const NodeAttrs& attrs) {
  switch (static_cast<OpKind>(attrs.index())) {
    case OpKind::kConv2D: return 2 * 4 + 1 + 1 + 4 + 4;
    case OpKind::kDwSepBlock: return 2 * 2 + 4;
    case OpKind::kChannelShuffle: return 4;
    case OpKind::kFire: return 3 * 4;
    case OpKind::kMaxPool: return 4 * 2;
    case OpKind::kGlobalAvgPool:
    case OpKind::kRelu:
    case OpKind::kFlatten: return 0;
    case OpKind::kDense: return 4 + 1;
    case OpKind::kSoftmax:
      return 1 + kLabelFieldBytes * std::get<SoftmaxAttrs>(attrs).labels.size();
  }
  return 0;
}

std::size_t node_bytes(const OpNode& node) {
  return 1 + attrs_bytes(node.attrs) + kQParamsBytes +
         (node.has_internal() ? kQParamsBytes : 0) + 1 +
         4 * node.inputs.size() + 4;
}

std::size_t weight_bytes(const std::string& name, const Tensor& t) {
  return 2 + name.size() + 1 + 1 + 4 * 4 + 1 + (t.qparams() ? 8 : 0) +
         t.byte_size();
}

// The on-disk weight table: graph weights plus the input metadata.
std::map<std::string, Tensor> weight_table(const ModelGraph& g) {
  std::map<std::string, Tensor> table = g.weights;
  const Shape& s = g.input_shape;
  table[kInputShapeWeight] = Tensor::i32(
      {1, 1, 1, 4}, {static_cast<std::int32_t>(s.n), static_cast<std::int32_t>(s.h),
                     static_cast<std::int32_t>(s.w), static_cast<std::int32_t>(s.c)});
  if (g.precision == Precision::kI8) {
    const QuantParams& qp = *g.input_qparams;
    table[kInputRangeWeight] =
        Tensor::i8({1, 1, 1, 2},
                   {quantize_value(g.input_min, qp), quantize_value(g.input_max, qp)},
                   qp);
  } else {
    table[kInputRangeWeight] =
        Tensor::f32({1, 1, 1, 2}, {g.input_min, g.input_max});
  }
  return table;
}

class Writer {
 public:
  explicit Writer(std::size_t reserve) { buf_.reserve(reserve); }

  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto out = bytes_.subspan(pos_, n);
    pos_ += n;
    return out;
  }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(FormatError::Reason::kTruncated,
                        "model file truncated at byte " + std::to_string(pos_));
    }
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{bytes_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

[[noreturn]] void malformed(const std::string& what) {
  throw FormatError(FormatError::Reason::kMalformed, what);
}

std::uint32_t checked_u32(std::int64_t v, const char* what) {
  if (v < 0 || v > static_cast<std::int64_t>(UINT32_MAX)) {
    throw ValidationError(std::string(what) + " out of range for the model file");
  }
  return static_cast<std::uint32_t>(v);
}

std::uint16_t checked_u16(int v, const char* what) {
  if (v < 0 || v > 0xFFFF) {
    throw ValidationError(std::string(what) + " out of range for the model file");
  }
  return static_cast<std::uint16_t>(v);
}

void write_qparams(Writer& w, const std::optional<QuantParams>& qp) {
  w.u8(qp ? 1 : 0);
  w.f32(qp ? qp->scale : 0.0f);
  w.i32(qp ? qp->zero_point : 0);
}

std::optional<QuantParams> read_qparams(Reader& r) {
  const std::uint8_t flag = r.u8();
  QuantParams qp;
  qp.scale = r.f32();
  qp.zero_point = r.i32();
  if (flag > 1) malformed("qparams flag must be 0 or 1");
  if (flag == 0) return std::nullopt;
  return qp;
}

void write_attrs(Writer& w, const NodeAttrs& attrs) {
  switch (static_cast<OpKind>(attrs.index())) {
    case OpKind::kConv2D: {
      const auto& a = std::get<ConvAttrs>(attrs);
      w.u16(checked_u16(a.kernel_h, "kernel height"));
      w.u16(checked_u16(a.kernel_w, "kernel width"));
      w.u16(checked_u16(a.stride_h, "stride height"));
      w.u16(checked_u16(a.stride_w, "stride width"));
      w.u8(static_cast<std::uint8_t>(a.padding));
      w.u8(a.fused_relu ? 1 : 0);
      w.u32(checked_u32(a.groups, "groups"));
      w.u32(checked_u32(a.out_channels, "out_channels"));
      break;
    }
    case OpKind::kDwSepBlock: {
      const auto& a = std::get<DepthwiseSeparableAttrs>(attrs);
      w.u16(checked_u16(a.stride_h, "stride height"));
      w.u16(checked_u16(a.stride_w, "stride width"));
      w.u32(checked_u32(a.out_channels, "out_channels"));
      break;
    }
    case OpKind::kChannelShuffle:
      w.u32(checked_u32(std::get<ShuffleAttrs>(attrs).groups, "groups"));
      break;
    case OpKind::kFire: {
      const auto& a = std::get<FireAttrs>(attrs);
      w.u32(checked_u32(a.squeeze_channels, "squeeze channels"));
      w.u32(checked_u32(a.expand1_channels, "expand1 channels"));
      w.u32(checked_u32(a.expand3_channels, "expand3 channels"));
      break;
    }
    case OpKind::kMaxPool: {
      const auto& a = std::get<PoolAttrs>(attrs);
      w.u16(checked_u16(a.window_h, "window height"));
      w.u16(checked_u16(a.window_w, "window width"));
      w.u16(checked_u16(a.stride_h, "stride height"));
      w.u16(checked_u16(a.stride_w, "stride width"));
      break;
    }
    case OpKind::kGlobalAvgPool:
    case OpKind::kRelu:
    case OpKind::kFlatten:
      break;
    case OpKind::kDense: {
      const auto& a = std::get<DenseAttrs>(attrs);
      w.u32(checked_u32(a.out_features, "out_features"));
      w.u8(a.fused_relu ? 1 : 0);
      break;
    }
    case OpKind::kSoftmax: {
      const auto& a = std::get<SoftmaxAttrs>(attrs);
      if (a.labels.size() > 255) throw ValidationError("too many softmax labels");
      w.u8(static_cast<std::uint8_t>(a.labels.size()));
      for (const std::string& label : a.labels) {
        if (label.size() >= kLabelFieldBytes) {
          throw ValidationError("label '" + label + "' longer than " +
                                std::to_string(kLabelFieldBytes - 1) + " bytes");
        }
        char field[kLabelFieldBytes] = {};
        std::memcpy(field, label.data(), label.size());
        w.bytes(field, kLabelFieldBytes);
      }
      break;
    }
  }
}

bool read_flag(Reader& r, const char* what) {
  const std::uint8_t v = r.u8();
  if (v > 1) malformed(std::string(what) + " flag must be 0 or 1");
  return v == 1;
}

int read_positive(std::uint32_t v, const char* what) {
  if (v == 0 || v > static_cast<std::uint32_t>(INT32_MAX)) {
    malformed(std::string(what) + " out of range");
  }
  return static_cast<int>(v);
}

NodeAttrs read_attrs(Reader& r, std::uint8_t kind) {
  switch (static_cast<OpKind>(kind)) {
    case OpKind::kConv2D: {
      ConvAttrs a;
      a.kernel_h = read_positive(r.u16(), "kernel height");
      a.kernel_w = read_positive(r.u16(), "kernel width");
      a.stride_h = read_positive(r.u16(), "stride height");
      a.stride_w = read_positive(r.u16(), "stride width");
      const std::uint8_t pad = r.u8();
      if (pad > 1) malformed("unknown padding mode " + std::to_string(pad));
      a.padding = static_cast<Padding>(pad);
      a.fused_relu = read_flag(r, "fused relu");
      a.groups = read_positive(r.u32(), "groups");
      a.out_channels = read_positive(r.u32(), "out_channels");
      return a;
    }
    case OpKind::kDwSepBlock: {
      DepthwiseSeparableAttrs a;
      a.stride_h = read_positive(r.u16(), "stride height");
      a.stride_w = read_positive(r.u16(), "stride width");
      a.out_channels = read_positive(r.u32(), "out_channels");
      return a;
    }
    case OpKind::kChannelShuffle:
      return ShuffleAttrs{read_positive(r.u32(), "groups")};
    case OpKind::kFire: {
      FireAttrs a;
      a.squeeze_channels = read_positive(r.u32(), "squeeze channels");
      a.expand1_channels = read_positive(r.u32(), "expand1 channels");
      a.expand3_channels = read_positive(r.u32(), "expand3 channels");
      return a;
    }
    case OpKind::kMaxPool: {
      PoolAttrs a;
      a.window_h = read_positive(r.u16(), "window height");
      a.window_w = read_positive(r.u16(), "window width");
      a.stride_h = read_positive(r.u16(), "stride height");
      a.stride_w = read_positive(r.u16(), "stride width");
      return a;
    }
    case OpKind::kGlobalAvgPool: return GapAttrs{};
    case OpKind::kRelu: return ReluAttrs{};
    case OpKind::kFlatten: return FlattenAttrs{};
    case OpKind::kDense: {
      DenseAttrs a;
      a.out_features = read_positive(r.u32(), "out_features");
      a.fused_relu = read_flag(r, "fused relu");
      return a;
    }
    case OpKind::kSoftmax: {
      SoftmaxAttrs a;
      const std::uint8_t n = r.u8();
      for (int i = 0; i < n; ++i) {
        const auto field = r.take(kLabelFieldBytes);
        const auto* chars = reinterpret_cast<const char*>(field.data());
        const std::size_t len = strnlen(chars, kLabelFieldBytes);
        if (len == kLabelFieldBytes) malformed("label field is not terminated");
        a.labels.emplace_back(chars, len);
      }
      return a;
    }
  }
  malformed("unknown node kind " + std::to_string(kind));
}

void write_tensor(Writer& w, const std::string& name, const Tensor& t) {
  if (name.size() > 0xFFFF) throw ValidationError("weight name too long");
  w.u16(static_cast<std::uint16_t>(name.size()));
  w.bytes(name.data(), name.size());
  w.u8(static_cast<std::uint8_t>(t.dtype()));
  w.u8(4);
  const Shape& s = t.shape();
  for (const std::int64_t d : {s.n, s.h, s.w, s.c}) w.u32(checked_u32(d, "tensor extent"));
  w.u8(t.qparams() ? 1 : 0);
  if (t.qparams()) {
    w.f32(t.qparams()->scale);
    w.i32(t.qparams()->zero_point);
  }
  switch (t.dtype()) {
    case DType::kF32:
      for (const float v : t.data<float>()) w.f32(v);
      break;
    case DType::kI8:
      w.bytes(t.raw(), t.byte_size());
      break;
    case DType::kI32:
      for (const std::int32_t v : t.data<std::int32_t>()) w.i32(v);
      break;
  }
}

std::pair<std::string, Tensor> read_tensor(Reader& r) {
  const std::uint16_t name_len = r.u16();
  const auto name_bytes = r.take(name_len);
  std::string name(reinterpret_cast<const char*>(name_bytes.data()), name_len);
  const std::uint8_t dtype_raw = r.u8();
  if (dtype_raw > 2) malformed("weight '" + name + "' has unknown dtype");
  const auto dtype = static_cast<DType>(dtype_raw);
  const std::uint8_t rank = r.u8();
  if (rank != 4) malformed("weight '" + name + "' has rank " + std::to_string(rank));
  Shape s;
  s.n = r.u32();
  s.h = r.u32();
  s.w = r.u32();
  s.c = r.u32();
  std::optional<QuantParams> qp;
  if (read_flag(r, "weight qparams")) {
    QuantParams q;
    q.scale = r.f32();
    q.zero_point = r.i32();
    qp = q;
  }
  if ((dtype == DType::kI8) != qp.has_value() && dtype != DType::kI32) {
    malformed("weight '" + name + "' has inconsistent qparams");
  }
  try {
    if (qp) check_qparams(*qp);
  } catch (const ValidationError& e) {
    malformed("weight '" + name + "': " + e.what());
  }
  const auto count = static_cast<std::uint64_t>(s.elements());
  const std::uint64_t bytes = count * dtype_size(dtype);
  // Bounded by the remaining input before allocating.
  const auto payload = r.take(static_cast<std::size_t>(bytes));
  Tensor t(s, dtype, qp);
  switch (dtype) {
    case DType::kF32: {
      auto out = t.data<float>();
      for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= std::uint32_t{payload[4 * i + b]} << (8 * b);
        out[i] = std::bit_cast<float>(bits);
      }
      break;
    }
    case DType::kI8:
      std::memcpy(t.raw(), payload.data(), payload.size());
      break;
    case DType::kI32: {
      auto out = t.data<std::int32_t>();
      for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) bits |= std::uint32_t{payload[4 * i + b]} << (8 * b);
        out[i] = static_cast<std::int32_t>(bits);
      }
      break;
    }
  }
  return {std::move(name), std::move(t)};
}

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in pieces.
  std::size_t off = 0;
  while (off < bytes.size()) {
    const std::size_t n = std::min<std::size_t>(bytes.size() - off, 1u << 30);
    crc = crc32(crc, bytes.data() + off, static_cast<uInt>(n));
    off += n;
  }
  return static_cast<std::uint32_t>(crc);
}

// Parses the body; assumes magic and version were checked.
ModelGraph parse(std::span<const std::uint8_t> bytes, std::string name) {
  Reader r(bytes);
  r.take(6);
  ModelGraph g;
  g.name = std::move(name);
  const std::uint8_t precision = r.u8();
  if (precision > 1) malformed("unknown precision " + std::to_string(precision));
  g.precision = static_cast<Precision>(precision);
  if (r.u8() != 0) malformed("reserved header byte is not zero");
  const std::uint32_t node_count = r.u32();
  const std::uint32_t weight_count = r.u32();
  for (std::uint32_t i = 0; i < node_count; ++i) {
    OpNode node;
    node.id = i;
    const std::uint8_t kind = r.u8();
    node.attrs = read_attrs(r, kind);
    node.output_qparams = read_qparams(r);
    if (node.has_internal()) node.internal_qparams = read_qparams(r);
    const std::uint8_t inputs = r.u8();
    for (int k = 0; k < inputs; ++k) node.inputs.push_back(r.u32());
    node.output = r.u32();
    g.nodes.push_back(std::move(node));
  }
  std::optional<Tensor> shape_meta;
  std::optional<Tensor> range_meta;
  std::string previous;
  for (std::uint32_t i = 0; i < weight_count; ++i) {
    auto [wname, tensor] = read_tensor(r);
    if (i > 0 && wname <= previous) malformed("weights out of order at '" + wname + "'");
    previous = wname;
    if (wname == kInputShapeWeight) {
      shape_meta = std::move(tensor);
    } else if (wname == kInputRangeWeight) {
      range_meta = std::move(tensor);
    } else {
      g.weights.emplace(std::move(wname), std::move(tensor));
    }
  }
  if (bytes.size() - r.position() != kTrailerBytes) {
    malformed("unexpected bytes after the weight table");
  }
  if (!shape_meta || shape_meta->dtype() != DType::kI32 ||
      shape_meta->elements() != 4) {
    malformed("missing or malformed input.shape");
  }
  const auto dims = shape_meta->data<std::int32_t>();
  g.input_shape = {dims[0], dims[1], dims[2], dims[3]};
  if (!range_meta || range_meta->elements() != 2) {
    malformed("missing or malformed input.range");
  }
  if (g.precision == Precision::kI8) {
    if (range_meta->dtype() != DType::kI8) malformed("i8 model needs an i8 input.range");
    const QuantParams qp = *range_meta->qparams();
    const auto q = range_meta->data<std::int8_t>();
    g.input_qparams = qp;
    g.input_min = static_cast<float>(dequantize_value(q[0], qp));
    g.input_max = static_cast<float>(dequantize_value(q[1], qp));
  } else {
    if (range_meta->dtype() != DType::kF32) malformed("f32 model needs an f32 input.range");
    g.input_min = range_meta->data<float>()[0];
    g.input_max = range_meta->data<float>()[1];
  }
  if (!g.nodes.empty() && g.nodes.back().kind() == OpKind::kSoftmax) {
    g.num_classes =
        static_cast<int>(std::get<SoftmaxAttrs>(g.nodes.back().attrs).labels.size());
  }
  try {
    validate(g);
  } catch (const ValidationError& e) {
    malformed(std::string("model does not validate: ") + e.what());
  }
  return g;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return data;
}

void write_file(const std::filesystem::path& path, const void* data, std::size_t n) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

}  // namespace

float snap_to_grid(float value, const QuantParams& qp) {
  return static_cast<float>(dequantize_value(quantize_value(value, qp), qp));
}

std::size_t serialized_size(const ModelGraph& graph) {
  std::size_t total = kHeaderBytes + kTrailerBytes;
  for (const OpNode& node : graph.nodes) total += node_bytes(node);
  for (const auto& [name, t] : weight_table(graph)) total += weight_bytes(name, t);
  return total;
}

std::size_t weight_payload_bytes(const ModelGraph& graph) {
  std::size_t total = 0;
  for (const auto& [name, t] : graph.weights) total += t.byte_size();
  return total;
}

std::vector<std::uint8_t> serialize(const ModelGraph& graph) {
  validate(graph);
  const auto table = weight_table(graph);
  Writer w(serialized_size(graph));
  w.bytes(kModelMagic, 4);
  w.u16(kModelFormatVersion);
  w.u8(static_cast<std::uint8_t>(graph.precision));
  w.u8(0);
  w.u32(static_cast<std::uint32_t>(graph.nodes.size()));
  w.u32(static_cast<std::uint32_t>(table.size()));
  for (const OpNode& node : graph.nodes) {
    w.u8(static_cast<std::uint8_t>(node.kind()));
    write_attrs(w, node.attrs);
    write_qparams(w, node.output_qparams);
    if (node.has_internal()) write_qparams(w, node.internal_qparams);
    w.u8(static_cast<std::uint8_t>(node.inputs.size()));
    for (const TensorId id : node.inputs) w.u32(id);
    w.u32(node.output);
  }
  for (const auto& [name, t] : table) write_tensor(w, name, t);
  w.u32(crc_of(w.buffer()));
  return std::move(w.buffer());
}

ModelGraph deserialize(std::span<const std::uint8_t> bytes, std::string name) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kModelMagic, 4) != 0) {
    throw FormatError(FormatError::Reason::kBadMagic, "not a model file (bad magic)");
  }
  if (bytes.size() < kHeaderBytes + kTrailerBytes) {
    throw FormatError(FormatError::Reason::kTruncated, "model file truncated in header");
  }
  const std::uint16_t version =
      static_cast<std::uint16_t>(bytes[4] | (bytes[5] << 8));
  if (version != kModelFormatVersion) {
    throw FormatError(FormatError::Reason::kVersionMismatch,
                      "model format version " + std::to_string(version) +
                          ", expected " + std::to_string(kModelFormatVersion));
  }
  const auto body = bytes.first(bytes.size() - kTrailerBytes);
  const auto tail = bytes.last(kTrailerBytes);
  const std::uint32_t stored = tail[0] | (tail[1] << 8) | (tail[2] << 16) |
                               (static_cast<std::uint32_t>(tail[3]) << 24);
  if (crc_of(body) != stored) {
    // A short file also fails the checksum; report it as truncation when the
    // structure runs out of bytes.
    try {
      parse(bytes, name);
    } catch (const FormatError& e) {
      if (e.reason() == FormatError::Reason::kTruncated) throw;
    }
    throw FormatError(FormatError::Reason::kChecksum, "model file checksum mismatch");
  }
  return parse(bytes, std::move(name));
}

void save_model(const ModelGraph& graph, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = serialize(graph);
  write_file(path, bytes.data(), bytes.size());
}

ModelGraph load_model(const std::filesystem::path& path) {
  const std::string data = read_file(path);
  return deserialize(
      std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()),
      path.stem().string());
}

void export_weights(const ModelGraph& graph, const std::filesystem::path& dir) {
  if (graph.precision != Precision::kF32) {
    throw ValidationError("weight export needs an f32 model");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  std::ostringstream manifest;
  manifest << "# name n h w c file\n";
  for (const auto& [name, t] : graph.weights) {
    const std::string file = name + ".f32";
    Writer w(t.byte_size());
    for (const float v : t.data<float>()) w.f32(v);
    write_file(dir / file, w.buffer().data(), w.buffer().size());
    const Shape& s = t.shape();
    manifest << name << ' ' << s.n << ' ' << s.h << ' ' << s.w << ' ' << s.c
             << ' ' << file << '\n';
  }
  const std::string text = manifest.str();
  write_file(dir / "manifest.txt", text.data(), text.size());
}

void import_weights(ModelGraph& graph, const std::filesystem::path& manifest) {
  if (graph.precision != Precision::kF32) {
    throw ValidationError("weight import needs an f32 model");
  }
  std::istringstream lines(read_file(manifest));
  std::string line;
  int line_no = 0;
  std::map<std::string, Tensor> replaced;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string name, file;
    Shape s;
    if (!(fields >> name >> s.n >> s.h >> s.w >> s.c >> file)) {
      throw FormatError(FormatError::Reason::kMalformed,
                        manifest.string() + ":" + std::to_string(line_no) +
                            ": expected '<name> <n> <h> <w> <c> <file>'");
    }
    const auto it = graph.weights.find(name);
    if (it == graph.weights.end()) {
      throw ValidationError(manifest.string() + ":" + std::to_string(line_no) +
                            ": model has no weight '" + name + "'");
    }
    if (it->second.shape() != s) {
      throw ValidationError(manifest.string() + ":" + std::to_string(line_no) +
                            ": '" + name + "' is " + to_string(it->second.shape()) +
                            " in the model, manifest says " + to_string(s));
    }
    const std::string raw = read_file(manifest.parent_path() / file);
    if (raw.size() != static_cast<std::size_t>(s.elements()) * 4) {
      throw ValidationError(file + ": expected " + std::to_string(s.elements() * 4) +
                            " bytes, found " + std::to_string(raw.size()));
    }
    std::vector<float> values(static_cast<std::size_t>(s.elements()));
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) {
        bits |= std::uint32_t{static_cast<std::uint8_t>(raw[4 * i + b])} << (8 * b);
      }
      values[i] = std::bit_cast<float>(bits);
      if (!std::isfinite(values[i])) {
        throw ValidationError(file + ": non-finite value at index " + std::to_string(i));
      }
    }
    replaced[name] = Tensor::f32(s, std::move(values));
  }
  for (auto& [name, t] : replaced) graph.weights[name] = std::move(t);
}

}  // namespace dredge
