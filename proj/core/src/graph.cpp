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

#include "dredge/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "dredge/error.hpp"

namespace dredge {

namespace {

constexpr std::array<std::string_view, kNumClasses> kLabelNames = {
    "NoDR", "Mild", "Moderate", "Severe", "Proliferative"};

constexpr std::array<std::string_view, 10> kKindNames = {
    "conv2d", "dwsep_block", "channel_shuffle", "fire", "maxpool",
    "gap",    "relu",        "dense",           "flatten", "softmax"};

constexpr std::array<std::string_view, 2> kConvSlots = {"weight", "bias"};
constexpr std::array<std::string_view, 4> kDwSepSlots = {
    "dw_weight", "dw_bias", "pw_weight", "pw_bias"};
constexpr std::array<std::string_view, 6> kFireSlots = {
    "squeeze_weight", "squeeze_bias", "expand1_weight",
    "expand1_bias",   "expand3_weight", "expand3_bias"};

}  // namespace

std::string_view label_name(DRLabel label) {
  return kLabelNames.at(static_cast<std::size_t>(label));
}

std::optional<DRLabel> label_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kLabelNames.size(); ++i) {
    if (kLabelNames[i] == name) return static_cast<DRLabel>(i);
  }
  return std::nullopt;
}

const std::array<DRLabel, kNumClasses>& all_labels() {
  static const std::array<DRLabel, kNumClasses> labels = {
      DRLabel::kNoDR, DRLabel::kMild, DRLabel::kModerate, DRLabel::kSevere,
      DRLabel::kProliferative};
  return labels;
}

std::string_view precision_name(Precision p) {
  return p == Precision::kF32 ? "f32" : "i8";
}

std::string_view op_kind_name(OpKind kind) {
  return kKindNames.at(static_cast<std::size_t>(kind));
}

SoftmaxAttrs dr_softmax_attrs() {
  SoftmaxAttrs attrs;
  for (auto name : kLabelNames) attrs.labels.emplace_back(name);
  return attrs;
}

std::span<const std::string_view> weight_slots(OpKind kind) {
  switch (kind) {
    case OpKind::kConv2D:
    case OpKind::kDense:
      return kConvSlots;
    case OpKind::kDwSepBlock:
      return kDwSepSlots;
    case OpKind::kFire:
      return kFireSlots;
    default:
      return {};
  }
}

std::string ModelGraph::weight_name(std::uint32_t node_id,
                                    std::string_view slot) {
  char prefix[32];
  std::snprintf(prefix, sizeof(prefix), "node%03u.", node_id);
  return std::string(prefix) + std::string(slot);
}

const Tensor& ModelGraph::weight(std::uint32_t node_id,
                                 std::string_view slot) const {
  const std::string key = weight_name(node_id, slot);
  const auto it = weights.find(key);
  if (it == weights.end()) {
    throw ValidationError("missing weight tensor '" + key + "'");
  }
  return it->second;
}

std::int64_t ModelGraph::parameter_count() const {
  std::int64_t total = 0;
  for (const auto& [name, t] : weights) total += t.elements();
  return total;
}

bool ModelGraph::operator==(const ModelGraph& other) const {
  return precision == other.precision && input_shape == other.input_shape &&
         input_min == other.input_min && input_max == other.input_max &&
         input_qparams == other.input_qparams &&
         num_classes == other.num_classes && nodes == other.nodes &&
         weights == other.weights;
}

// ---------------------------------------------------------------------------
// Shape inference.

namespace {

class NodeChecker {
 public:
  NodeChecker(const ModelGraph& g, const OpNode& node, const TensorInfo& in)
      : g_(g), node_(node), in_(in), quantized_(g.precision == Precision::kI8) {}

  TensorInfo infer(std::optional<TensorInfo>* scratch) {
    const DType act = quantized_ ? DType::kI8 : DType::kF32;
    if (in_.dtype != act) {
      fail("input dtype " + std::string(dtype_name(in_.dtype)) +
           " does not match graph precision");
    }
    switch (node_.kind()) {
      case OpKind::kConv2D: {
        const auto& a = std::get<ConvAttrs>(node_.attrs);
        if (a.groups < 1 || in_.shape.c % a.groups != 0 ||
            a.out_channels % a.groups != 0) {
          fail("groups (" + std::to_string(a.groups) +
               ") must divide input channels (" + std::to_string(in_.shape.c) +
               ") and out_channels (" + std::to_string(a.out_channels) + ")");
        }
        check_weight("weight",
                     Shape{a.kernel_h, a.kernel_w, in_.shape.c / a.groups,
                           a.out_channels});
        check_bias("bias", a.out_channels);
        return requantized(conv2d_output_shape(in_.shape, {}, a));
      }
      case OpKind::kDwSepBlock: {
        const auto& a = std::get<DepthwiseSeparableAttrs>(node_.attrs);
        check_weight("dw_weight", Shape{3, 3, 1, in_.shape.c});
        check_bias("dw_bias", in_.shape.c);
        check_weight("pw_weight", Shape{1, 1, in_.shape.c, a.out_channels});
        check_bias("pw_bias", a.out_channels);
        const Shape mid = depthwise_separable_mid_shape(in_.shape, a);
        *scratch = internal(mid);
        Shape out = mid;
        out.c = a.out_channels;
        return requantized(out);
      }
      case OpKind::kChannelShuffle: {
        const auto& a = std::get<ShuffleAttrs>(node_.attrs);
        if (a.groups < 1 || in_.shape.c % a.groups != 0) {
          fail("channels (" + std::to_string(in_.shape.c) +
               ") not divisible by shuffle groups (" +
               std::to_string(a.groups) + ")");
        }
        return passthrough(in_.shape);
      }
      case OpKind::kFire: {
        const auto& a = std::get<FireAttrs>(node_.attrs);
        if (a.squeeze_channels < 1 || a.expand1_channels < 1 ||
            a.expand3_channels < 1) {
          fail("fire channel counts must be positive");
        }
        check_weight("squeeze_weight",
                     Shape{1, 1, in_.shape.c, a.squeeze_channels});
        check_bias("squeeze_bias", a.squeeze_channels);
        check_weight("expand1_weight",
                     Shape{1, 1, a.squeeze_channels, a.expand1_channels});
        check_bias("expand1_bias", a.expand1_channels);
        check_weight("expand3_weight",
                     Shape{3, 3, a.squeeze_channels, a.expand3_channels});
        check_bias("expand3_bias", a.expand3_channels);
        *scratch = internal(fire_squeeze_shape(in_.shape, a));
        Shape out = in_.shape;
        out.c = a.out_channels();
        return requantized(out);
      }
      case OpKind::kMaxPool:
        return passthrough(
            pool_output_shape(in_.shape, std::get<PoolAttrs>(node_.attrs)));
      case OpKind::kGlobalAvgPool:
        if (in_.shape.h < 1 || in_.shape.w < 1) fail("empty spatial extent");
        return requantized(Shape{in_.shape.n, 1, 1, in_.shape.c});
      case OpKind::kRelu:
        return passthrough(in_.shape);
      case OpKind::kDense: {
        const auto& a = std::get<DenseAttrs>(node_.attrs);
        if (in_.shape.h != 1 || in_.shape.w != 1) {
          fail("dense input must be flattened, got " + to_string(in_.shape));
        }
        const Tensor& w = g_.weight(node_.id, "weight");
        if (w.shape().w != in_.shape.c) {
          fail("dense inner dimension mismatch: input K = " +
               std::to_string(in_.shape.c) + ", weight K = " +
               std::to_string(w.shape().w));
        }
        check_weight("weight", Shape{1, 1, in_.shape.c, a.out_features});
        check_bias("bias", a.out_features);
        return requantized(Shape{in_.shape.n, 1, 1, a.out_features});
      }
      case OpKind::kFlatten:
        return passthrough(
            Shape{in_.shape.n, 1, 1, in_.shape.h * in_.shape.w * in_.shape.c});
      case OpKind::kSoftmax: {
        const auto& a = std::get<SoftmaxAttrs>(node_.attrs);
        if (a != dr_softmax_attrs()) {
          fail("softmax labels do not spell the DR label enumeration");
        }
        if (in_.shape.h != 1 || in_.shape.w != 1 ||
            in_.shape.c != g_.num_classes) {
          fail("softmax expects Nx1x1x" + std::to_string(g_.num_classes) +
               " logits, got " + to_string(in_.shape));
        }
        if (node_.output_qparams) fail("softmax output is always f32");
        return {in_.shape, DType::kF32, std::nullopt};
      }
    }
    fail("unknown node kind");
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError(what);
  }

  void check_weight(std::string_view slot, const Shape& expected) const {
    const Tensor& w = g_.weight(node_.id, slot);
    if (w.shape() != expected) {
      fail("weight '" + ModelGraph::weight_name(node_.id, slot) + "' has shape " +
           to_string(w.shape()) + ", expected " + to_string(expected));
    }
    const DType want = quantized_ ? DType::kI8 : DType::kF32;
    if (w.dtype() != want) {
      fail("weight '" + ModelGraph::weight_name(node_.id, slot) +
           "' has dtype " + std::string(dtype_name(w.dtype())));
    }
    if (quantized_ && (!w.qparams() || w.qparams()->zero_point != 0)) {
      fail("weight '" + ModelGraph::weight_name(node_.id, slot) +
           "' needs symmetric quantization parameters");
    }
  }

  void check_bias(std::string_view slot, std::int64_t channels) const {
    const Tensor& b = g_.weight(node_.id, slot);
    if (b.shape() != Shape{1, 1, 1, channels}) {
      fail("bias '" + ModelGraph::weight_name(node_.id, slot) + "' has shape " +
           to_string(b.shape()) + ", expected 1x1x1x" +
           std::to_string(channels));
    }
    const DType want = quantized_ ? DType::kI32 : DType::kF32;
    if (b.dtype() != want) {
      fail("bias '" + ModelGraph::weight_name(node_.id, slot) +
           "' has dtype " + std::string(dtype_name(b.dtype())));
    }
    if (quantized_ && !b.qparams()) {
      fail("bias '" + ModelGraph::weight_name(node_.id, slot) +
           "' is missing quantization parameters");
    }
  }

  TensorInfo requantized(const Shape& shape) const {
    if (!quantized_) {
      if (node_.output_qparams || node_.internal_qparams) {
        fail("f32 graph nodes cannot carry quantization parameters");
      }
      return {shape, DType::kF32, std::nullopt};
    }
    if (!node_.output_qparams) fail("i8 node is missing output qparams");
    check_qparams(*node_.output_qparams);
    return {shape, DType::kI8, node_.output_qparams};
  }

  TensorInfo internal(const Shape& shape) const {
    if (!quantized_) return {shape, DType::kF32, std::nullopt};
    if (!node_.internal_qparams) fail("i8 node is missing internal qparams");
    check_qparams(*node_.internal_qparams);
    return {shape, DType::kI8, node_.internal_qparams};
  }

  TensorInfo passthrough(const Shape& shape) const {
    if (!quantized_) {
      if (node_.output_qparams) fail("f32 graph nodes cannot carry qparams");
      return {shape, DType::kF32, std::nullopt};
    }
    if (node_.output_qparams != in_.qparams) {
      fail("pass-through node must carry its input's qparams");
    }
    return {shape, DType::kI8, in_.qparams};
  }

  const ModelGraph& g_;
  const OpNode& node_;
  const TensorInfo& in_;
  bool quantized_;
};

std::string node_label(std::size_t index, const OpNode& node) {
  return "node " + std::to_string(index) + " (" +
         std::string(op_kind_name(node.kind())) + ", id " +
         std::to_string(node.id) + ")";
}

}  // namespace

ShapeReport validate(const ModelGraph& graph) {
  ShapeReport report;
  if (graph.nodes.empty()) throw ValidationError("graph has no nodes");
  if (graph.input_shape.elements() <= 0) {
    throw ValidationError("graph input shape " + to_string(graph.input_shape) +
                          " is empty");
  }
  TensorInfo input{graph.input_shape, DType::kF32, std::nullopt};
  if (graph.precision == Precision::kI8) {
    if (!graph.input_qparams) {
      throw ValidationError("i8 graph is missing input qparams");
    }
    check_qparams(*graph.input_qparams);
    input.dtype = DType::kI8;
    input.qparams = graph.input_qparams;
  } else if (graph.input_qparams) {
    throw ValidationError("f32 graph cannot carry input qparams");
  }
  report.tensors.emplace(kInputTensor, input);

  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const OpNode& node = graph.nodes[i];
    const std::string where = node_label(i, node);
    if (node.inputs.size() != 1) {
      throw ValidationError(where + ": expected exactly one input, got " +
                            std::to_string(node.inputs.size()));
    }
    const auto in_it = report.tensors.find(node.inputs[0]);
    if (in_it == report.tensors.end()) {
      throw ValidationError(where + ": dangling input tensor id " +
                            std::to_string(node.inputs[0]));
    }
    if (report.tensors.count(node.output) != 0) {
      throw ValidationError(where + ": output tensor id " +
                            std::to_string(node.output) +
                            " is already defined");
    }
    std::optional<TensorInfo> scratch;
    try {
      NodeChecker checker(graph, node, in_it->second);
      report.tensors.emplace(node.output, checker.infer(&scratch));
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
    if (scratch) report.scratch.emplace(i, *scratch);
  }

  const OpNode& last = graph.nodes.back();
  if (last.kind() != OpKind::kSoftmax) {
    throw ValidationError("final node must be softmax, got " +
                          std::string(op_kind_name(last.kind())));
  }
  const Shape expected{graph.input_shape.n, 1, 1, graph.num_classes};
  if (report.tensors.at(last.output).shape != expected) {
    throw ValidationError("final tensor has shape " +
                          to_string(report.tensors.at(last.output).shape) +
                          ", expected " + to_string(expected));
  }
  report.output = last.output;
  return report;
}

// ---------------------------------------------------------------------------
// Activation memory plan.

namespace {

std::size_t align_up(std::size_t n) {
  return (n + kArenaAlignment - 1) / kArenaAlignment * kArenaAlignment;
}

}  // namespace

MemoryPlan plan_activations(const ModelGraph& graph, const ShapeReport& shapes) {
  MemoryPlan plan;
  std::map<TensorId, std::size_t> slot;
  const int last_node = static_cast<int>(graph.nodes.size()) - 1;
  auto add = [&](BufferKey key, std::size_t size, int first) {
    plan.buffers.push_back({key, 0, align_up(size), first, first});
    return plan.buffers.size() - 1;
  };
  slot[kInputTensor] = add({BufferKey::Kind::kTensor, kInputTensor},
                           shapes.tensors.at(kInputTensor).byte_size(), 0);
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const OpNode& node = graph.nodes[i];
    const int at = static_cast<int>(i);
    for (const TensorId in : node.inputs) {
      auto& b = plan.buffers[slot.at(in)];
      b.last_use = std::max(b.last_use, at);
    }
    slot[node.output] = add({BufferKey::Kind::kTensor, node.output},
                            shapes.tensors.at(node.output).byte_size(), at);
    if (const auto it = shapes.scratch.find(i); it != shapes.scratch.end()) {
      add({BufferKey::Kind::kScratch, static_cast<std::uint32_t>(i)},
          it->second.byte_size(), at);
    }
  }
  plan.buffers[slot.at(shapes.output)].last_use = last_node;
  const std::vector<BufferLifetime> lifetimes = plan.lifetimes();
  const ArenaAssignment assignment = plan_arena(lifetimes);
  for (std::size_t i = 0; i < plan.buffers.size(); ++i) {
    plan.buffers[i].offset = assignment.offsets[i];
  }
  plan.arena_bytes = assignment.arena_bytes;
  return plan;
}

// ---------------------------------------------------------------------------
// Executor.

struct Executor::Impl {
  const ModelGraph* graph = nullptr;
  ShapeReport shapes;
  MemoryPlan plan;
  std::vector<std::byte> storage;
  std::byte* base = nullptr;
  // Resolved per node, in weight_slots() order.
  std::vector<std::vector<TensorView>> node_weights;

  MutableTensorView buffer(BufferKey key, const TensorInfo& info) {
    const PlannedBuffer& b = plan.find(key);
    return {info.shape, info.dtype, info.qparams, base + b.offset};
  }

  MutableTensorView tensor(TensorId id) {
    return buffer({BufferKey::Kind::kTensor, id}, shapes.tensors.at(id));
  }

  MutableTensorView scratch(std::size_t node_index) {
    return buffer({BufferKey::Kind::kScratch,
                   static_cast<std::uint32_t>(node_index)},
                  shapes.scratch.at(node_index));
  }

  void load_input(const Tensor& input);
  void run_node(std::size_t index, const ActivationObserver& observer);
};

Executor::Executor(const ModelGraph& graph) : impl_(std::make_unique<Impl>()) {
  impl_->graph = &graph;
  impl_->shapes = validate(graph);
  impl_->plan = plan_activations(graph, impl_->shapes);
  impl_->storage.resize(impl_->plan.arena_bytes + kArenaAlignment);
  void* p = impl_->storage.data();
  std::size_t space = impl_->storage.size();
  impl_->base = static_cast<std::byte*>(
      std::align(kArenaAlignment, impl_->plan.arena_bytes, p, space));
  for (const OpNode& node : graph.nodes) {
    std::vector<TensorView> views;
    for (const auto slot : weight_slots(node.kind())) {
      views.push_back(graph.weight(node.id, slot).view());
    }
    impl_->node_weights.push_back(std::move(views));
  }
}

Executor::~Executor() = default;
Executor::Executor(Executor&&) noexcept = default;
Executor& Executor::operator=(Executor&&) noexcept = default;

const ShapeReport& Executor::shapes() const { return impl_->shapes; }
const MemoryPlan& Executor::plan() const { return impl_->plan; }

void Executor::Impl::load_input(const Tensor& input) {
  const TensorInfo& info = shapes.tensors.at(kInputTensor);
  if (input.shape() != info.shape) {
    throw ValidationError("input shape " + to_string(input.shape()) +
                          " does not match graph input " +
                          to_string(info.shape));
  }
  MutableTensorView dst = tensor(kInputTensor);
  if (input.dtype() == info.dtype) {
    if (input.qparams() != info.qparams) {
      throw ValidationError("i8 input qparams differ from the graph's");
    }
    std::memcpy(dst.data, input.raw(), input.byte_size());
    return;
  }
  if (input.dtype() != DType::kF32 || info.dtype != DType::kI8) {
    throw ValidationError("input dtype " +
                          std::string(dtype_name(input.dtype())) +
                          " does not match graph precision");
  }
  const Tensor q = quantize(input, *info.qparams);
  std::memcpy(dst.data, q.raw(), q.byte_size());
}

void Executor::Impl::run_node(std::size_t index,
                              const ActivationObserver& observer) {
  const OpNode& node = graph->nodes[index];
  const std::vector<TensorView>& w = node_weights[index];
  const TensorView in = tensor(node.inputs[0]).view();
  const MutableTensorView out = tensor(node.output);
  switch (node.kind()) {
    case OpKind::kConv2D:
      conv2d(in, w[0], w[1], std::get<ConvAttrs>(node.attrs), out);
      break;
    case OpKind::kDwSepBlock: {
      const MutableTensorView mid = scratch(index);
      depthwise_separable_block(in, {w[0], w[1], w[2], w[3]},
                                std::get<DepthwiseSeparableAttrs>(node.attrs),
                                mid, out);
      if (observer) observer(index, node, true, mid.view());
      break;
    }
    case OpKind::kChannelShuffle:
      channel_shuffle(in, std::get<ShuffleAttrs>(node.attrs).groups, out);
      break;
    case OpKind::kFire: {
      const MutableTensorView squeeze = scratch(index);
      fire(in, {w[0], w[1], w[2], w[3], w[4], w[5]},
           std::get<FireAttrs>(node.attrs), squeeze, out);
      if (observer) observer(index, node, true, squeeze.view());
      break;
    }
    case OpKind::kMaxPool:
      maxpool2d(in, std::get<PoolAttrs>(node.attrs), out);
      break;
    case OpKind::kGlobalAvgPool:
      global_avg_pool(in, out);
      break;
    case OpKind::kRelu:
      relu(in, out);
      break;
    case OpKind::kDense: {
      const auto& a = std::get<DenseAttrs>(node.attrs);
      dense(in, w[0], w[1], a.fused_relu, out);
      break;
    }
    case OpKind::kFlatten:
      std::memcpy(out.data, in.data, in.byte_size());
      break;
    case OpKind::kSoftmax:
      softmax(in, out);
      break;
  }
  if (observer) observer(index, node, false, out.view());
}

Tensor Executor::run(const Tensor& input, const ActivationObserver& observer) {
  impl_->load_input(input);
  for (std::size_t i = 0; i < impl_->graph->nodes.size(); ++i) {
    impl_->run_node(i, observer);
  }
  return to_tensor(impl_->tensor(impl_->shapes.output).view());
}

Tensor execute(const ModelGraph& graph, const Tensor& input) {
  Executor executor(graph);
  return executor.run(input);
}

DRLabel argmax_label(std::span<const float> probabilities) {
  if (probabilities.size() != kNumClasses) {
    throw ValidationError("expected " + std::to_string(kNumClasses) +
                          " class probabilities, got " +
                          std::to_string(probabilities.size()));
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < probabilities.size(); ++i) {
    if (probabilities[i] > probabilities[best]) best = i;
  }
  return static_cast<DRLabel>(best);
}

Classification classify(Executor& executor, const Tensor& image) {
  const Tensor probs = executor.run(image);
  const auto p = probs.data<float>();
  if (p.size() != kNumClasses) {
    throw ValidationError("classify expects a single image");
  }
  Classification result;
  std::copy(p.begin(), p.end(), result.probabilities.begin());
  result.label = argmax_label(p);
  return result;
}

Classification classify(const ModelGraph& graph, const Tensor& image) {
  Executor executor(graph);
  return classify(executor, image);
}

}  // namespace dredge
