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

#ifndef DREDGE_GRAPH_HPP_
#define DREDGE_GRAPH_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dredge/memory_plan.hpp"
#include "dredge/ops.hpp"
#include "dredge/tensor.hpp"

namespace dredge {

// Classifier output index i is label i. The order is part of the model file
// format and must never change.
enum class DRLabel : std::uint8_t {
  kNoDR = 0,
  kMild = 1,
  kModerate = 2,
  kSevere = 3,
  kProliferative = 4,
};

inline constexpr int kNumClasses = 5;

std::string_view label_name(DRLabel label);
std::optional<DRLabel> label_from_name(std::string_view name);
const std::array<DRLabel, kNumClasses>& all_labels();

enum class Precision : std::uint8_t {
  kF32 = 0,
  kI8 = 1,
};

std::string_view precision_name(Precision p);

enum class OpKind : std::uint8_t {
  kConv2D = 0,
  kDwSepBlock = 1,
  kChannelShuffle = 2,
  kFire = 3,
  kMaxPool = 4,
  kGlobalAvgPool = 5,
  kRelu = 6,
  kDense = 7,
  kFlatten = 8,
  kSoftmax = 9,
};

std::string_view op_kind_name(OpKind kind);

struct ShuffleAttrs {
  int groups = 1;
  bool operator==(const ShuffleAttrs&) const = default;
};
struct GapAttrs {
  bool operator==(const GapAttrs&) const = default;
};
struct ReluAttrs {
  bool operator==(const ReluAttrs&) const = default;
};
struct DenseAttrs {
  int out_features = 1;
  bool fused_relu = false;
  bool operator==(const DenseAttrs&) const = default;
};
struct FlattenAttrs {
  bool operator==(const FlattenAttrs&) const = default;
};
struct SoftmaxAttrs {
  // Class names in output order; must spell out the DRLabel enumeration.
  std::vector<std::string> labels;
  bool operator==(const SoftmaxAttrs&) const = default;
};

SoftmaxAttrs dr_softmax_attrs();

// Alternative index == OpKind value.
using NodeAttrs =
    std::variant<ConvAttrs, DepthwiseSeparableAttrs, ShuffleAttrs, FireAttrs,
                 PoolAttrs, GapAttrs, ReluAttrs, DenseAttrs, FlattenAttrs,
                 SoftmaxAttrs>;

using TensorId = std::uint32_t;
inline constexpr TensorId kInputTensor = 0;

struct OpNode {
  std::uint32_t id = 0;
  NodeAttrs attrs;
  std::vector<TensorId> inputs;
  TensorId output = 0;
  // i8 graphs only. internal_qparams covers the depthwise output of a
  // separable block and the squeeze output of a fire module.
  std::optional<QuantParams> output_qparams;
  std::optional<QuantParams> internal_qparams;

  OpKind kind() const { return static_cast<OpKind>(attrs.index()); }
  bool has_internal() const {
    return kind() == OpKind::kDwSepBlock || kind() == OpKind::kFire;
  }
  bool operator==(const OpNode&) const = default;
};

// Weight slots each node kind reads, in file order.
std::span<const std::string_view> weight_slots(OpKind kind);

struct ModelGraph {
  std::string name;
  Precision precision = Precision::kF32;
  Shape input_shape{1, 224, 224, 3};
  // Real-valued range the preprocessed input is normalized to.
  float input_min = 0.0f;
  float input_max = 1.0f;
  std::optional<QuantParams> input_qparams;  // i8 graphs
  int num_classes = kNumClasses;
  std::vector<OpNode> nodes;  // topological order
  std::map<std::string, Tensor> weights;

  static std::string weight_name(std::uint32_t node_id, std::string_view slot);
  const Tensor& weight(std::uint32_t node_id, std::string_view slot) const;

  // Count of weight elements over all node weights.
  std::int64_t parameter_count() const;

  bool operator==(const ModelGraph& other) const;
};

struct TensorInfo {
  Shape shape;
  DType dtype = DType::kF32;
  std::optional<QuantParams> qparams;

  std::size_t byte_size() const {
    return static_cast<std::size_t>(shape.elements()) * dtype_size(dtype);
  }
};

struct ShapeReport {
  std::map<TensorId, TensorInfo> tensors;
  // Keyed by node index; present for nodes with internal activations.
  std::map<std::size_t, TensorInfo> scratch;
  TensorId output = kInputTensor;
};

// Shape inference over every node. Throws ValidationError naming the first
// offending node.
ShapeReport validate(const ModelGraph& graph);

// Arena layout for every activation and composite scratch buffer of a
// validated graph. Sizes are rounded up to kArenaAlignment.
MemoryPlan plan_activations(const ModelGraph& graph, const ShapeReport& shapes);

// Called once per produced activation. `internal` marks a composite node's
// intermediate tensor.
using ActivationObserver =
    std::function<void(std::size_t node_index, const OpNode& node,
                       bool internal, const TensorView& value)>;

// Runs a validated graph in a single pre-planned arena. One executor per
// thread; the graph itself is shared read-only and must outlive the executor.
class Executor {
 public:
  explicit Executor(const ModelGraph& graph);
  ~Executor();
  Executor(Executor&&) noexcept;
  Executor& operator=(Executor&&) noexcept;

  // Returns N x 1 x 1 x num_classes probabilities. f32 input to an i8 graph
  // is quantized with the graph's input qparams.
  Tensor run(const Tensor& input, const ActivationObserver& observer = {});

  const ShapeReport& shapes() const;
  const MemoryPlan& plan() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

Tensor execute(const ModelGraph& graph, const Tensor& input);

struct Classification {
  DRLabel label = DRLabel::kNoDR;
  std::array<float, kNumClasses> probabilities{};
};

// Lowest index wins ties.
DRLabel argmax_label(std::span<const float> probabilities);

Classification classify(const ModelGraph& graph, const Tensor& image);
Classification classify(Executor& executor, const Tensor& image);

}  // namespace dredge

#endif  // DREDGE_GRAPH_HPP_
