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

#include "dredge/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <sstream>
#include <string>

#include "dredge/error.hpp"
#include "dredge/model_io.hpp"

namespace dredge {

namespace {

std::string where(std::size_t index, const OpNode& node) {
  return "node " + std::to_string(index) + " (" +
         std::string(op_kind_name(node.kind())) + ", id " +
         std::to_string(node.id) + ")";
}

std::vector<float> real_values(const TensorView& v) {
  if (v.dtype == DType::kF32) {
    const auto s = v.as<float>();
    return {s.begin(), s.end()};
  }
  const auto q = v.as<std::int8_t>();
  std::vector<float> out(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    out[i] = static_cast<float>(dequantize_value(q[i], *v.qparams));
  }
  return out;
}

QuantParams activation_qparams(const RangeObservation& r) {
  return qparams_from_range(r.min, r.max, false);
}

Tensor quantize_weights(const Tensor& w) {
  const RangeObservation r = observe(w);
  return quantize(w, qparams_from_range(r.min, r.max, true));
}

Tensor quantize_bias(const Tensor& b, double scale, const std::string& at) {
  const auto values = b.data<float>();
  std::vector<std::int32_t> q(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x = static_cast<double>(values[i]) / scale;
    if (!(std::abs(x) < 2147483647.0)) {
      throw ValidationError(at + ": bias " + std::to_string(i) +
                            " does not fit int32 at scale " + std::to_string(scale));
    }
    q[i] = static_cast<std::int32_t>(round_half_away(x));
  }
  return Tensor::i32(b.shape(), std::move(q),
                     QuantParams{static_cast<float>(scale), 0});
}

void check_multiplier(double m, const std::string& at, TensorId from,
                      TensorId to) {
  if (!(m > 0.0 && m < 1.0)) {
    std::ostringstream msg;
    msg << at << ": requantization multiplier " << m << " on edge tensor "
        << from << " -> tensor " << to << " is outside (0, 1)";
    throw ValidationError(msg.str());
  }
}

bool is_dead(const RangeObservation& r) { return r.min == 0.0 && r.max == 0.0; }

// Quantizes one conv-like weight/bias pair and checks its multiplier.
//
// When the input was constant zero during calibration, or the weights are
// all zero, the x * w term of the accumulator vanishes and the weight scale
// is a free choice. The degenerate scale of 1 those tensors get can push M
// to 1 or above; in that case the weight scale is picked to give M = 1/2
// instead of rejecting the edge.
void convert_linear(const ModelGraph& src, ModelGraph& dst, const OpNode& node,
                    std::string_view wslot, std::string_view bslot,
                    const QuantParams& in_qp, bool dead_input,
                    const QuantParams& out_qp, const std::string& at,
                    TensorId from, TensorId to) {
  const Tensor& wf = src.weight(node.id, wslot);
  Tensor w = quantize_weights(wf);
  double s_acc = static_cast<double>(in_qp.scale) * w.qparams()->scale;
  const RangeObservation wr = observe(wf);
  if (s_acc / out_qp.scale >= 1.0 && (dead_input || is_dead(wr))) {
    const double s_w = 0.5 * out_qp.scale / in_qp.scale;
    w = quantize(wf, QuantParams{static_cast<float>(s_w), 0});
    s_acc = static_cast<double>(in_qp.scale) * w.qparams()->scale;
  }
  Tensor b = quantize_bias(src.weight(node.id, bslot), s_acc, at);
  check_multiplier(s_acc / out_qp.scale, at, from, to);
  dst.weights[ModelGraph::weight_name(node.id, wslot)] = std::move(w);
  dst.weights[ModelGraph::weight_name(node.id, bslot)] = std::move(b);
}

}  // namespace

RangeMap merge(const RangeMap& a, const RangeMap& b) {
  RangeMap out = a;
  for (const auto& [id, r] : b.tensors) out.tensors[id] = merge(out.tensors[id], r);
  for (const auto& [i, r] : b.internal) out.internal[i] = merge(out.internal[i], r);
  return out;
}

RangeMap calibrate(const ModelGraph& graph, std::span<const Tensor> samples) {
  if (graph.precision != Precision::kF32) {
    throw ValidationError("calibration needs an f32 model");
  }
  if (samples.empty()) throw ValidationError("calibration needs at least one sample");
  Executor executor(graph);
  RangeMap ranges;
  for (const Tensor& sample : samples) {
    ranges.tensors[kInputTensor] = observe(sample, ranges.tensors[kInputTensor]);
    executor.run(sample, [&](std::size_t index, const OpNode& node, bool internal,
                             const TensorView& value) {
      RangeObservation& slot =
          internal ? ranges.internal[index] : ranges.tensors[node.output];
      slot = observe(value.as<float>(), slot);
    });
  }
  return ranges;
}

ModelGraph quantize_graph(const ModelGraph& graph, const RangeMap& ranges) {
  if (graph.precision != Precision::kF32) {
    throw ValidationError("model is already quantized");
  }
  const ShapeReport shapes = validate(graph);
  for (const auto& [id, info] : shapes.tensors) {
    const auto it = ranges.tensors.find(id);
    if (it == ranges.tensors.end() || it->second.empty()) {
      throw ValidationError("range map has no observation for tensor " +
                            std::to_string(id));
    }
  }
  for (const auto& [index, info] : shapes.scratch) {
    const auto it = ranges.internal.find(index);
    if (it == ranges.internal.end() || it->second.empty()) {
      throw ValidationError("range map has no observation for the internal "
                            "activation of node " + std::to_string(index));
    }
  }

  ModelGraph out;
  out.name = graph.name;
  out.precision = Precision::kI8;
  out.input_shape = graph.input_shape;
  out.num_classes = graph.num_classes;
  // The declared input range, not the observed one: preprocessing fixes it.
  const QuantParams in_qp =
      qparams_from_range(graph.input_min, graph.input_max, false);
  out.input_qparams = in_qp;
  out.input_min = snap_to_grid(graph.input_min, in_qp);
  out.input_max = snap_to_grid(graph.input_max, in_qp);

  std::map<TensorId, QuantParams> qp;
  qp[kInputTensor] = in_qp;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const OpNode& node = graph.nodes[i];
    OpNode q = node;
    const std::string at = where(i, node);
    const TensorId from = node.inputs[0];
    const QuantParams& qin = qp.at(from);
    const bool dead_in = is_dead(ranges.tensors.at(from));
    const QuantParams own = activation_qparams(ranges.tensors.at(node.output));
    switch (node.kind()) {
      case OpKind::kConv2D:
      case OpKind::kDense:
        q.output_qparams = own;
        convert_linear(graph, out, node, "weight", "bias", qin, dead_in, own, at,
                       from, node.output);
        break;
      case OpKind::kDwSepBlock: {
        const QuantParams mid = activation_qparams(ranges.internal.at(i));
        const bool dead_mid = is_dead(ranges.internal.at(i));
        q.internal_qparams = mid;
        q.output_qparams = own;
        convert_linear(graph, out, node, "dw_weight", "dw_bias", qin, dead_in, mid,
                       at + " depthwise", from, node.output);
        convert_linear(graph, out, node, "pw_weight", "pw_bias", mid, dead_mid, own,
                       at + " pointwise", from, node.output);
        break;
      }
      case OpKind::kFire: {
        // The output range already spans both expand branches, so they share
        // qparams and the concat needs no rescale.
        const QuantParams sq = activation_qparams(ranges.internal.at(i));
        const bool dead_sq = is_dead(ranges.internal.at(i));
        q.internal_qparams = sq;
        q.output_qparams = own;
        convert_linear(graph, out, node, "squeeze_weight", "squeeze_bias", qin,
                       dead_in, sq, at + " squeeze", from, node.output);
        convert_linear(graph, out, node, "expand1_weight", "expand1_bias", sq,
                       dead_sq, own, at + " expand1x1", from, node.output);
        convert_linear(graph, out, node, "expand3_weight", "expand3_bias", sq,
                       dead_sq, own, at + " expand3x3", from, node.output);
        break;
      }
      case OpKind::kGlobalAvgPool: {
        q.output_qparams = own;
        const Shape& s = shapes.tensors.at(from).shape;
        check_multiplier(static_cast<double>(qin.scale) /
                             (static_cast<double>(own.scale) * s.h * s.w),
                         at, from, node.output);
        break;
      }
      case OpKind::kChannelShuffle:
      case OpKind::kMaxPool:
      case OpKind::kRelu:
      case OpKind::kFlatten:
        q.output_qparams = qin;
        break;
      case OpKind::kSoftmax:
        q.output_qparams.reset();
        break;
    }
    if (q.output_qparams) qp[node.output] = *q.output_qparams;
    out.nodes.push_back(std::move(q));
  }
  validate(out);
  return out;
}

std::int64_t QuantReport::max_unit_error() const {
  std::int64_t m = 0;
  for (const auto e : layer_max_unit_error) m = std::max(m, e);
  return m;
}

QuantReport fidelity_report(const ModelGraph& reference,
                            const ModelGraph& candidate,
                            std::span<const Tensor> samples) {
  if (samples.empty()) throw ValidationError("fidelity report needs at least one sample");
  if (reference.nodes.size() != candidate.nodes.size()) {
    throw ValidationError("graphs differ: " + std::to_string(reference.nodes.size()) +
                          " vs " + std::to_string(candidate.nodes.size()) + " nodes");
  }
  for (std::size_t i = 0; i < reference.nodes.size(); ++i) {
    if (reference.nodes[i].kind() != candidate.nodes[i].kind()) {
      throw ValidationError("graphs differ at node " + std::to_string(i) + ": " +
                            std::string(op_kind_name(reference.nodes[i].kind())) +
                            " vs " +
                            std::string(op_kind_name(candidate.nodes[i].kind())));
    }
  }
  Executor ref_exec(reference);
  Executor cand_exec(candidate);
  const std::size_t n_nodes = reference.nodes.size();
  const TensorId ref_logits = reference.nodes.back().inputs[0];
  const TensorId cand_logits = candidate.nodes.back().inputs[0];

  QuantReport report;
  report.samples = samples.size();
  report.layer_max_unit_error.assign(n_nodes, 0);
  report.reference_bytes = serialized_size(reference);
  report.candidate_bytes = serialized_size(candidate);
  std::size_t agree = 0;
  std::vector<std::vector<float>> ref_outputs(n_nodes);
  std::vector<float> logits_a, logits_b;

  for (const Tensor& sample : samples) {
    const Tensor pa = ref_exec.run(
        sample, [&](std::size_t index, const OpNode& node, bool internal,
                    const TensorView& value) {
          if (internal) return;
          ref_outputs[index] = real_values(value);
          if (node.output == ref_logits) logits_a = ref_outputs[index];
        });
    const Tensor pb = cand_exec.run(
        sample, [&](std::size_t index, const OpNode& node, bool internal,
                    const TensorView& value) {
          if (internal) return;
          if (node.output == cand_logits) logits_b = real_values(value);
          if (value.dtype != DType::kI8) return;
          const auto q = value.as<std::int8_t>();
          const std::vector<float>& ref = ref_outputs[index];
          std::int64_t worst = report.layer_max_unit_error[index];
          for (std::size_t k = 0; k < q.size(); ++k) {
            const std::int64_t expect = quantize_value(ref[k], *value.qparams);
            worst = std::max<std::int64_t>(worst, std::llabs(expect - q[k]));
          }
          report.layer_max_unit_error[index] = worst;
        });
    if (argmax_label(pa.data<float>()) == argmax_label(pb.data<float>())) ++agree;
    for (std::size_t k = 0; k < logits_a.size() && k < logits_b.size(); ++k) {
      report.max_logit_error = std::max(
          report.max_logit_error,
          std::abs(static_cast<double>(logits_a[k]) - logits_b[k]));
    }
  }
  report.agreement = static_cast<double>(agree) / static_cast<double>(samples.size());
  return report;
}

}  // namespace dredge
