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

// Post-training int8 conversion. Activations get asymmetric per-tensor
// qparams from observed min/max; weights get symmetric per-tensor qparams;
// biases become int32 at scale s_in * s_w.

#ifndef DREDGE_QUANTIZER_HPP_
#define DREDGE_QUANTIZER_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "dredge/graph.hpp"

namespace dredge {

struct RangeMap {
  std::map<TensorId, RangeObservation> tensors;     // includes the input
  std::map<std::size_t, RangeObservation> internal;  // by node index

  bool operator==(const RangeMap&) const = default;
};

RangeMap merge(const RangeMap& a, const RangeMap& b);

// Runs the f32 graph over every sample and records each activation's range.
RangeMap calibrate(const ModelGraph& graph, std::span<const Tensor> samples);

// Throws ValidationError for an incomplete range map, or when a
// requantization multiplier falls outside (0, 1); the message names the
// node and the tensor edge.
ModelGraph quantize_graph(const ModelGraph& graph, const RangeMap& ranges);

struct QuantReport {
  std::size_t samples = 0;
  double agreement = 0.0;          // fraction of samples with equal top-1
  double max_logit_error = 0.0;    // max |logit_a - logit_b| in real units
  // Per node: max |q_b - quantize(a)| over the node output, in units of the
  // candidate's output scale. Zero for nodes with f32 output.
  std::vector<std::int64_t> layer_max_unit_error;
  std::size_t reference_bytes = 0;  // serialized size of the reference
  std::size_t candidate_bytes = 0;

  std::int64_t max_unit_error() const;
};

// Compares a candidate graph (normally the i8 conversion) against the
// reference it came from. Both must have the same node kinds in order.
QuantReport fidelity_report(const ModelGraph& reference,
                            const ModelGraph& candidate,
                            std::span<const Tensor> samples);

}  // namespace dredge

#endif  // DREDGE_QUANTIZER_HPP_
