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

// Model file format, little-endian throughout:
//
//   header   "EDRM" | u16 version = 1 | u8 precision | u8 reserved = 0
//            | u32 node count | u32 weight count
//   node     u8 kind | attrs (fixed width per kind) | output qparams block
//            | internal qparams block (dwsep_block and fire only)
//            | u8 input count | u32 input ids | u32 output id
//   weight   u16 name length | name | u8 dtype | u8 rank = 4 | u32 dims[4]
//            | u8 has qparams [| f32 scale | i32 zero point] | raw payload
//   trailer  u32 CRC-32 of everything before it
//
// A qparams block is u8 flag, f32 scale, i32 zero point (always 9 bytes).
// Weights are written in name order. Two reserved weights describe the
// input: "input.shape" (i32, n h w c) and "input.range" (f32 min, max; in i8
// files the quantized min and max carrying the input qparams).

#ifndef DREDGE_MODEL_IO_HPP_
#define DREDGE_MODEL_IO_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dredge/graph.hpp"

namespace dredge {

inline constexpr char kModelMagic[4] = {'E', 'D', 'R', 'M'};
inline constexpr std::uint16_t kModelFormatVersion = 1;
inline constexpr std::size_t kLabelFieldBytes = 16;
inline constexpr const char* kInputShapeWeight = "input.shape";
inline constexpr const char* kInputRangeWeight = "input.range";

// Both validate the graph first.
std::vector<std::uint8_t> serialize(const ModelGraph& graph);
void save_model(const ModelGraph& graph, const std::filesystem::path& path);

// Throws FormatError with a reason of bad magic, version mismatch,
// truncation, checksum failure or malformed content.
ModelGraph deserialize(std::span<const std::uint8_t> bytes,
                       std::string name = "model");
ModelGraph load_model(const std::filesystem::path& path);

// Exact file length, computed without serializing.
std::size_t serialized_size(const ModelGraph& graph);

// Sum of raw tensor payload bytes over the graph's weights.
std::size_t weight_payload_bytes(const ModelGraph& graph);

// Input range as stored: for i8 graphs the bounds are snapped to the
// quantization grid so they survive a save/load cycle unchanged.
float snap_to_grid(float value, const QuantParams& qp);

// Raw-tensor sidecar for f32 graphs. The manifest has one line per tensor,
//   <name> <n> <h> <w> <c> <file>
// with <file> relative to the manifest and holding little-endian f32 values.
// Blank lines and lines starting with '#' are ignored.
void export_weights(const ModelGraph& graph, const std::filesystem::path& dir);
void import_weights(ModelGraph& graph, const std::filesystem::path& manifest);

}  // namespace dredge

#endif  // DREDGE_MODEL_IO_HPP_
