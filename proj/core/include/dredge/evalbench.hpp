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

// Dataset ingestion, preprocessing, augmentation, splitting and the
// classification metrics.

#ifndef DREDGE_EVALBENCH_HPP_
#define DREDGE_EVALBENCH_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dredge/graph.hpp"

namespace dredge {

// Interleaved 8-bit RGB, row-major.
struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int h, int w, std::uint8_t fill = 0);

  std::uint8_t& at(int y, int x, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int y, int x, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool operator==(const RgbImage&) const = default;
};

struct LabeledImage {
  RgbImage image;
  DRLabel label = DRLabel::kNoDR;
  std::string source_id;
};

// Decodes png, jpg or bmp. Throws IoError if unreadable, FormatError if the
// content does not decode.
RgbImage load_image(const std::filesystem::path& path);
void save_image(const RgbImage& image, const std::filesystem::path& path);

bool is_image_file(const std::filesystem::path& path);

struct Dataset {
  std::vector<LabeledImage> images;  // sorted by path
  std::array<std::size_t, kNumClasses> counts{};
  std::size_t skipped = 0;  // files that failed to decode
  // Skipped files, and an imbalance note when the largest class holds more
  // than twice the smallest.
  std::vector<std::string> warnings;
};

// root/<label name>/*.{png,jpg,jpeg,bmp}. A missing or empty class
// directory contributes zero images; any other subdirectory is an error.
Dataset load_dataset(const std::filesystem::path& root);

// Every image file below dir, in path order, at most limit of them.
std::vector<RgbImage> load_image_files(const std::filesystem::path& dir,
                                       std::size_t limit);

// Indices into the dataset.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::uint64_t seed = 0;
};

// |train| = floor(0.8 N). Seeded uniform shuffle; with stratified set, each
// class is split on its own and the remainder is handed out by largest
// fractional part so the total still holds.
DatasetSplit split(std::span<const LabeledImage> dataset, std::uint64_t seed,
                   bool stratified = false);
std::size_t train_size(std::size_t n);

// Bilinear with half-pixel centers, edges clamped. Output is float in the
// input's 0..255 range.
std::vector<float> resize_bilinear(const RgbImage& image, int out_h, int out_w);

inline constexpr int kModelInputSize = 224;

// 1 x 224 x 224 x 3 f32 in [0, 1].
Tensor preprocess(const RgbImage& image);

struct AugmentSpec {
  bool flip_h = false;
  bool flip_v = false;
  int rot90_k = 0;  // counter-clockwise quarter turns, 0..3
  double contrast_factor = 1.0;  // 0.5..1.5
};

// Applied in order: flip_h, flip_v, rotation, contrast. Contrast maps
// p -> clamp(round(mean + f * (p - mean))) with mean over all channel values.
RgbImage augment(const RgbImage& image, const AugmentSpec& spec);
LabeledImage augment(const LabeledImage& image, const AugmentSpec& spec);

using ConfusionMatrix = std::array<std::array<std::uint64_t, kNumClasses>, kNumClasses>;

struct ClassificationReport {
  ConfusionMatrix confusion{};  // rows true, columns predicted
  std::uint64_t total = 0;
  double accuracy = 0.0;
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> recall{};
  std::array<double, kNumClasses> f1{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
};

// Rates with a zero denominator are 0. Macro averages run over all classes.
ClassificationReport report_from_confusion(const ConfusionMatrix& confusion);

ClassificationReport evaluate(const ModelGraph& graph,
                              std::span<const LabeledImage> images);

std::string format_report_text(const ClassificationReport& report);
// key=value per line; the matrix as five "confusion.<label>=" rows.
std::string format_report_kv(const ClassificationReport& report);

}  // namespace dredge

#endif  // DREDGE_EVALBENCH_HPP_
