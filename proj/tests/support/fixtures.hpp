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

// Scratch directories and synthetic image data for tests.

#ifndef DREDGE_TESTS_SUPPORT_FIXTURES_HPP_
#define DREDGE_TESTS_SUPPORT_FIXTURES_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dredge/evalbench.hpp"
#include "dredge/graph.hpp"
#include "dredge/random.hpp"

namespace dredge::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  std::filesystem::path path_;
};

RgbImage random_image(Rng& rng, int h, int w);

// root/<label>/img_<k>.png with counts[label] images each.
void write_dataset(const std::filesystem::path& root,
                   const std::array<int, kNumClasses>& counts, int size,
                   std::uint64_t seed);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

// Random preprocessed-looking input in [0, 1].
Tensor random_input(Rng& rng, Shape shape = {1, 224, 224, 3});

// Tiny classifier on a 1 x 8 x 8 x 3 input:
//   conv 3x3 same (3 -> 4, relu) -> maxpool 2x2 -> gap -> dense 4 -> 5 -> softmax
ModelGraph small_cnn(std::uint64_t seed);

// The same graph with a fire module in place of the convolution.
ModelGraph small_fire_net(std::uint64_t seed);

}  // namespace dredge::testing

#endif  // DREDGE_TESTS_SUPPORT_FIXTURES_HPP_
