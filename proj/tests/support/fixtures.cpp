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

#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <iterator>
#include <sstream>
#include <system_error>

#include <unistd.h>

namespace dredge::testing {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("dredge_" + tag + "_" + std::to_string(::getpid()) + "_" +
           std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

RgbImage random_image(Rng& rng, int h, int w) {
  RgbImage img(h, w);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

void write_dataset(const fs::path& root, const std::array<int, kNumClasses>& counts,
                   int size, std::uint64_t seed) {
  Rng rng(seed);
  for (int label = 0; label < kNumClasses; ++label) {
    const fs::path dir = root / std::string(label_name(static_cast<DRLabel>(label)));
    fs::create_directories(dir);
    for (int k = 0; k < counts[static_cast<std::size_t>(label)]; ++k) {
      save_image(random_image(rng, size, size), dir / ("img_" + std::to_string(k) + ".png"));
    }
  }
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

Tensor random_input(Rng& rng, Shape shape) {
  std::vector<float> v(static_cast<std::size_t>(shape.elements()));
  for (float& x : v) x = static_cast<float>(rng.unit());
  return Tensor::f32(shape, std::move(v));
}

namespace {

Tensor uniform(Rng& rng, Shape s, double lo = -0.5, double hi = 0.5) {
  std::vector<float> v(static_cast<std::size_t>(s.elements()));
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return Tensor::f32(s, std::move(v));
}

ModelGraph head(ModelGraph g, Rng& rng, TensorId from, std::uint32_t next_id, int channels) {
  g.nodes.push_back({next_id, PoolAttrs{}, {from}, from + 1});
  g.nodes.push_back({next_id + 1, GapAttrs{}, {from + 1}, from + 2});
  g.nodes.push_back({next_id + 2, DenseAttrs{kNumClasses, false}, {from + 2}, from + 3});
  g.weights[ModelGraph::weight_name(next_id + 2, "weight")] =
      uniform(rng, {1, 1, channels, kNumClasses});
  g.weights[ModelGraph::weight_name(next_id + 2, "bias")] = uniform(rng, {1, 1, 1, kNumClasses});
  g.nodes.push_back({next_id + 3, dr_softmax_attrs(), {from + 3}, from + 4});
  return g;
}

}  // namespace

ModelGraph small_cnn(std::uint64_t seed) {
  Rng rng(seed);
  ModelGraph g;
  g.name = "small_cnn";
  g.input_shape = {1, 8, 8, 3};
  ConvAttrs c;
  c.kernel_h = c.kernel_w = 3;
  c.padding = Padding::kSame;
  c.out_channels = 4;
  c.fused_relu = true;
  g.nodes.push_back({0, c, {0}, 1});
  g.weights[ModelGraph::weight_name(0, "weight")] = uniform(rng, {3, 3, 3, 4});
  g.weights[ModelGraph::weight_name(0, "bias")] = uniform(rng, {1, 1, 1, 4});
  return head(std::move(g), rng, 1, 1, 4);
}

ModelGraph small_fire_net(std::uint64_t seed) {
  Rng rng(seed);
  ModelGraph g;
  g.name = "small_fire_net";
  g.input_shape = {1, 8, 8, 3};
  const FireAttrs f{2, 3, 3};
  g.nodes.push_back({0, f, {0}, 1});
  g.weights[ModelGraph::weight_name(0, "squeeze_weight")] = uniform(rng, {1, 1, 3, 2});
  // A dead squeeze (all zero after the relu) would get scale 1 and push the
  // expand multipliers above one, so its bias is kept positive.
  g.weights[ModelGraph::weight_name(0, "squeeze_bias")] = uniform(rng, {1, 1, 1, 2}, 0.25, 0.75);
  g.weights[ModelGraph::weight_name(0, "expand1_weight")] = uniform(rng, {1, 1, 2, 3});
  g.weights[ModelGraph::weight_name(0, "expand1_bias")] = uniform(rng, {1, 1, 1, 3}, 0.25, 0.75);
  g.weights[ModelGraph::weight_name(0, "expand3_weight")] = uniform(rng, {3, 3, 2, 3});
  g.weights[ModelGraph::weight_name(0, "expand3_bias")] = uniform(rng, {1, 1, 1, 3}, 0.25, 0.75);
  return head(std::move(g), rng, 1, 1, 6);
}

}  // namespace dredge::testing
