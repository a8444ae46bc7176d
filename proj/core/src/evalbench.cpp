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

#include "dredge/evalbench.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "dredge/error.hpp"
#include "dredge/random.hpp"

namespace dredge {

namespace fs = std::filesystem;

RgbImage::RgbImage(int h, int w, std::uint8_t fill)
    : height(h),
      width(w),
      pixels(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * 3, fill) {
  if (h < 0 || w < 0) throw ValidationError("image extents must be non-negative");
}

bool is_image_file(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

RgbImage load_image(const fs::path& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw IoError("cannot read image '" + path.string() + "'");
  }
  const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) {
    throw FormatError(FormatError::Reason::kMalformed,
                      "cannot decode image '" + path.string() + "'");
  }
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  RgbImage out(rgb.rows, rgb.cols);
  for (int y = 0; y < rgb.rows; ++y) {
    const auto* row = rgb.ptr<std::uint8_t>(y);
    std::copy(row, row + rgb.cols * 3, out.pixels.begin() + static_cast<std::ptrdiff_t>(y) * rgb.cols * 3);
  }
  return out;
}

void save_image(const RgbImage& image, const fs::path& path) {
  cv::Mat rgb(image.height, image.width, CV_8UC3,
              const_cast<std::uint8_t*>(image.pixels.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), bgr);
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw IoError("cannot write image '" + path.string() + "'");
}

namespace {

std::vector<fs::path> sorted_files(const fs::path& dir, bool recursive) {
  std::vector<fs::path> files;
  std::error_code ec;
  auto add = [&](const fs::directory_entry& e) {
    if (e.is_regular_file() && is_image_file(e.path())) files.push_back(e.path());
  };
  if (recursive) {
    for (fs::recursive_directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) add(*it);
  } else {
    for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) add(*it);
  }
  if (ec) throw IoError("cannot list '" + dir.string() + "': " + ec.message());
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

Dataset load_dataset(const fs::path& root) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) {
    throw IoError("dataset root '" + root.string() + "' is not a directory");
  }
  for (fs::directory_iterator it(root, ec), end; !ec && it != end; it.increment(ec)) {
    if (!it->is_directory()) continue;
    const std::string name = it->path().filename().string();
    if (!label_from_name(name)) {
      throw ValidationError("unknown class directory '" + name + "' in '" +
                            root.string() + "'");
    }
  }
  if (ec) throw IoError("cannot list '" + root.string() + "': " + ec.message());

  struct Entry {
    fs::path path;
    DRLabel label;
  };
  std::vector<Entry> entries;
  for (const DRLabel label : all_labels()) {
    const fs::path dir = root / std::string(label_name(label));
    if (!fs::is_directory(dir, ec)) continue;
    for (fs::path& p : sorted_files(dir, false)) entries.push_back({std::move(p), label});
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.path < b.path; });

  Dataset ds;
  for (const Entry& e : entries) {
    try {
      LabeledImage li;
      li.image = load_image(e.path);
      li.label = e.label;
      li.source_id = fs::relative(e.path, root).generic_string();
      ++ds.counts[static_cast<std::size_t>(e.label)];
      ds.images.push_back(std::move(li));
    } catch (const Error& err) {
      ++ds.skipped;
      ds.warnings.push_back(std::string("skipped: ") + err.what());
    }
  }
  // Reported, not corrected: the split and the metrics take counts as given.
  const auto [lo, hi] = std::minmax_element(ds.counts.begin(), ds.counts.end());
  if (*hi > 2 * *lo) {
    std::string msg = "class counts are imbalanced:";
    for (const DRLabel l : all_labels()) {
      msg += " " + std::string(label_name(l)) + "=" +
             std::to_string(ds.counts[static_cast<std::size_t>(l)]);
    }
    ds.warnings.push_back(msg);
  }
  return ds;
}

std::vector<RgbImage> load_image_files(const fs::path& dir, std::size_t limit) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw IoError("'" + dir.string() + "' is not a directory");
  }
  std::vector<RgbImage> out;
  for (const fs::path& p : sorted_files(dir, true)) {
    if (out.size() >= limit) break;
    out.push_back(load_image(p));
  }
  return out;
}

std::size_t train_size(std::size_t n) { return n / 5 * 4 + (n % 5) * 4 / 5; }

DatasetSplit split(std::span<const LabeledImage> dataset, std::uint64_t seed,
                   bool stratified) {
  const std::size_t n = dataset.size();
  if (n < 5) {
    throw ValidationError("split needs at least 5 images, got " + std::to_string(n));
  }
  Rng rng(seed);
  auto shuffle = [&](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[rng.below(i)]);
    }
  };
  DatasetSplit out;
  out.seed = seed;
  const std::size_t n_train = train_size(n);
  if (!stratified) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(order);
    out.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    return out;
  }
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < n; ++i) {
    by_class[static_cast<std::size_t>(dataset[i].label)].push_back(i);
  }
  std::array<std::size_t, kNumClasses> quota{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    quota[c] = train_size(by_class[c].size());
    assigned += quota[c];
  }
  // Largest remainder of 0.8 * n_c, lowest class first on ties.
  std::array<std::size_t, kNumClasses> rank{};
  std::iota(rank.begin(), rank.end(), std::size_t{0});
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    return (4 * by_class[a].size()) % 5 > (4 * by_class[b].size()) % 5;
  });
  for (std::size_t k = 0; assigned < n_train; ++k) {
    const std::size_t c = rank[k % kNumClasses];
    if (quota[c] < by_class[c].size()) {
      ++quota[c];
      ++assigned;
    }
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    shuffle(by_class[c]);
    const auto cut = by_class[c].begin() + static_cast<std::ptrdiff_t>(quota[c]);
    out.train.insert(out.train.end(), by_class[c].begin(), cut);
    out.validation.insert(out.validation.end(), cut, by_class[c].end());
  }
  return out;
}

std::vector<float> resize_bilinear(const RgbImage& image, int out_h, int out_w) {
  if (image.height < 1 || image.width < 1 || out_h < 1 || out_w < 1) {
    throw ValidationError("resize: empty image or target");
  }
  struct Tap {
    int i0, i1;
    double f;
  };
  auto taps = [](int in, int out) {
    std::vector<Tap> t(static_cast<std::size_t>(out));
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      double src = (o + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const int i0 = static_cast<int>(std::floor(src));
      const int i1 = std::min(i0 + 1, in - 1);
      t[static_cast<std::size_t>(o)] = {i0, i1, src - i0};
    }
    return t;
  };
  const auto ty = taps(image.height, out_h);
  const auto tx = taps(image.width, out_w);
  std::vector<float> out(static_cast<std::size_t>(out_h) * out_w * 3);
  std::size_t k = 0;
  for (const Tap& y : ty) {
    for (const Tap& x : tx) {
      for (int c = 0; c < 3; ++c) {
        // a + f * (b - a) keeps constant regions exact.
        const double a = image.at(y.i0, x.i0, c);
        const double b = image.at(y.i0, x.i1, c);
        const double d = image.at(y.i1, x.i0, c);
        const double e = image.at(y.i1, x.i1, c);
        const double top = a + x.f * (b - a);
        const double bottom = d + x.f * (e - d);
        out[k++] = static_cast<float>(top + y.f * (bottom - top));
      }
    }
  }
  return out;
}

Tensor preprocess(const RgbImage& image) {
  if (image.height < 2 || image.width < 2) {
    throw ValidationError("preprocess: image is " + std::to_string(image.height) +
                          "x" + std::to_string(image.width) +
                          ", need at least 2x2");
  }
  std::vector<float> v = resize_bilinear(image, kModelInputSize, kModelInputSize);
  for (float& x : v) x = static_cast<float>(static_cast<double>(x) / 255.0);
  return Tensor::f32({1, kModelInputSize, kModelInputSize, 3}, std::move(v));
}

RgbImage augment(const RgbImage& image, const AugmentSpec& spec) {
  if (spec.rot90_k < 0 || spec.rot90_k > 3) {
    throw ValidationError("augment: rot90_k must be 0..3, got " +
                          std::to_string(spec.rot90_k));
  }
  if (!(spec.contrast_factor >= 0.5 && spec.contrast_factor <= 1.5)) {
    throw ValidationError("augment: contrast factor must lie in [0.5, 1.5]");
  }
  RgbImage img = image;
  if (spec.flip_h) {
    RgbImage out(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
    img = std::move(out);
  }
  if (spec.flip_v) {
    RgbImage out(img.height, img.width);
    for (int y = 0; y < img.height; ++y)
      for (int x = 0; x < img.width; ++x)
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(img.height - 1 - y, x, c);
    img = std::move(out);
  }
  for (int k = 0; k < spec.rot90_k; ++k) {
    // Counter-clockwise: the right column becomes the top row.
    RgbImage out(img.width, img.height);
    for (int y = 0; y < out.height; ++y)
      for (int x = 0; x < out.width; ++x)
        for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(x, img.width - 1 - y, c);
    img = std::move(out);
  }
  if (spec.contrast_factor != 1.0 && !img.pixels.empty()) {
    double sum = 0.0;
    for (const std::uint8_t p : img.pixels) sum += p;
    const double mean = sum / static_cast<double>(img.pixels.size());
    for (std::uint8_t& p : img.pixels) {
      const double v = mean + spec.contrast_factor * (p - mean);
      p = static_cast<std::uint8_t>(std::clamp<std::int64_t>(round_half_away(v), 0, 255));
    }
  }
  return img;
}

LabeledImage augment(const LabeledImage& image, const AugmentSpec& spec) {
  return {augment(image.image, spec), image.label, image.source_id};
}

ClassificationReport report_from_confusion(const ConfusionMatrix& m) {
  ClassificationReport r;
  r.confusion = m;
  std::uint64_t trace = 0;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    trace += m[i][i];
    for (std::size_t j = 0; j < kNumClasses; ++j) r.total += m[i][j];
  }
  r.accuracy = r.total == 0 ? 0.0 : static_cast<double>(trace) / static_cast<double>(r.total);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::uint64_t predicted = 0, actual = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      predicted += m[k][c];
      actual += m[c][k];
    }
    const double tp = static_cast<double>(m[c][c]);
    r.precision[c] = predicted == 0 ? 0.0 : tp / static_cast<double>(predicted);
    r.recall[c] = actual == 0 ? 0.0 : tp / static_cast<double>(actual);
    const double denom = r.precision[c] + r.recall[c];
    r.f1[c] = denom == 0.0 ? 0.0 : 2.0 * r.precision[c] * r.recall[c] / denom;
    r.macro_precision += r.precision[c];
    r.macro_recall += r.recall[c];
    r.macro_f1 += r.f1[c];
  }
  r.macro_precision /= kNumClasses;
  r.macro_recall /= kNumClasses;
  r.macro_f1 /= kNumClasses;
  return r;
}

ClassificationReport evaluate(const ModelGraph& graph,
                              std::span<const LabeledImage> images) {
  if (images.empty()) throw ValidationError("evaluate needs at least one image");
  Executor executor(graph);
  ConfusionMatrix m{};
  for (const LabeledImage& li : images) {
    const Classification c = classify(executor, preprocess(li.image));
    ++m[static_cast<std::size_t>(li.label)][static_cast<std::size_t>(c.label)];
  }
  return report_from_confusion(m);
}

std::string format_report_text(const ClassificationReport& r) {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof(line), "samples   %llu\naccuracy  %.4f\n\n",
                static_cast<unsigned long long>(r.total), r.accuracy);
  out += line;
  out += "class           precision  recall     f1\n";
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::snprintf(line, sizeof(line), "%-15s %-10.4f %-10.4f %.4f\n",
                  std::string(label_name(static_cast<DRLabel>(c))).c_str(),
                  r.precision[c], r.recall[c], r.f1[c]);
    out += line;
  }
  std::snprintf(line, sizeof(line), "%-15s %-10.4f %-10.4f %.4f\n\n", "macro",
                r.macro_precision, r.macro_recall, r.macro_f1);
  out += line;
  out += "confusion (rows true, columns predicted)\n";
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    std::snprintf(line, sizeof(line), "%-15s",
                  std::string(label_name(static_cast<DRLabel>(i))).c_str());
    out += line;
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      std::snprintf(line, sizeof(line), " %6llu",
                    static_cast<unsigned long long>(r.confusion[i][j]));
      out += line;
    }
    out += '\n';
  }
  return out;
}

std::string format_report_kv(const ClassificationReport& r) {
  std::string out;
  char line[128];
  auto kv = [&](const std::string& key, double v) {
    std::snprintf(line, sizeof(line), "%s=%.17g\n", key.c_str(), v);
    out += line;
  };
  out += "samples=" + std::to_string(r.total) + "\n";
  kv("accuracy", r.accuracy);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const std::string name(label_name(static_cast<DRLabel>(c)));
    kv("precision." + name, r.precision[c]);
    kv("recall." + name, r.recall[c]);
    kv("f1." + name, r.f1[c]);
  }
  kv("macro_precision", r.macro_precision);
  kv("macro_recall", r.macro_recall);
  kv("macro_f1", r.macro_f1);
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    out += "confusion." + std::string(label_name(static_cast<DRLabel>(i))) + "=";
    for (std::size_t j = 0; j < kNumClasses; ++j) {
      if (j) out += ' ';
      out += std::to_string(r.confusion[i][j]);
    }
    out += '\n';
  }
  return out;
}

}  // namespace dredge
