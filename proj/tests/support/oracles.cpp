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

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dredge::testing {

Real real(const TensorView& t) {
  Real r(t.shape);
  switch (t.dtype) {
    case DType::kF32: {
      const auto s = t.as<float>();
      for (std::size_t i = 0; i < s.size(); ++i) r.v[i] = s[i];
      break;
    }
    case DType::kI8: {
      const auto s = t.as<std::int8_t>();
      for (std::size_t i = 0; i < s.size(); ++i) {
        r.v[i] = (static_cast<double>(s[i]) - t.qparams->zero_point) * t.qparams->scale;
      }
      break;
    }
    case DType::kI32: {
      const auto s = t.as<std::int32_t>();
      const double scale = t.qparams ? t.qparams->scale : 1.0;
      const double zp = t.qparams ? t.qparams->zero_point : 0.0;
      for (std::size_t i = 0; i < s.size(); ++i) r.v[i] = (s[i] - zp) * scale;
      break;
    }
  }
  return r;
}

Real real(const Tensor& t) { return real(t.view()); }

std::vector<std::int64_t> quantize_all(const Real& r, const QuantParams& qp) {
  std::vector<std::int64_t> out(r.v.size());
  for (std::size_t i = 0; i < r.v.size(); ++i) {
    const double x = r.v[i] / qp.scale;
    const double rounded = x < 0 ? -std::floor(-x + 0.5) : std::floor(x + 0.5);
    out[i] = std::clamp<std::int64_t>(static_cast<std::int64_t>(rounded) + qp.zero_point,
                                      -128, 127);
  }
  return out;
}

namespace {

// Output size and leading pad for one axis.
void axis(std::int64_t in, int k, int s, bool same, std::int64_t* out, std::int64_t* pad) {
  if (same) {
    *out = (in + s - 1) / s;
    const std::int64_t total = std::max<std::int64_t>((*out - 1) * s + k - in, 0);
    *pad = total / 2;
  } else {
    *out = (in - k) / s + 1;
    *pad = 0;
  }
}

}  // namespace

Real conv2d(const Real& in, const Real& w, const std::vector<double>& bias,
            const ConvSpec& p) {
  std::int64_t oh, ow, pt, pl;
  axis(in.shape.h, p.kh, p.sh, p.same, &oh, &pt);
  axis(in.shape.w, p.kw, p.sw, p.same, &ow, &pl);
  const std::int64_t cin_g = in.shape.c / p.groups;
  const std::int64_t cout_g = p.cout / p.groups;
  Real out(Shape{in.shape.n, oh, ow, p.cout});
  for (std::int64_t n = 0; n < in.shape.n; ++n)
    for (std::int64_t y = 0; y < oh; ++y)
      for (std::int64_t x = 0; x < ow; ++x)
        for (std::int64_t co = 0; co < p.cout; ++co) {
          const std::int64_t g = co / cout_g;
          double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(co)];
          for (int ky = 0; ky < p.kh; ++ky)
            for (int kx = 0; kx < p.kw; ++kx)
              for (std::int64_t ci = 0; ci < cin_g; ++ci) {
                const std::int64_t iy = y * p.sh + ky - pt;
                const std::int64_t ix = x * p.sw + kx - pl;
                if (iy < 0 || ix < 0 || iy >= in.shape.h || ix >= in.shape.w) continue;
                acc += in.at(n, iy, ix, g * cin_g + ci) * w.at(ky, kx, ci, co);
              }
          out.at(n, y, x, co) = p.relu ? std::max(acc, 0.0) : acc;
        }
  return out;
}

Real maxpool(const Real& in, int kh, int kw, int sh, int sw) {
  const std::int64_t oh = (in.shape.h - kh) / sh + 1;
  const std::int64_t ow = (in.shape.w - kw) / sw + 1;
  Real out(Shape{in.shape.n, oh, ow, in.shape.c});
  for (std::int64_t n = 0; n < in.shape.n; ++n)
    for (std::int64_t y = 0; y < oh; ++y)
      for (std::int64_t x = 0; x < ow; ++x)
        for (std::int64_t c = 0; c < in.shape.c; ++c) {
          double m = -std::numeric_limits<double>::infinity();
          for (int dy = 0; dy < kh; ++dy)
            for (int dx = 0; dx < kw; ++dx) m = std::max(m, in.at(n, y * sh + dy, x * sw + dx, c));
          out.at(n, y, x, c) = m;
        }
  return out;
}

Real global_avg_pool(const Real& in) {
  Real out(Shape{in.shape.n, 1, 1, in.shape.c});
  for (std::int64_t n = 0; n < in.shape.n; ++n)
    for (std::int64_t c = 0; c < in.shape.c; ++c) {
      double s = 0.0;
      for (std::int64_t y = 0; y < in.shape.h; ++y)
        for (std::int64_t x = 0; x < in.shape.w; ++x) s += in.at(n, y, x, c);
      out.at(n, 0, 0, c) = s / static_cast<double>(in.shape.h * in.shape.w);
    }
  return out;
}

Real dense(const Real& in, const Real& w, const std::vector<double>& bias, bool relu) {
  const std::int64_t k = in.shape.c;
  const std::int64_t m = w.shape.c;
  Real out(Shape{in.shape.n, 1, 1, m});
  for (std::int64_t n = 0; n < in.shape.n; ++n)
    for (std::int64_t j = 0; j < m; ++j) {
      double acc = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(j)];
      for (std::int64_t i = 0; i < k; ++i) acc += in.at(n, 0, 0, i) * w.at(0, 0, i, j);
      out.at(n, 0, 0, j) = relu ? std::max(acc, 0.0) : acc;
    }
  return out;
}

Real relu(const Real& in) {
  Real out = in;
  for (double& x : out.v) x = std::max(x, 0.0);
  return out;
}

Real softmax(const Real& logits) {
  Real out = logits;
  const std::int64_t c = logits.shape.c;
  for (std::int64_t row = 0; row < logits.shape.pixels(); ++row) {
    double* p = out.v.data() + row * c;
    double m = p[0];
    for (std::int64_t i = 1; i < c; ++i) m = std::max(m, p[i]);
    double sum = 0.0;
    for (std::int64_t i = 0; i < c; ++i) sum += (p[i] = std::exp(p[i] - m));
    for (std::int64_t i = 0; i < c; ++i) p[i] /= sum;
  }
  return out;
}

Real channel_shuffle(const Real& in, int groups) {
  const std::int64_t c = in.shape.c;
  const std::int64_t per = c / groups;
  // Element (g, k) of the (groups, per) view lands at (k, g) of the
  // transposed (per, groups) view.
  std::vector<std::int64_t> source(static_cast<std::size_t>(c));
  for (std::int64_t g = 0; g < groups; ++g)
    for (std::int64_t k = 0; k < per; ++k) source[static_cast<std::size_t>(k * groups + g)] = g * per + k;
  Real out(in.shape);
  for (std::int64_t px = 0; px < in.shape.pixels(); ++px)
    for (std::int64_t j = 0; j < c; ++j)
      out.v[static_cast<std::size_t>(px * c + j)] =
          in.v[static_cast<std::size_t>(px * c + source[static_cast<std::size_t>(j)])];
  return out;
}

Real concat_channels(const Real& a, const Real& b) {
  Real out(Shape{a.shape.n, a.shape.h, a.shape.w, a.shape.c + b.shape.c});
  for (std::int64_t px = 0; px < a.shape.pixels(); ++px) {
    for (std::int64_t c = 0; c < a.shape.c; ++c)
      out.v[static_cast<std::size_t>(px * out.shape.c + c)] = a.v[static_cast<std::size_t>(px * a.shape.c + c)];
    for (std::int64_t c = 0; c < b.shape.c; ++c)
      out.v[static_cast<std::size_t>(px * out.shape.c + a.shape.c + c)] =
          b.v[static_cast<std::size_t>(px * b.shape.c + c)];
  }
  return out;
}

Real batchnorm(const Real& in, const std::vector<double>& gamma,
               const std::vector<double>& beta, const std::vector<double>& mean,
               const std::vector<double>& var, double eps) {
  Real out = in;
  const std::int64_t c = in.shape.c;
  for (std::size_t i = 0; i < out.v.size(); ++i) {
    const auto ch = static_cast<std::size_t>(static_cast<std::int64_t>(i) % c);
    out.v[i] = gamma[ch] * (in.v[i] - mean[ch]) / std::sqrt(var[ch] + eps) + beta[ch];
  }
  return out;
}

std::size_t peak_live(const std::vector<BufferLifetime>& buffers) {
  int hi = 0;
  for (const auto& b : buffers) hi = std::max(hi, b.last_use);
  std::size_t peak = 0;
  for (int t = 0; t <= hi; ++t) {
    std::size_t live = 0;
    for (const auto& b : buffers)
      if (b.first_use <= t && t <= b.last_use) live += b.size;
    peak = std::max(peak, live);
  }
  return peak;
}

bool overlap_free(const std::vector<BufferLifetime>& buffers,
                  const std::vector<std::size_t>& offsets) {
  for (std::size_t i = 0; i < buffers.size(); ++i)
    for (std::size_t j = i + 1; j < buffers.size(); ++j) {
      const auto& a = buffers[i];
      const auto& b = buffers[j];
      if (a.size == 0 || b.size == 0) continue;
      const bool time = a.first_use <= b.last_use && b.first_use <= a.last_use;
      const bool space = offsets[i] < offsets[j] + b.size && offsets[j] < offsets[i] + a.size;
      if (time && space) return false;
    }
  return true;
}

std::vector<BufferLifetime> random_dag_lifetimes(Rng& rng, int nodes) {
  std::vector<BufferLifetime> t(static_cast<std::size_t>(nodes) + 1);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i].size = 1 + rng.below(4096);
    // Produced by node i - 1 (the input is there before node 0); a tensor
    // nobody reads dies where it is born.
    t[i].first_use = i == 0 ? 0 : static_cast<int>(i) - 1;
    t[i].last_use = t[i].first_use;
  }
  for (int node = 0; node < nodes; ++node) {
    std::vector<int> reads = {node};
    const int extra = static_cast<int>(rng.below(3));
    for (int k = 0; k < extra; ++k) reads.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(node) + 1)));
    for (int r : reads) {
      auto& b = t[static_cast<std::size_t>(r)];
      b.last_use = std::max(b.last_use, node);
    }
  }
  return t;
}

std::vector<BufferLifetime> random_chain_lifetimes(Rng& rng, int nodes) {
  std::vector<BufferLifetime> t(static_cast<std::size_t>(nodes) + 1);
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i].size = 1 + rng.below(4096);
    t[i].first_use = i == 0 ? 0 : static_cast<int>(i) - 1;
    t[i].last_use = std::min(static_cast<int>(i), nodes - 1);
  }
  return t;
}

Fraction::Fraction(std::int64_t n, std::int64_t d) : num(n), den(d) {
  if (den == 0) {
    num = 0;
    den = 1;
    return;
  }
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
}

Fraction operator+(const Fraction& a, const Fraction& b) {
  return {a.num * b.den + b.num * a.den, a.den * b.den};
}

Fraction operator*(const Fraction& a, const Fraction& b) {
  return {a.num * b.num, a.den * b.den};
}

HandMetrics hand_metrics(const ConfusionMatrix& m) {
  HandMetrics h;
  std::int64_t total = 0, trace = 0;
  for (int i = 0; i < kNumClasses; ++i)
    for (int j = 0; j < kNumClasses; ++j) {
      const auto v = static_cast<std::int64_t>(m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      total += v;
      if (i == j) trace += v;
    }
  h.accuracy = Fraction(trace, total);
  const Fraction fifth(1, kNumClasses);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto tp = static_cast<std::int64_t>(m[c][c]);
    std::int64_t col = 0, row = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      col += static_cast<std::int64_t>(m[k][c]);
      row += static_cast<std::int64_t>(m[c][k]);
    }
    const std::int64_t fp = col - tp;
    const std::int64_t fn = row - tp;
    // Fraction(x, 0) collapses to 0, which is the zero-denominator rule.
    h.precision[c] = Fraction(tp, col);
    h.recall[c] = Fraction(tp, row);
    h.f1[c] = Fraction(2 * tp, 2 * tp + fp + fn);
    h.macro_precision = h.macro_precision + h.precision[c] * fifth;
    h.macro_recall = h.macro_recall + h.recall[c] * fifth;
    h.macro_f1 = h.macro_f1 + h.f1[c] * fifth;
  }
  return h;
}

Tensor random_f32(Rng& rng, Shape shape, double lo, double hi) {
  std::vector<float> v(static_cast<std::size_t>(shape.elements()));
  for (float& x : v) x = static_cast<float>(rng.uniform(lo, hi));
  return Tensor::f32(shape, std::move(v));
}

Tensor random_i8(Rng& rng, Shape shape, QuantParams qp) {
  std::vector<std::int8_t> v(static_cast<std::size_t>(shape.elements()));
  for (auto& x : v) x = static_cast<std::int8_t>(static_cast<int>(rng.below(256)) - 128);
  return Tensor::i8(shape, std::move(v), qp);
}

int uniform_int(Rng& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

}  // namespace dredge::testing
