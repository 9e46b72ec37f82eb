// Copyright 2026 The mkor-lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mkor/metrics.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mkor {
namespace {

constexpr int kWin = 11;
constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;

const std::array<double, kWin>& GaussianTaps() {
  static const std::array<double, kWin> taps = [] {
    std::array<double, kWin> t{};
    double s = 0;
    for (int i = 0; i < kWin; ++i) {
      const double d = i - kWin / 2;
      t[i] = std::exp(-d * d / (2 * 1.5 * 1.5));
      s += t[i];
    }
    for (double& v : t) v /= s;
    return t;
  }();
  return taps;
}

void CheckSame(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.SameShape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + ShapeToString(a.shape()) +
                                " vs " + ShapeToString(b.shape()));
  }
}

double SsimFromMoments(double ma, double mb, double va, double vb, double cab) {
  return ((2 * ma * mb + kC1) * (2 * cab + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
}

}  // namespace

double Psnr(const Tensor& a, const Tensor& b) {
  CheckSame(a, b, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    se += d * d;
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / (se / a.size()));
}

double Ssim(const Tensor& a, const Tensor& b, bool* global_fallback) {
  CheckSame(a, b, "ssim");
  const int H = a.height(), W = a.width(), C = a.channels();
  if (global_fallback) *global_fallback = false;
  double total = 0.0;
  if (H < kWin || W < kWin) {
    if (global_fallback) *global_fallback = true;
    for (int c = 0; c < C; ++c) {
      double ma = 0, mb = 0;
      const double n = double(H) * W;
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
          ma += a.at(h, w, c);
          mb += b.at(h, w, c);
        }
      ma /= n;
      mb /= n;
      double va = 0, vb = 0, cab = 0;
      for (int h = 0; h < H; ++h)
        for (int w = 0; w < W; ++w) {
          const double da = a.at(h, w, c) - ma, db = b.at(h, w, c) - mb;
          va += da * da;
          vb += db * db;
          cab += da * db;
        }
      total += SsimFromMoments(ma, mb, va / n, vb / n, cab / n);
    }
    return total / C;
  }
  // Separable Gaussian: filter rows first, then columns, over valid positions.
  const auto& g = GaussianTaps();
  const int OH = H - kWin + 1, OW = W - kWin + 1;
  for (int c = 0; c < C; ++c) {
    // Five moment planes after horizontal filtering: a, b, aa, bb, ab.
    std::vector<std::array<double, 5>> horiz(static_cast<std::size_t>(H) * OW);
    for (int h = 0; h < H; ++h) {
      for (int w = 0; w < OW; ++w) {
        std::array<double, 5> m{};
        for (int k = 0; k < kWin; ++k) {
          const double x = a.at(h, w + k, c), y = b.at(h, w + k, c);
          m[0] += g[k] * x;
          m[1] += g[k] * y;
          m[2] += g[k] * x * x;
          m[3] += g[k] * y * y;
          m[4] += g[k] * x * y;
        }
        horiz[static_cast<std::size_t>(h) * OW + w] = m;
      }
    }
    double sum = 0.0;
    for (int h = 0; h < OH; ++h) {
      for (int w = 0; w < OW; ++w) {
        std::array<double, 5> m{};
        for (int k = 0; k < kWin; ++k) {
          const auto& r = horiz[static_cast<std::size_t>(h + k) * OW + w];
          for (int i = 0; i < 5; ++i) m[i] += g[k] * r[i];
        }
        sum += SsimFromMoments(m[0], m[1], m[2] - m[0] * m[0], m[3] - m[1] * m[1],
                               m[4] - m[0] * m[1]);
      }
    }
    total += sum / (double(OH) * OW);
  }
  return total / C;
}

BatchScore ScoreBatch(const std::map<int, Tensor>& recoveries, const std::vector<LabeledImage>& batch) {
  BatchScore s;
  for (const auto& [label, rec] : recoveries) {
    ClassScore best;
    best.label = label;
    best.ssim = -2.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (batch[i].label != label) continue;
      const Tensor& truth = batch[i].image;
      const Tensor r = rec.SameShape(truth) ? rec : ResizeNearest(rec, truth.height(), truth.width());
      if (r.channels() != truth.channels()) throw std::invalid_argument("score: channel mismatch");
      bool fb = false;
      const double v = Ssim(r, truth, &fb);
      if (v > best.ssim) {
        best.ssim = v;
        best.psnr = Psnr(r, truth);
        best.matched_index = static_cast<int>(i);
        best.ssim_fallback = fb;
      }
    }
    if (best.matched_index < 0) {
      s.unmatched_labels.push_back(label);
      continue;
    }
    s.per_class.push_back(best);
  }
  if (!s.per_class.empty()) {
    s.max_ssim = -1.0;
    s.max_psnr = 0.0;
    double ssum = 0, psum = 0;
    for (const auto& c : s.per_class) {
      s.max_ssim = std::max(s.max_ssim, c.ssim);
      s.max_psnr = std::max(s.max_psnr, c.psnr);
      ssum += c.ssim;
      psum += c.psnr;
    }
    s.avg_ssim = ssum / s.per_class.size();
    s.avg_psnr = psum / s.per_class.size();
  }
  return s;
}

}  // namespace mkor
