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

#include "mkor/conv_attack.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mkor {
namespace {

std::size_t WeightIndex(const LayerSpec& l, int out, int r, int c, int in) {
  return ((static_cast<std::size_t>(out) * l.kernel + r) * l.kernel + c) * l.in_channels + in;
}

void CheckPlan(const ModelSpec& model, const ConvPlan& plan) {
  if (plan.model != model.name) {
    throw std::invalid_argument("plan built for " + plan.model + ", model is " + model.name);
  }
  for (const auto& p : plan.layers) {
    if (p.layer < 0 || p.layer >= static_cast<int>(model.layers.size()) ||
        model.layers[p.layer].kind != LayerKind::kConv2d) {
      throw std::invalid_argument("plan layer " + std::to_string(p.layer) + " is not a conv layer");
    }
    const auto& l = model.layers[p.layer];
    for (const auto& e : p.edges) {
      if (e.in < 0 || e.in >= l.in_channels || e.out < 0 || e.out >= l.out_channels ||
          e.tap_r < 0 || e.tap_r >= l.kernel || e.tap_c < 0 || e.tap_c >= l.kernel) {
        throw std::invalid_argument("plan edge out of range at layer " + std::to_string(p.layer));
      }
    }
  }
}

}  // namespace

ParamSet InjectConvNaive(const ParamSet& params, const ModelSpec& model, const ConvPlan& plan) {
  CheckPlan(model, plan);
  ParamSet out = params;
  for (int i : model.ConvLayers()) {
    auto w = out.Weight(model, i);
    std::fill(w.begin(), w.end(), 0.0f);
    auto b = out.Bias(model, i);
    std::fill(b.begin(), b.end(), 0.0f);
  }
  for (const auto& p : plan.layers) {
    const auto& l = model.layers[p.layer];
    auto w = out.Weight(model, p.layer);
    auto b = out.Bias(model, p.layer);
    for (const auto& e : p.edges) {
      w[WeightIndex(l, e.out, e.tap_r, e.tap_c, e.in)] = static_cast<float>(e.sign());
      if (!b.empty()) b[e.out] = e.role == FilterRole::kMin ? 1.0f : 0.0f;
    }
  }
  return out;
}

double DefaultConvSigma(const ModelSpec& model) {
  for (int i = 0; i < model.flatten_layer; ++i) {
    if (model.layers[i].kind == LayerKind::kSigmoid) return 1e-5;
  }
  return 1e-3;
}

ParamSet InjectConvInconspicuous(const ParamSet& params, const ModelSpec& model, ConvPlan& plan,
                                 const ConvInjectionConfig& config) {
  CheckPlan(model, plan);
  const double sigma = config.sigma < 0.0 ? DefaultConvSigma(model) : config.sigma;
  plan.noise_sigma = sigma;
  if (!config.betas.empty() && config.betas.size() != plan.layers.size()) {
    throw std::invalid_argument("need one beta per plan layer");
  }
  InputBlock block = config.block;
  if (block == InputBlock::kAuto) block = IsLenet(model) ? InputBlock::kAll : InputBlock::kConsidered;
  ParamSet out = params;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t k = 0; k < plan.layers.size(); ++k) {
    PlanLayer& p = plan.layers[k];
    const double beta = config.betas.empty() ? config.beta : config.betas[k];
    if (!(beta > 0.0)) throw std::invalid_argument("beta must be positive");
    p.beta = beta;
    const auto& l = model.layers[p.layer];
    auto w = out.Weight(model, p.layer);
    auto b = out.Bias(model, p.layer);
    std::vector<int> cin = p.in_channels;
    if (block == InputBlock::kAll) {
      cin.resize(l.in_channels);
      std::iota(cin.begin(), cin.end(), 0);
    }
    std::vector<int> edge_of(static_cast<std::size_t>(l.out_channels) * l.in_channels, -1);
    for (std::size_t e = 0; e < p.edges.size(); ++e) {
      edge_of[static_cast<std::size_t>(p.edges[e].out) * l.in_channels + p.edges[e].in] =
          static_cast<int>(e);
    }
    for (int co : p.out_channels) {
      for (int ci : cin) {
        const int e = edge_of[static_cast<std::size_t>(co) * l.in_channels + ci];
        for (int r = 0; r < l.kernel; ++r) {
          for (int c = 0; c < l.kernel; ++c) {
            float v;
            if (e >= 0) {
              const auto& edge = p.edges[e];
              v = edge.tap_r == r && edge.tap_c == c ? static_cast<float>(edge.sign() * beta) : 0.0f;
            } else {
              v = static_cast<float>(sigma * noise(rng));
            }
            w[WeightIndex(l, co, r, c, ci)] = v;
          }
        }
      }
    }
    if (!b.empty()) {
      for (const auto& e : p.edges) {
        b[e.out] = e.role == FilterRole::kMin ? static_cast<float>(beta) : 0.0f;
      }
    }
  }
  return out;
}

Tensor EstimateInput(const Tensor& z0_in, const ConvPlan& plan, EstimateStats* stats, Bounds* bounds,
                     bool clamp) {
  const Tensor z0 = z0_in.rank() == 3 ? z0_in : z0_in.Reshaped(plan.feature_shape);
  if (z0.shape() != plan.feature_shape) {
    throw std::invalid_argument("z0 shape " + ShapeToString(z0.shape()) + " does not match plan " +
                                ShapeToString(plan.feature_shape));
  }
  const int H = plan.input_shape[0], W = plan.input_shape[1], C = plan.input_shape[2];
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> upper(static_cast<std::size_t>(H) * W * C, inf);
  std::vector<double> lower(upper.size(), -inf);
  const double beta = plan.BetaProduct();
  for (const auto& t : plan.traces) {
    for (int h = 0; h < plan.feature_shape[0]; ++h) {
      for (int w = 0; w < plan.feature_shape[1]; ++w) {
        const RegionRef r = RegionOf(h, w, t.channel, plan);
        if (r.empty()) continue;
        const double v = static_cast<double>(z0.at(h, w, t.channel)) / beta;
        for (int y = r.r0; y < r.r1; ++y) {
          for (int x = r.c0; x < r.c1; ++x) {
            const std::size_t i = (static_cast<std::size_t>(y) * W + x) * C + r.source;
            if (r.polarity > 0) upper[i] = std::min(upper[i], v);
            else lower[i] = std::max(lower[i], 1.0 - v);
          }
        }
      }
    }
  }
  EstimateStats s;
  Tensor out({H, W, C});
  std::vector<char> known(out.size(), 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const bool hu = upper[i] < inf, hl = lower[i] > -inf;
    if (hu && hl) {
      out[i] = static_cast<float>(0.5 * (upper[i] + lower[i]));
      ++s.both;
    } else if (hu) {
      out[i] = static_cast<float>(upper[i]);
      ++s.upper_only;
    } else if (hl) {
      out[i] = static_cast<float>(lower[i]);
      ++s.lower_only;
    } else {
      continue;
    }
    known[i] = 1;
  }
  // Undescribed pixels take the mean of their native cell, else mid-grey.
  const int g = plan.native_cell;
  for (int c = 0; c < C; ++c) {
    for (int cy = 0; cy < H; cy += g) {
      for (int cx = 0; cx < W; cx += g) {
        double sum = 0.0;
        int n = 0;
        for (int y = cy; y < std::min(H, cy + g); ++y)
          for (int x = cx; x < std::min(W, cx + g); ++x) {
            const std::size_t i = (static_cast<std::size_t>(y) * W + x) * C + c;
            if (known[i]) {
              sum += out[i];
              ++n;
            }
          }
        for (int y = cy; y < std::min(H, cy + g); ++y)
          for (int x = cx; x < std::min(W, cx + g); ++x) {
            const std::size_t i = (static_cast<std::size_t>(y) * W + x) * C + c;
            if (known[i]) continue;
            if (n > 0) {
              out[i] = static_cast<float>(sum / n);
              ++s.cell_filled;
            } else {
              out[i] = 0.5f;
              ++s.prior_filled;
            }
          }
      }
    }
  }
  if (clamp) {
    for (float& v : out.storage()) v = std::clamp(v, 0.0f, 1.0f);
  }
  if (stats) *stats = s;
  if (bounds) {
    bounds->upper = Tensor({H, W, C});
    bounds->lower = Tensor({H, W, C});
    for (std::size_t i = 0; i < out.size(); ++i) {
      bounds->upper[i] = static_cast<float>(upper[i]);
      bounds->lower[i] = static_cast<float>(lower[i]);
    }
  }
  return out;
}

Tensor LenetReconstruct(const Tensor& z0_in, const ModelSpec& model, const ConvPlan& plan,
                        InversionStats* stats, double delta, bool clamp) {
  const Tensor z0 = z0_in.rank() == 3 ? z0_in : z0_in.Reshaped(model.FeatureShape());
  if (z0.shape() != model.FeatureShape()) throw std::invalid_argument("z0 does not match the model");
  InversionStats s;
  std::vector<double> val(z0.values().begin(), z0.values().end());
  std::vector<char> ok(val.size(), 0);
  std::vector<int> shape = z0.shape();
  for (const auto& t : plan.traces) {
    for (int h = 0; h < shape[0]; ++h)
      for (int w = 0; w < shape[1]; ++w)
        ok[(static_cast<std::size_t>(h) * shape[1] + w) * shape[2] + t.channel] = 1;
  }
  auto idx = [](const std::vector<int>& sh, int h, int w, int c) {
    return (static_cast<std::size_t>(h) * sh[1] + w) * sh[2] + c;
  };
  for (int i = model.flatten_layer - 1; i >= 0; --i) {
    const auto& l = model.layers[i];
    switch (l.kind) {
      case LayerKind::kSigmoid:
        for (std::size_t k = 0; k < val.size(); ++k) {
          if (!ok[k]) continue;
          double v = val[k];
          if (v < delta || v > 1.0 - delta) {
            ++s.clamped;
            v = std::clamp(v, delta, 1.0 - delta);
          }
          val[k] = std::log(v / (1.0 - v));
        }
        break;
      case LayerKind::kRelu:
        break;
      case LayerKind::kMaxPool:
      case LayerKind::kAvgPool: {
        std::vector<double> nv(Tensor::CountOf(l.in_shape), 0.0);
        std::vector<char> nok(nv.size(), 0);
        for (int h = 0; h < l.in_shape[0]; ++h)
          for (int w = 0; w < l.in_shape[1]; ++w)
            for (int c = 0; c < l.in_shape[2]; ++c) {
              const std::size_t src = idx(l.out_shape, h / 2, w / 2, c);
              nv[idx(l.in_shape, h, w, c)] = val[src];
              nok[idx(l.in_shape, h, w, c)] = ok[src];
            }
        val.swap(nv);
        ok.swap(nok);
        break;
      }
      case LayerKind::kConv2d: {
        const PlanLayer* p = nullptr;
        for (const auto& pl : plan.layers) {
          if (pl.layer == i) p = &pl;
        }
        if (!p) throw std::invalid_argument("plan has no entry for conv layer " + std::to_string(i));
        std::vector<double> sum(Tensor::CountOf(l.in_shape), 0.0);
        std::vector<int> cnt(sum.size(), 0);
        for (const auto& e : p->edges) {
          const double wgt = e.sign() * p->beta;
          const double bias = e.role == FilterRole::kMin ? p->beta : 0.0;
          for (int h = 0; h < l.out_shape[0]; ++h) {
            const int ih = h * l.stride + e.tap_r - l.pad;
            if (ih < 0 || ih >= l.in_shape[0]) continue;
            for (int w = 0; w < l.out_shape[1]; ++w) {
              const int iw = w * l.stride + e.tap_c - l.pad;
              if (iw < 0 || iw >= l.in_shape[1]) continue;
              const std::size_t o = idx(l.out_shape, h, w, e.out);
              if (!ok[o]) continue;
              const std::size_t t = idx(l.in_shape, ih, iw, e.in);
              sum[t] += (val[o] - bias) / wgt;
              ++cnt[t];
            }
          }
        }
        val.assign(sum.size(), 0.0);
        ok.assign(sum.size(), 0);
        for (std::size_t k = 0; k < sum.size(); ++k) {
          if (cnt[k]) {
            val[k] = sum[k] / cnt[k];
            ok[k] = 1;
          }
        }
        break;
      }
      default:
        throw std::invalid_argument("unexpected layer in conv stack");
    }
    shape = l.in_shape;
  }
  const int H = shape[0], W = shape[1], C = shape[2];
  // Same rule as EstimateInput first: the mean of the covered pixels in the
  // pixel's native cell.
  const int g = plan.native_cell;
  if (g > 1) {
    for (int c = 0; c < C; ++c) {
      for (int cy = 0; cy < H; cy += g) {
        for (int cx = 0; cx < W; cx += g) {
          double sum = 0.0;
          int n = 0;
          for (int y = cy; y < std::min(H, cy + g); ++y)
            for (int x = cx; x < std::min(W, cx + g); ++x) {
              const std::size_t k = idx(shape, y, x, c);
              if (ok[k] == 1) {
                sum += val[k];
                ++n;
              }
            }
          if (n == 0) continue;
          for (int y = cy; y < std::min(H, cy + g); ++y)
            for (int x = cx; x < std::min(W, cx + g); ++x) {
              const std::size_t k = idx(shape, y, x, c);
              if (ok[k]) continue;
              val[k] = sum / n;
              ok[k] = 2;
              ++s.cell_filled;
              ++s.uncovered;
            }
        }
      }
    }
  }
  // Whatever is left comes from the nearest filled pixel (breadth-first).
  Tensor out({H, W, C});
  for (int c = 0; c < C; ++c) {
    std::vector<int> dist(static_cast<std::size_t>(H) * W, -1);
    std::vector<double> v(dist.size(), 0.5);
    std::deque<int> q;
    for (int p = 0; p < H * W; ++p) {
      const std::size_t k = static_cast<std::size_t>(p) * C + c;
      if (ok[k]) {
        dist[p] = 0;
        v[p] = val[k];
        q.push_back(p);
      }
    }
    while (!q.empty()) {
      const int p = q.front();
      q.pop_front();
      const int y = p / W, x = p % W;
      const int nb[4][2] = {{y - 1, x}, {y + 1, x}, {y, x - 1}, {y, x + 1}};
      for (const auto& n : nb) {
        if (n[0] < 0 || n[0] >= H || n[1] < 0 || n[1] >= W) continue;
        const int np = n[0] * W + n[1];
        if (dist[np] >= 0) continue;
        dist[np] = dist[p] + 1;
        v[np] = v[p];
        q.push_back(np);
      }
    }
    for (int p = 0; p < H * W; ++p) {
      if (dist[p] != 0) ++s.uncovered;
      if (dist[p] > 0) ++s.nearest_filled;
      out[static_cast<std::size_t>(p) * C + c] = static_cast<float>(v[p]);
    }
  }
  if (clamp) {
    for (float& x : out.storage()) x = std::clamp(x, 0.0f, 1.0f);
  }
  if (stats) *stats = s;
  return out;
}

CalibrationMode ParseCalibrationMode(const std::string& s) {
  if (s == "none") return CalibrationMode::kNone;
  if (s == "minmax") return CalibrationMode::kMinMax;
  if (s == "histogram" || s == "histogram-match") return CalibrationMode::kHistogram;
  throw std::invalid_argument("unknown calibration mode '" + s + "'");
}

const char* CalibrationModeName(CalibrationMode m) {
  switch (m) {
    case CalibrationMode::kNone: return "none";
    case CalibrationMode::kMinMax: return "minmax";
    case CalibrationMode::kHistogram: return "histogram-match";
  }
  return "?";
}

Tensor CalibrateMagnitude(const Tensor& image, CalibrationMode mode, const Tensor* reference) {
  Tensor out = image;
  if (mode == CalibrationMode::kNone || image.size() == 0) return out;
  if (mode == CalibrationMode::kMinMax) {
    const auto [lo, hi] = std::minmax_element(image.values().begin(), image.values().end());
    const double a = *lo, b = *hi;
    if (!(b > a)) return out;
    for (float& v : out.storage()) v = static_cast<float>((v - a) / (b - a));
    return out;
  }
  if (!reference || reference->size() == 0) {
    throw std::invalid_argument("histogram matching needs a reference image");
  }
  // Rank of each pixel mapped to the same quantile of the reference.
  std::vector<float> ref(reference->values().begin(), reference->values().end());
  std::sort(ref.begin(), ref.end());
  std::vector<std::size_t> order(image.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return image[a] < image[b]; });
  const std::size_t n = order.size();
  for (std::size_t r = 0; r < n;) {
    std::size_t e = r;
    while (e + 1 < n && image[order[e + 1]] == image[order[r]]) ++e;
    // Ties share the reference value at their mid rank.
    const double q = n == 1 ? 0.5 : (0.5 * (r + e)) / (n - 1);
    const std::size_t k = std::min(ref.size() - 1, static_cast<std::size_t>(std::lround(q * (ref.size() - 1))));
    for (std::size_t j = r; j <= e; ++j) out[order[j]] = ref[k];
    r = e + 1;
  }
  return out;
}

}  // namespace mkor
