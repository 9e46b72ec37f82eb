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

#include "mkor/conv_plan.h"

#include <algorithm>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mkor {

const char* FilterRoleName(FilterRole r) {
  switch (r) {
    case FilterRole::kCopy: return "copy";
    case FilterRole::kMin: return "min";
    case FilterRole::kRight: return "right";
    case FilterRole::kLower: return "lower";
    case FilterRole::kLowerRight: return "lower-right";
    case FilterRole::kTap: return "tap";
  }
  return "?";
}

const char* ConvLayerTypeName(ConvLayerType t) {
  switch (t) {
    case ConvLayerType::kSplit: return "split";
    case ConvLayerType::kCopy: return "copy";
    case ConvLayerType::kCopyPool: return "copy+pool";
    case ConvLayerType::kFourDirection: return "four-direction";
    case ConvLayerType::kFinalPool: return "final-pool";
    case ConvLayerType::kStrideCopy: return "stride-copy";
    case ConvLayerType::kCropSplit: return "crop-split";
    case ConvLayerType::kPhaseSplit: return "phase-split";
  }
  return "?";
}

double ConvPlan::BetaProduct() const {
  double p = 1.0;
  for (const auto& l : layers) p *= l.beta;
  return p;
}

const ChannelTrace* ConvPlan::TraceOf(int channel) const {
  auto it = std::lower_bound(traces.begin(), traces.end(), channel,
                             [](const ChannelTrace& t, int c) { return t.channel < c; });
  return it != traces.end() && it->channel == channel ? &*it : nullptr;
}

namespace {

struct Builder {
  const ModelSpec& model;
  std::mt19937_64 rng;
  ConvPlan plan;

  // Considered output channels drawn at random from the layer's outputs.
  std::vector<int> PickOutputs(const LayerSpec& l, int count, int layer) {
    if (count > l.out_channels) {
      throw std::invalid_argument("channel budget exceeded at layer " + std::to_string(layer) +
                                  ": need " + std::to_string(count) + " of " +
                                  std::to_string(l.out_channels));
    }
    std::vector<int> idx(l.out_channels);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(count);
    return idx;
  }

  PlanLayer& Add(int layer, ConvLayerType type, const std::vector<int>& in, int fanout) {
    const LayerSpec& l = model.layers[layer];
    PlanLayer p;
    p.layer = layer;
    p.type = type;
    p.in_channels = in;
    p.out_channels = PickOutputs(l, static_cast<int>(in.size()) * fanout, layer);
    plan.layers.push_back(std::move(p));
    return plan.layers.back();
  }

  void Copy(PlanLayer& p, int tap) {
    for (std::size_t k = 0; k < p.in_channels.size(); ++k) {
      p.edges.push_back({p.in_channels[k], p.out_channels[k],
                         tap == model.layers[p.layer].kernel / 2 ? FilterRole::kCopy : FilterRole::kTap,
                         tap, tap});
    }
  }

  void FourDirection(PlanLayer& p) {
    const int c = model.layers[p.layer].kernel / 2;
    const FilterRole roles[4] = {FilterRole::kCopy, FilterRole::kRight, FilterRole::kLower,
                                 FilterRole::kLowerRight};
    const int taps[4][2] = {{c, c}, {c, c - 1}, {c - 1, c}, {c - 1, c - 1}};
    for (std::size_t k = 0; k < p.in_channels.size(); ++k) {
      for (int d = 0; d < 4; ++d) {
        p.edges.push_back({p.in_channels[k], p.out_channels[4 * k + d], roles[d], taps[d][0], taps[d][1]});
      }
    }
  }

  // Four taps per input: the products of {a, b} x {a, b}.
  void FourTaps(PlanLayer& p, int a, int b) {
    const int taps[4][2] = {{a, a}, {a, b}, {b, a}, {b, b}};
    for (std::size_t k = 0; k < p.in_channels.size(); ++k) {
      for (int d = 0; d < 4; ++d) {
        p.edges.push_back({p.in_channels[k], p.out_channels[4 * k + d], FilterRole::kTap,
                           taps[d][0], taps[d][1]});
      }
    }
  }
};

void BuildVgg(Builder& b, int I, int J) {
  const ModelSpec& m = b.model;
  // Downsampling events and the last stride-1 conv before each.
  std::vector<int> stage_conv;
  int last = -1;
  for (int i = 0; i < m.flatten_layer; ++i) {
    const auto& l = m.layers[i];
    const bool conv = l.kind == LayerKind::kConv2d;
    if ((conv && l.stride == 2) || l.kind == LayerKind::kMaxPool || l.kind == LayerKind::kAvgPool) {
      if (last < 0) throw std::invalid_argument("downsampling before any conv layer");
      stage_conv.push_back(last);
    } else if (conv) {
      last = i;
    }
  }
  const int pools = static_cast<int>(stage_conv.size());
  if (I < 0) I = 3;
  if (J < 0) J = pools - I;
  if (I < 0 || J < 0 || I + J != pools) {
    throw std::invalid_argument("I + J must equal the number of pooling stages (" +
                                std::to_string(pools) + "), got I=" + std::to_string(I) +
                                " J=" + std::to_string(J));
  }
  b.plan.I = I;
  b.plan.J = J;
  std::vector<int> four(stage_conv.begin() + J, stage_conv.end());
  std::vector<int> considered;
  bool first = true;
  for (int i : m.ConvLayers()) {
    const auto& l = m.layers[i];
    if (first) {
      if (std::count(four.begin(), four.end(), i)) {
        throw std::invalid_argument("first conv layer cannot be a four-direction layer");
      }
      std::vector<int> in(l.in_channels);
      std::iota(in.begin(), in.end(), 0);
      PlanLayer& p = b.Add(i, ConvLayerType::kSplit, in, 2);
      const int c = l.kernel / 2;
      for (std::size_t k = 0; k < in.size(); ++k) {
        p.edges.push_back({in[k], p.out_channels[2 * k], FilterRole::kCopy, c, c});
        p.edges.push_back({in[k], p.out_channels[2 * k + 1], FilterRole::kMin, c, c});
      }
      considered = p.out_channels;
      first = false;
      continue;
    }
    if (l.stride == 2) {
      PlanLayer& p = b.Add(i, ConvLayerType::kStrideCopy, considered, 1);
      b.Copy(p, l.pad + 1);  // reads input 2h + 1
      considered = p.out_channels;
      continue;
    }
    if (std::count(four.begin(), four.end(), i)) {
      PlanLayer& p = b.Add(i, ConvLayerType::kFourDirection, considered, 4);
      b.FourDirection(p);
      considered = p.out_channels;
      continue;
    }
    ConvLayerType t = ConvLayerType::kCopy;
    if (i == stage_conv.back()) t = ConvLayerType::kFinalPool;
    else if (std::count(stage_conv.begin(), stage_conv.end(), i)) t = ConvLayerType::kCopyPool;
    PlanLayer& p = b.Add(i, t, considered, 1);
    b.Copy(p, l.kernel / 2);
    considered = p.out_channels;
  }
}

void BuildLenet(Builder& b) {
  const ModelSpec& m = b.model;
  const auto convs = m.ConvLayers();
  const bool modified = IsModifiedVariant(m);
  if ((!modified && convs.size() != 2) || (modified && convs.size() != 4)) {
    throw std::invalid_argument("unexpected LeNet conv stack");
  }
  std::vector<int> considered{0};
  if (!modified) {
    // conv1: four directions straight from the grey channel; conv2: corner crops.
    b.plan.I = 1;
    b.plan.J = 1;
    PlanLayer& p1 = b.Add(convs[0], ConvLayerType::kFourDirection, considered, 4);
    b.FourDirection(p1);
    PlanLayer& p2 = b.Add(convs[1], ConvLayerType::kCropSplit, p1.out_channels, 4);
    b.FourTaps(p2, 0, m.layers[convs[1]].kernel - 1);
    return;
  }
  b.plan.I = 0;
  b.plan.J = 2;
  PlanLayer& p1 = b.Add(convs[0], ConvLayerType::kSplit, considered, 1);
  b.Copy(p1, m.layers[convs[0]].kernel / 2);
  PlanLayer& p2 = b.Add(convs[1], ConvLayerType::kStrideCopy, p1.out_channels, 1);
  b.Copy(p2, m.layers[convs[1]].pad + 1);
  PlanLayer& p3 = b.Add(convs[2], ConvLayerType::kCropSplit, p2.out_channels, 4);
  b.FourTaps(p3, 0, m.layers[convs[2]].kernel - 1);
  PlanLayer& p4 = b.Add(convs[3], ConvLayerType::kPhaseSplit, p3.out_channels, 4);
  b.FourTaps(p4, m.layers[convs[3]].pad, m.layers[convs[3]].pad + 1);
}

}  // namespace

void TracePlan(const ModelSpec& model, ConvPlan& plan) {
  std::map<int, ChannelTrace> cur;
  for (int c = 0; c < model.input_shape[2]; ++c) {
    ChannelTrace t;
    t.channel = c;
    t.source = c;
    cur[c] = t;
  }
  bool avg = false;
  std::map<int, const PlanLayer*> by_layer;
  for (const auto& p : plan.layers) by_layer[p.layer] = &p;
  for (int i = 0; i < model.flatten_layer; ++i) {
    const auto& l = model.layers[i];
    if (l.kind == LayerKind::kConv2d) {
      auto it = by_layer.find(i);
      if (it == by_layer.end()) throw std::invalid_argument("plan has no entry for conv layer " + std::to_string(i));
      std::map<int, ChannelTrace> next;
      for (const auto& e : it->second->edges) {
        auto src = cur.find(e.in);
        if (src == cur.end()) {
          throw std::invalid_argument("plan edge reads unconsidered channel " + std::to_string(e.in) +
                                      " at layer " + std::to_string(i));
        }
        if (e.out < 0 || e.out >= l.out_channels || e.tap_r < 0 || e.tap_r >= l.kernel ||
            e.tap_c < 0 || e.tap_c >= l.kernel) {
          throw std::invalid_argument("plan edge out of range at layer " + std::to_string(i));
        }
        ChannelTrace t = src->second;
        t.channel = e.out;
        t.polarity *= e.sign();
        t.off_r += t.scale * (e.tap_r - l.pad);
        t.off_c += t.scale * (e.tap_c - l.pad);
        t.scale *= l.stride;
        if (e.role == FilterRole::kRight || e.role == FilterRole::kLowerRight) ++t.shifts_c;
        if (e.role == FilterRole::kLower || e.role == FilterRole::kLowerRight) ++t.shifts_r;
        if (!next.emplace(e.out, t).second) {
          throw std::invalid_argument("two plan edges write channel " + std::to_string(e.out));
        }
      }
      cur = std::move(next);
    } else if (l.kind == LayerKind::kMaxPool || l.kind == LayerKind::kAvgPool) {
      avg = avg || l.kind == LayerKind::kAvgPool;
      for (auto& [c, t] : cur) {
        t.size += t.scale;
        t.scale *= 2;
      }
    }
  }
  plan.traces.clear();
  for (const auto& [c, t] : cur) plan.traces.push_back(t);
  plan.max_pooling = !avg;
  plan.input_shape = model.input_shape;
  plan.feature_shape = model.FeatureShape();
  int g = 0;
  if (!plan.traces.empty()) {
    const auto& t0 = plan.traces.front();
    for (const auto& t : plan.traces) {
      g = std::gcd(g, t.scale);
      g = std::gcd(g, std::abs(t.off_r - t0.off_r));
      g = std::gcd(g, std::abs(t.off_c - t0.off_c));
    }
  }
  plan.native_cell = std::max(1, g);
}

ConvPlan BuildConvPlan(const ModelSpec& model, int I, int J, std::uint64_t seed) {
  Builder b{model, std::mt19937_64(seed), {}};
  b.plan.model = model.name;
  b.plan.seed = seed;
  if (IsLenet(model)) {
    BuildLenet(b);
  } else {
    BuildVgg(b, I, J);
  }
  TracePlan(model, b.plan);
  return b.plan;
}

RegionRef RegionOf(int h, int w, int c, const ConvPlan& plan) {
  const ChannelTrace* t = plan.TraceOf(c);
  if (!t) throw std::invalid_argument("channel " + std::to_string(c) + " is not considered");
  if (h < 0 || w < 0 || h >= plan.feature_shape[0] || w >= plan.feature_shape[1]) {
    throw std::invalid_argument("position outside the feature map");
  }
  RegionRef r;
  r.source = t->source;
  r.polarity = t->polarity;
  const int H = plan.input_shape[0], W = plan.input_shape[1];
  r.r0 = std::clamp(t->scale * h + t->off_r, 0, H);
  r.r1 = std::clamp(t->scale * h + t->off_r + t->size, 0, H);
  r.c0 = std::clamp(t->scale * w + t->off_c, 0, W);
  r.c1 = std::clamp(t->scale * w + t->off_c + t->size, 0, W);
  return r;
}

}  // namespace mkor
