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

#ifndef MKOR_CONV_PLAN_H_
#define MKOR_CONV_PLAN_H_

#include <cstdint>
#include <string>
#include <vector>

#include "mkor/model.h"

namespace mkor {

// Delta kernels. "right" puts its tap one column left of centre, so the
// output at (h, w) reads the input at (h, w - 1); "lower" reads (h - 1, w).
// kTap is a delta at an arbitrary position (crop and stride sampling).
enum class FilterRole { kCopy, kMin, kRight, kLower, kLowerRight, kTap };

enum class ConvLayerType {
  kSplit,          // first layer: copy and min per colour
  kCopy,
  kCopyPool,       // copy, a pooling layer follows
  kFourDirection,  // copy, right, lower, lower-right; a pooling layer follows
  kFinalPool,      // copy into the last pooling layer
  kStrideCopy,     // stride-2 conv standing in for a pool
  kCropSplit,      // valid conv: four corner taps per input channel
  kPhaseSplit,     // stride-2 conv: four sampling phases per input channel
};

const char* FilterRoleName(FilterRole r);
const char* ConvLayerTypeName(ConvLayerType t);

struct PlanEdge {
  int in = 0;
  int out = 0;
  FilterRole role = FilterRole::kCopy;
  int tap_r = 0, tap_c = 0;
  // +1, or -1 with bias +1 for min.
  int sign() const { return role == FilterRole::kMin ? -1 : 1; }
};

struct PlanLayer {
  int layer = 0;  // model layer index
  ConvLayerType type = ConvLayerType::kCopy;
  std::vector<int> in_channels;   // considered inputs
  std::vector<int> out_channels;  // considered outputs
  std::vector<PlanEdge> edges;
  double beta = 1.0;
};

// Geometry of one considered channel relative to the input image: the
// element (h, w) sees rows [scale*h + off_r, scale*h + off_r + size) and the
// same for columns, of `source` (polarity +1) or of 1 - source (-1).
struct ChannelTrace {
  int channel = 0;
  int source = 0;
  int polarity = 1;
  int scale = 1;
  int off_r = 0, off_c = 0;
  int size = 1;
  int shifts_r = 0, shifts_c = 0;  // number of column/row shifts along the chain
};

struct RegionRef {
  int r0 = 0, r1 = 0, c0 = 0, c1 = 0;  // half-open, clipped to the image
  int source = 0;
  int polarity = 1;
  bool empty() const { return r0 >= r1 || c0 >= c1; }
};

struct ConvPlan {
  std::string model;
  int I = 0, J = 0;
  std::uint64_t seed = 0;
  std::vector<PlanLayer> layers;     // one per conv layer, forward order
  std::vector<ChannelTrace> traces;  // one per considered final channel
  std::vector<int> input_shape;      // H, W, C
  std::vector<int> feature_shape;    // z^0 shape
  bool max_pooling = true;           // regions are extrema (false: averages)
  int native_cell = 1;               // side of the cells the traces resolve
  double noise_sigma = 0.0;          // set by inconspicuous injection

  double BetaProduct() const;
  const ChannelTrace* TraceOf(int channel) const;
  int considered() const { return static_cast<int>(traces.size()); }
};

// VGG: I four-direction layers after J copy-only pooling stages (defaults
// 3 and 2; pass -1). LeNet variants use their fixed plans and ignore I, J.
ConvPlan BuildConvPlan(const ModelSpec& model, int I, int J, std::uint64_t seed);

// Recomputes traces from layers; BuildConvPlan and the JSON reader call it.
void TracePlan(const ModelSpec& model, ConvPlan& plan);

// Throws for channels outside the considered set.
RegionRef RegionOf(int h, int w, int c, const ConvPlan& plan);

}  // namespace mkor

#endif  // MKOR_CONV_PLAN_H_
