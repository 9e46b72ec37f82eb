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

#ifndef MKOR_CONV_ATTACK_H_
#define MKOR_CONV_ATTACK_H_

#include <cstdint>
#include <string>
#include <vector>

#include "mkor/conv_plan.h"
#include "mkor/model.h"
#include "mkor/params.h"
#include "mkor/tensor.h"

namespace mkor {

// Plan edges get their delta kernels; every other conv parameter is zeroed.
ParamSet InjectConvNaive(const ParamSet& params, const ModelSpec& model, const ConvPlan& plan);

enum class InputBlock {
  kAuto,        // considered inputs for VGG, all inputs for LeNet
  kConsidered,  // only considered input channels are touched
  kAll,         // every input channel of a considered output is touched
};

struct ConvInjectionConfig {
  double beta = 1.0;                // applied to every plan layer unless betas is set
  std::vector<double> betas;        // per plan layer
  // Std of the noise written into non-edge block entries. Negative picks the
  // model default: 1e-3, or 1e-5 for sigmoid stacks, whose logit inversion
  // multiplies the contamination by about 4 per layer.
  double sigma = -1.0;
  std::uint64_t seed = 1;
  InputBlock block = InputBlock::kAuto;
};

// Edges get beta * filter (bias 0, or beta for min); other entries of the
// C_in x C_out block get N(0, sigma^2); everything else is left alone.
// Records the betas in `plan`.
double DefaultConvSigma(const ModelSpec& model);

ParamSet InjectConvInconspicuous(const ParamSet& params, const ModelSpec& model, ConvPlan& plan,
                                 const ConvInjectionConfig& config);

struct EstimateStats {
  int both = 0;        // pixels with upper and lower bounds
  int upper_only = 0;
  int lower_only = 0;
  int cell_filled = 0;  // no describer; filled from its native cell
  int prior_filled = 0; // no describer anywhere in its cell: 0.5
};

struct Bounds {
  Tensor upper, lower;  // +inf / -inf where a bound is missing
};

// Upper bound = min over max-describers, lower = max over min-describers,
// estimate = midpoint. The product of the plan's betas is divided out first.
Tensor EstimateInput(const Tensor& z0, const ConvPlan& plan, EstimateStats* stats = nullptr,
                     Bounds* bounds = nullptr, bool clamp = true);

struct InversionStats {
  int clamped = 0;    // activations at 0 or 1 before the logit
  int uncovered = 0;  // input pixels no considered channel reached
  int cell_filled = 0;     // of those, filled from their native cell
  int nearest_filled = 0;  // filled from the nearest covered pixel
};

// Walks the conv stack backwards: logit for Sigmoid, nearest upsampling for
// pooling, and averaged delta-kernel inversion for conv layers. Pixels no
// channel reaches take their native cell's mean, else the nearest value.
Tensor LenetReconstruct(const Tensor& z0, const ModelSpec& model, const ConvPlan& plan,
                        InversionStats* stats = nullptr, double delta = 1e-6, bool clamp = true);

enum class CalibrationMode { kNone, kMinMax, kHistogram };

CalibrationMode ParseCalibrationMode(const std::string& s);
const char* CalibrationModeName(CalibrationMode m);

// kMinMax maps values affinely onto [0, 1] (constant images unchanged);
// kHistogram remaps monotonically onto the reference's value distribution.
Tensor CalibrateMagnitude(const Tensor& image, CalibrationMode mode, const Tensor* reference = nullptr);

}  // namespace mkor

#endif  // MKOR_CONV_ATTACK_H_
