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

#ifndef MKOR_FL_SIM_H_
#define MKOR_FL_SIM_H_

#include <cstdint>
#include <string>
#include <vector>

#include "mkor/datasets.h"
#include "mkor/model.h"
#include "mkor/params.h"

namespace mkor {

struct DefenseConfig {
  double clip_norm = 0.0;  // per-sample L2 clip; <= 0 disables
  double noise_std = 0.0;  // relative to the RMS of the clean summed gradient
  std::uint64_t seed = 0;
};

struct ClientStats {
  std::vector<double> losses;
  std::vector<double> sample_norms;  // before clipping; filled when requested or clipping
  double clean_rms = 0.0;
  int clipped = 0;
};

// Per-sample gradients, optional clipping, summed in batch order, then
// optional Gaussian noise. With threads > 1 the batch is cut into that many
// contiguous chunks whose partial sums are added in chunk order.
GradientUpdate ClientUpdate(const ModelSpec& model, const ParamSet& params,
                            const std::vector<LabeledImage>& batch, const DefenseConfig& defense,
                            ClientStats* stats = nullptr, bool want_sample_norms = false,
                            int threads = 1);

struct AuditThresholds {
  double zero_fraction = 0.5;
  double modified_fraction = 0.2;
  double sample_share = 0.9;
};

struct LayerAudit {
  int layer = 0;
  std::string kind;
  std::size_t count = 0;           // weights + biases
  double zero_fraction = 0.0;      // of weights
  double modified_fraction = 0.0;  // of weights + biases, against the reference
  std::vector<std::string> flags;
};

struct AuditReport {
  std::vector<LayerAudit> layers;
  double peak_modified_fraction = 0.0;
  double overall_modified_fraction = 0.0;
  double max_sample_share = -1.0;   // -1 when no per-sample norms were given
  double mean_sample_share = -1.0;
  std::vector<std::string> flags;
  bool flagged() const { return !flags.empty(); }
};

// Layout mismatch throws.
AuditReport Audit(const ModelSpec& model, const ParamSet& reference, const ParamSet& received,
                  const std::vector<double>* sample_norms = nullptr,
                  const AuditThresholds& thresholds = {});

struct LeakagePoint {
  int k = 0;
  double closed_form = 0.0;  // nats
  double estimate = 0.0;     // nats, from the sample correlation of g1 and the sum
};

struct LeakageResult {
  std::vector<LeakagePoint> points;
  double slope_closed_form = 0.0;  // log-log least squares
  double slope_estimate = 0.0;
};

// I(g_1; sum_k g_k) for i.i.d. Gaussian per-sample gradients: closed form
// 0.5 log(1 + 1/(K - 1)) and a sampled estimate over dims * trials draws.
LeakageResult LeakageDecayExperiment(int dims, const std::vector<int>& ks, int trials,
                                     std::uint64_t seed);

double LogLogSlope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mkor

#endif  // MKOR_FL_SIM_H_
