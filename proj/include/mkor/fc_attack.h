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

#ifndef MKOR_FC_ATTACK_H_
#define MKOR_FC_ATTACK_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mkor/model.h"
#include "mkor/params.h"
#include "mkor/tensor.h"

namespace mkor {

// K * sum_n p_n (1 - p_n)^(K - 1): expected number of samples alone in their class.
double ExpectedUniqueCount(int k, const std::vector<double>& p);

struct DecouplingMap {
  std::string mode;             // "naive" or "inconspicuous"
  int num_classes = 0;
  std::vector<int> fc_layers;   // model layer indices of the classifier
  // First-layer node pair per class (0-based class index). Naive maps use a
  // single node and leave the second slot at -1.
  std::vector<std::array<int, 2>> twins;
  // carried[i][n]: node carrying class n in fc layer i + 1; the last entry is the output index.
  std::vector<std::vector<int>> carried;
  std::vector<double> alpha;    // second twin row = alpha * first twin row
  // Product of chain weights from each twin to its output; 0 for sigmoid chains.
  std::vector<std::array<double, 2>> chain_gain;
  int sink_label = 0;           // 1-based; 0 = no sink
  double sink_margin = 0.0;
  double sigma = 0.0;
  bool unnormalized = false;    // bias-free classifier
  std::uint64_t seed = 0;
};

struct FcInjectionConfig {
  double alpha_lo = -1.5;
  double alpha_hi = -0.5;
  // Std of the values written into cleared row/column entries around the chain.
  double sigma = 0.0;
  std::uint64_t seed = 1;
  // A large extra bias on one output pulls every sample's softmax onto it, so
  // foreign samples stop leaking into the other classes' chains.
  double sink_margin = 80.0;
  int sink_label = 0;  // 0 = seeded choice
  bool jitter = false;
  double jitter_sigma = 1e-3;
};

struct FcInjection {
  ParamSet params;
  DecouplingMap map;
};

FcInjection InjectFcNaive(const ParamSet& params, const ModelSpec& model, int num_classes,
                          const FcInjectionConfig& config);
FcInjection InjectFcInconspicuous(const ParamSet& params, const ModelSpec& model, int num_classes,
                                  const FcInjectionConfig& config);

struct ClassRecovery {
  int label = 0;
  bool present = false;
  bool sink = false;
  bool singleton = false;
  bool unnormalized = false;
  int twin_used = -1;                // node index in the first FC layer
  double d = 0.0;                    // denominator of the twin used
  std::array<double, 2> twin_d{0.0, 0.0};
  double twin_share = 0.0;           // |d_used| / (|d_a| + |d_b|)
  double multiplicity = -1.0;        // estimated samples of this class; -1 if unknown
  Tensor z1;                         // flat classifier input estimate
};

struct FcRecovery {
  std::vector<ClassRecovery> classes;  // one per decoupled class
  double threshold = 0.0;
  double max_abs_d = 0.0;
};

// eps_rel scales the presence threshold: eps = eps_rel * max |d|.
FcRecovery ReconstructFcInputs(const GradientUpdate& grad, const ModelSpec& model,
                               const DecouplingMap& map, double eps_rel = 1e-8);

}  // namespace mkor

#endif  // MKOR_FC_ATTACK_H_
