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

#ifndef MKOR_PIPELINE_H_
#define MKOR_PIPELINE_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mkor/conv_attack.h"
#include "mkor/conv_plan.h"
#include "mkor/datasets.h"
#include "mkor/fc_attack.h"
#include "mkor/fl_sim.h"
#include "mkor/metrics.h"
#include "mkor/model.h"
#include "mkor/params.h"

namespace mkor {

enum class InjectionMode { kNaive, kInconspicuous };

InjectionMode ParseInjectionMode(const std::string& s);
const char* InjectionModeName(InjectionMode m);

struct InjectionConfig {
  InjectionMode mode = InjectionMode::kInconspicuous;
  FcInjectionConfig fc;
  ConvInjectionConfig conv;
  int I = -1, J = -1;
  std::uint64_t plan_seed = 1;
};

struct AttackSetup {
  ModelSpec model;
  ParamSet reference;
  ParamSet injected;
  DecouplingMap map;
  ConvPlan plan;
};

AttackSetup PrepareAttack(const ModelSpec& model, const ParamSet& reference,
                          const InjectionConfig& config);

struct ReconstructionOptions {
  CalibrationMode calibration = CalibrationMode::kNone;
  bool auto_calibrate = true;       // min-max whenever gamma != 1 and calibration is none
  std::optional<Tensor> histogram_reference;
  double gamma = 1.0;               // global scale applied to recovered features
  double eps_rel = 1e-8;
  double delta = 1e-6;
};

struct ClassReconstruction {
  ClassRecovery recovery;  // z1 dropped to keep reports small
  Tensor image;            // input resolution, [0, 1]
  EstimateStats estimate;
  InversionStats inversion;
};

struct ReconstructionReport {
  std::string model;
  std::vector<ClassReconstruction> classes;  // present, non-sink classes
  std::vector<int> absent_labels;
  int sink_label = 0;
  bool sink_present = false;
  double threshold = 0.0;
  CalibrationMode calibration = CalibrationMode::kNone;
  std::vector<std::string> warnings;
  double seconds_gradient = 0.0;
  double seconds_reconstruct = 0.0;
  std::optional<BatchScore> score;
  std::vector<int> batch_labels;
};

ReconstructionReport Reconstruct(const AttackSetup& setup, const GradientUpdate& grad,
                                 const ReconstructionOptions& options);

// Resizes images to the model input: bilinear for up-scaling, nearest otherwise.
std::vector<LabeledImage> FitToModel(const std::vector<LabeledImage>& data, const ModelSpec& model,
                                     bool nearest = false);

struct AttackRun {
  std::vector<LabeledImage> batch;
  GradientUpdate gradient;
  ClientStats client;
  ReconstructionReport report;
};

// build -> inject -> client update -> recover -> estimate -> calibrate -> score.
AttackRun RunAttack(const AttackSetup& setup, const std::vector<LabeledImage>& data,
                    const BatchSpec& batch, const DefenseConfig& defense,
                    const ReconstructionOptions& options, int threads = 1);

}  // namespace mkor

#endif  // MKOR_PIPELINE_H_
