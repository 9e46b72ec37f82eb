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

#include "mkor/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace mkor {

InjectionMode ParseInjectionMode(const std::string& s) {
  if (s == "naive") return InjectionMode::kNaive;
  if (s == "inconspicuous") return InjectionMode::kInconspicuous;
  throw std::invalid_argument("unknown injection mode '" + s + "'");
}

const char* InjectionModeName(InjectionMode m) {
  return m == InjectionMode::kNaive ? "naive" : "inconspicuous";
}

AttackSetup PrepareAttack(const ModelSpec& model, const ParamSet& reference,
                          const InjectionConfig& config) {
  AttackSetup s;
  s.model = model;
  s.reference = reference;
  s.plan = BuildConvPlan(model, config.I, config.J, config.plan_seed);
  const int n = model.num_classes;
  FcInjection fc = config.mode == InjectionMode::kNaive
                       ? InjectFcNaive(reference, model, n, config.fc)
                       : InjectFcInconspicuous(reference, model, n, config.fc);
  s.map = std::move(fc.map);
  s.injected = config.mode == InjectionMode::kNaive
                   ? InjectConvNaive(fc.params, model, s.plan)
                   : InjectConvInconspicuous(fc.params, model, s.plan, config.conv);
  return s;
}

ReconstructionReport Reconstruct(const AttackSetup& setup, const GradientUpdate& grad,
                                 const ReconstructionOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  ReconstructionReport r;
  r.model = setup.model.name;
  r.sink_label = setup.map.sink_label;
  CalibrationMode mode = options.calibration;
  if (mode == CalibrationMode::kNone && options.auto_calibrate && options.gamma != 1.0) {
    mode = CalibrationMode::kMinMax;
  }
  r.calibration = mode;
  if (mode == CalibrationMode::kHistogram && !options.histogram_reference) {
    throw std::invalid_argument("histogram calibration needs a reference image");
  }
  const FcRecovery fc = ReconstructFcInputs(grad, setup.model, setup.map, options.eps_rel);
  r.threshold = fc.threshold;
  const bool lenet = IsLenet(setup.model);
  for (const auto& c : fc.classes) {
    if (!c.present) {
      r.absent_labels.push_back(c.label);
      continue;
    }
    if (c.sink) {
      r.sink_present = true;
      continue;
    }
    ClassReconstruction cr;
    cr.recovery = c;
    cr.recovery.z1 = Tensor();
    Tensor z = c.z1.Reshaped(setup.model.FeatureShape());
    if (options.gamma != 1.0) {
      for (float& v : z.storage()) v = static_cast<float>(v * options.gamma);
    }
    const bool clamp = mode == CalibrationMode::kNone;
    Tensor img = lenet ? LenetReconstruct(z, setup.model, setup.plan, &cr.inversion, options.delta, clamp)
                       : EstimateInput(z, setup.plan, &cr.estimate, nullptr, clamp);
    if (mode != CalibrationMode::kNone) {
      img = CalibrateMagnitude(img, mode, options.histogram_reference ? &*options.histogram_reference : nullptr);
      for (float& v : img.storage()) v = std::clamp(v, 0.0f, 1.0f);
    }
    cr.image = std::move(img);
    if (cr.inversion.clamped > 0) {
      std::ostringstream m;
      m << "class " << c.label << ": " << cr.inversion.clamped << " activations clamped before logit";
      r.warnings.push_back(m.str());
    }
    const int fill = cr.estimate.prior_filled + cr.inversion.nearest_filled;
    if (fill > 0) {
      std::ostringstream m;
      m << "class " << c.label << ": " << fill << " pixels filled without a describer";
      r.warnings.push_back(m.str());
    }
    if (c.unnormalized) {
      r.warnings.push_back("class " + std::to_string(c.label) + ": bias-free recovery is unnormalized");
    }
    r.classes.push_back(std::move(cr));
  }
  if (r.sink_present) {
    r.warnings.push_back("class " + std::to_string(r.sink_label) +
                         " is the sink output and cannot be recovered");
  }
  r.seconds_reconstruct =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::vector<LabeledImage> FitToModel(const std::vector<LabeledImage>& data, const ModelSpec& model,
                                     bool nearest) {
  const int H = model.input_shape[0], W = model.input_shape[1], C = model.input_shape[2];
  std::vector<LabeledImage> out;
  out.reserve(data.size());
  for (const auto& d : data) {
    if (d.image.channels() != C) {
      throw std::invalid_argument("image has " + std::to_string(d.image.channels()) +
                                  " channels, model expects " + std::to_string(C));
    }
    if (d.image.height() == H && d.image.width() == W) {
      out.push_back(d);
    } else if (!nearest && d.image.height() < H) {
      out.push_back({UpscaleBilinear(d.image, H, W), d.label});
    } else {
      out.push_back({ResizeNearest(d.image, H, W), d.label});
    }
  }
  return out;
}

AttackRun RunAttack(const AttackSetup& setup, const std::vector<LabeledImage>& data,
                    const BatchSpec& batch_spec, const DefenseConfig& defense,
                    const ReconstructionOptions& options, int threads) {
  AttackRun run;
  run.batch = FitToModel(MakeBatch(data, batch_spec), setup.model);
  const auto t0 = std::chrono::steady_clock::now();
  run.gradient = ClientUpdate(setup.model, setup.injected, run.batch, defense, &run.client, false, threads);
  const double grad_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  run.report = Reconstruct(setup, run.gradient, options);
  run.report.seconds_gradient = grad_s;
  std::map<int, Tensor> rec;
  for (const auto& c : run.report.classes) rec.emplace(c.recovery.label, c.image);
  run.report.score = ScoreBatch(rec, run.batch);
  for (const auto& b : run.batch) run.report.batch_labels.push_back(b.label);
  return run;
}

}  // namespace mkor
