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

#ifndef MKOR_PARAMS_H_
#define MKOR_PARAMS_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mkor/model.h"
#include "mkor/tensor.h"

namespace mkor {

// Flat parameter store laid out by a ModelSpec manifest.
struct ParamSet {
  std::vector<float> values;

  ParamSet() = default;
  explicit ParamSet(const ModelSpec& model) : values(model.param_count, 0.0f) {}

  std::span<float> Entry(const ManifestEntry& e) { return {values.data() + e.offset, e.count}; }
  std::span<const float> Entry(const ManifestEntry& e) const {
    return {values.data() + e.offset, e.count};
  }
  std::span<float> Weight(const ModelSpec& m, int layer) {
    return Entry(m.manifest.at(m.layers.at(layer).weight_entry));
  }
  std::span<const float> Weight(const ModelSpec& m, int layer) const {
    return Entry(m.manifest.at(m.layers.at(layer).weight_entry));
  }
  // Empty span for bias-free models.
  std::span<float> Bias(const ModelSpec& m, int layer);
  std::span<const float> Bias(const ModelSpec& m, int layer) const;
};

// Gradient with the same layout as ParamSet, summed over `batch_size` samples.
struct GradientUpdate : ParamSet {
  int batch_size = 0;

  GradientUpdate() = default;
  explicit GradientUpdate(const ModelSpec& model, int k = 0) : ParamSet(model), batch_size(k) {}
};

// Element-wise sum in list order; throws on layout mismatch or an empty list.
GradientUpdate SumGradients(const std::vector<GradientUpdate>& grads);

double L2Norm(std::span<const float> v);

// Container files: a header line, K (gradients only), the manifest as text,
// then float32 values little-endian in manifest order.
void WriteParams(const std::string& path, const ModelSpec& model, const ParamSet& params);
ParamSet ReadParams(const std::string& path, const ModelSpec& model);
void WriteGradients(const std::string& path, const ModelSpec& model, const GradientUpdate& grad);
GradientUpdate ReadGradients(const std::string& path, const ModelSpec& model);

// Reference initialization: U(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
ParamSet InitParams(const ModelSpec& model, unsigned long long seed);

}  // namespace mkor

#endif  // MKOR_PARAMS_H_
