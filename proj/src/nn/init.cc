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

#include <cmath>
#include <random>

#include "mkor/params.h"

namespace mkor {

ParamSet InitParams(const ModelSpec& model, unsigned long long seed) {
  ParamSet p(model);
  std::mt19937_64 rng(seed);
  for (const auto& layer : model.layers) {
    if (layer.weight_entry < 0) continue;
    const auto& w = model.manifest[layer.weight_entry];
    int fan_in = layer.kind == LayerKind::kConv2d
                     ? layer.kernel * layer.kernel * layer.in_channels
                     : layer.in_channels;
    std::uniform_real_distribution<float> u(-1.0f / std::sqrt(float(fan_in)),
                                            1.0f / std::sqrt(float(fan_in)));
    for (float& v : p.Entry(w)) v = u(rng);
    if (layer.bias_entry >= 0) {
      for (float& v : p.Entry(model.manifest[layer.bias_entry])) v = u(rng);
    }
  }
  return p;
}

}  // namespace mkor
