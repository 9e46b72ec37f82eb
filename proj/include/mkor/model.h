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

#ifndef MKOR_MODEL_H_
#define MKOR_MODEL_H_

#include <cstddef>
#include <string>
#include <vector>

namespace mkor {

enum class LayerKind { kConv2d, kFc, kRelu, kSigmoid, kMaxPool, kAvgPool, kFlatten };

const char* LayerKindName(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::kRelu;
  int kernel = 0;
  int stride = 1;
  int pad = 0;
  // Channels for conv2d, node counts for fc.
  int in_channels = 0;
  int out_channels = 0;
  // Filled in by FinalizeModel.
  std::vector<int> in_shape;
  std::vector<int> out_shape;
  int weight_entry = -1;  // index into ModelSpec::manifest, -1 if none
  int bias_entry = -1;
};

enum class ParamRole { kWeight, kBias };

struct ManifestEntry {
  int layer = 0;
  ParamRole role = ParamRole::kWeight;
  std::vector<int> shape;  // conv: [out][kh][kw][in]; fc: [out][in]; bias: [out]
  std::size_t offset = 0;
  std::size_t count = 0;
};

struct ModelSpec {
  std::string name;
  std::vector<int> input_shape;  // H, W, C
  std::vector<LayerSpec> layers;
  std::vector<ManifestEntry> manifest;
  std::size_t param_count = 0;
  int flatten_layer = -1;
  int num_classes = 0;
  bool has_bias = true;

  const std::vector<int>& output_shape() const { return layers.back().out_shape; }
  std::vector<int> ConvLayers() const;  // indices of conv2d layers, forward order
  std::vector<int> FcLayers() const;    // indices of fc layers, forward order
  // Shape of z^0, the flatten input.
  const std::vector<int>& FeatureShape() const { return layers.at(flatten_layer).in_shape; }
};

struct ModelOptions {
  int input_side = 0;   // 0 keeps the variant default (28 or 224)
  int num_classes = 0;  // 0 keeps the variant default (10 or 100)
  int fc_width = 0;     // hidden FC width override for VGG (0 = 4096)
  bool bias = true;
};

// One of lenet5-original, lenet5-modified, vgg16-original, vgg16-modified.
ModelSpec BuildModel(const std::string& name, const ModelOptions& options = {});

// Computes shapes and the parameter manifest; throws if layers do not compose.
ModelSpec FinalizeModel(std::string name, std::vector<int> input_shape,
                        std::vector<LayerSpec> layers, bool bias = true);

// Convenience constructors for hand-built models.
LayerSpec Conv(int in, int out, int kernel, int stride, int pad);
LayerSpec Fc(int in, int out);
LayerSpec Act(LayerKind kind);
LayerSpec Pool(LayerKind kind);

bool IsLenet(const ModelSpec& model);
bool IsModifiedVariant(const ModelSpec& model);

}  // namespace mkor

#endif  // MKOR_MODEL_H_
