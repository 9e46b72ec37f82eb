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

#include "mkor/model.h"

#include <stdexcept>

#include "mkor/tensor.h"

namespace mkor {

std::string ShapeToString(const std::vector<int>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s;
}

const char* LayerKindName(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kFc: return "fc";
    case LayerKind::kRelu: return "relu";
    case LayerKind::kSigmoid: return "sigmoid";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kAvgPool: return "avgpool";
    case LayerKind::kFlatten: return "flatten";
  }
  return "?";
}

LayerSpec Conv(int in, int out, int kernel, int stride, int pad) {
  LayerSpec l;
  l.kind = LayerKind::kConv2d;
  l.in_channels = in;
  l.out_channels = out;
  l.kernel = kernel;
  l.stride = stride;
  l.pad = pad;
  return l;
}

LayerSpec Fc(int in, int out) {
  LayerSpec l;
  l.kind = LayerKind::kFc;
  l.in_channels = in;
  l.out_channels = out;
  return l;
}

LayerSpec Act(LayerKind kind) {
  LayerSpec l;
  l.kind = kind;
  return l;
}

LayerSpec Pool(LayerKind kind) {
  LayerSpec l;
  l.kind = kind;
  l.kernel = 2;
  l.stride = 2;
  return l;
}

std::vector<int> ModelSpec::ConvLayers() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(layers.size()); ++i) {
    if (layers[i].kind == LayerKind::kConv2d) out.push_back(i);
  }
  return out;
}

std::vector<int> ModelSpec::FcLayers() const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(layers.size()); ++i) {
    if (layers[i].kind == LayerKind::kFc) out.push_back(i);
  }
  return out;
}

ModelSpec FinalizeModel(std::string name, std::vector<int> input_shape,
                        std::vector<LayerSpec> layers, bool bias) {
  ModelSpec m;
  m.name = std::move(name);
  m.input_shape = input_shape;
  m.has_bias = bias;
  if (input_shape.size() != 3) throw std::invalid_argument("model input must be H x W x C");
  std::vector<int> shape = input_shape;
  bool flat = false;
  auto fail = [&](int i, const std::string& why) {
    throw std::invalid_argument("layer " + std::to_string(i) + " (" +
                                LayerKindName(layers[i].kind) + "): " + why);
  };
  for (int i = 0; i < static_cast<int>(layers.size()); ++i) {
    LayerSpec& l = layers[i];
    l.in_shape = shape;
    switch (l.kind) {
      case LayerKind::kConv2d: {
        if (flat) fail(i, "conv after flatten");
        if (shape[2] != l.in_channels) fail(i, "channel mismatch, input is " + ShapeToString(shape));
        int h = (shape[0] + 2 * l.pad - l.kernel) / l.stride + 1;
        int w = (shape[1] + 2 * l.pad - l.kernel) / l.stride + 1;
        if (h <= 0 || w <= 0) fail(i, "kernel larger than input");
        shape = {h, w, l.out_channels};
        break;
      }
      case LayerKind::kFc:
        if (!flat) fail(i, "fc before flatten");
        if (shape[0] != l.in_channels) fail(i, "width mismatch, input is " + ShapeToString(shape));
        shape = {l.out_channels};
        break;
      case LayerKind::kRelu:
      case LayerKind::kSigmoid:
        break;
      case LayerKind::kMaxPool:
      case LayerKind::kAvgPool:
        if (flat) fail(i, "pool after flatten");
        if (shape[0] % 2 || shape[1] % 2) fail(i, "odd spatial size " + ShapeToString(shape));
        shape = {shape[0] / 2, shape[1] / 2, shape[2]};
        break;
      case LayerKind::kFlatten:
        if (flat) fail(i, "second flatten");
        flat = true;
        m.flatten_layer = i;
        shape = {shape[0] * shape[1] * shape[2]};
        break;
    }
    l.out_shape = shape;
  }
  if (!flat) throw std::invalid_argument("model has no flatten layer");

  std::size_t offset = 0;
  auto add = [&](int layer, ParamRole role, std::vector<int> s) {
    ManifestEntry e;
    e.layer = layer;
    e.role = role;
    e.count = Tensor::CountOf(s);
    e.shape = std::move(s);
    e.offset = offset;
    offset += e.count;
    m.manifest.push_back(std::move(e));
    return static_cast<int>(m.manifest.size()) - 1;
  };
  for (int i = 0; i < static_cast<int>(layers.size()); ++i) {
    LayerSpec& l = layers[i];
    if (l.kind == LayerKind::kConv2d) {
      l.weight_entry = add(i, ParamRole::kWeight, {l.out_channels, l.kernel, l.kernel, l.in_channels});
      if (bias) l.bias_entry = add(i, ParamRole::kBias, {l.out_channels});
    } else if (l.kind == LayerKind::kFc) {
      l.weight_entry = add(i, ParamRole::kWeight, {l.out_channels, l.in_channels});
      if (bias) l.bias_entry = add(i, ParamRole::kBias, {l.out_channels});
    }
  }
  m.param_count = offset;
  m.layers = std::move(layers);
  const auto& out = m.layers.back().out_shape;
  m.num_classes = out.size() == 1 ? out[0] : 0;
  return m;
}

namespace {

ModelSpec BuildLenet(const std::string& name, bool modified, const ModelOptions& o) {
  const int side = o.input_side ? o.input_side : 28;
  const int classes = o.num_classes ? o.num_classes : 10;
  std::vector<LayerSpec> L;
  auto down = [&](int channels) {
    if (modified) {
      L.push_back(Conv(channels, channels, 5, 2, 2));
      L.push_back(Act(LayerKind::kSigmoid));
    } else {
      L.push_back(Pool(LayerKind::kAvgPool));
    }
  };
  L.push_back(Conv(1, 6, 5, 1, 2));
  L.push_back(Act(LayerKind::kSigmoid));
  down(6);
  L.push_back(Conv(6, 16, 5, 1, 0));
  L.push_back(Act(LayerKind::kSigmoid));
  down(16);
  L.push_back(Act(LayerKind::kFlatten));
  const int h = (side / 2 - 4) / 2;
  L.push_back(Fc(16 * h * h, 120));
  L.push_back(Act(LayerKind::kSigmoid));
  L.push_back(Fc(120, 84));
  L.push_back(Act(LayerKind::kSigmoid));
  L.push_back(Fc(84, classes));
  return FinalizeModel(name, {side, side, 1}, std::move(L), o.bias);
}

ModelSpec BuildVgg(const std::string& name, bool modified, const ModelOptions& o) {
  const int side = o.input_side ? o.input_side : 224;
  const int classes = o.num_classes ? o.num_classes : 100;
  const int width = o.fc_width ? o.fc_width : 4096;
  const int blocks[5][2] = {{2, 64}, {2, 128}, {3, 256}, {3, 512}, {3, 512}};
  std::vector<LayerSpec> L;
  int c = 3;
  for (const auto& b : blocks) {
    for (int r = 0; r < b[0]; ++r) {
      L.push_back(Conv(c, b[1], 3, 1, 1));
      L.push_back(Act(LayerKind::kRelu));
      c = b[1];
    }
    if (modified) {
      L.push_back(Conv(c, c, 3, 2, 1));
      L.push_back(Act(LayerKind::kRelu));
    } else {
      L.push_back(Pool(LayerKind::kMaxPool));
    }
  }
  L.push_back(Act(LayerKind::kFlatten));
  const int h = side / 32;
  L.push_back(Fc(h * h * 512, width));
  L.push_back(Act(LayerKind::kRelu));
  L.push_back(Fc(width, width));
  L.push_back(Act(LayerKind::kRelu));
  L.push_back(Fc(width, classes));
  return FinalizeModel(name, {side, side, 3}, std::move(L), o.bias);
}

}  // namespace

ModelSpec BuildModel(const std::string& name, const ModelOptions& options) {
  if (name == "lenet5-original") return BuildLenet(name, false, options);
  if (name == "lenet5-modified") return BuildLenet(name, true, options);
  if (name == "vgg16-original") return BuildVgg(name, false, options);
  if (name == "vgg16-modified") return BuildVgg(name, true, options);
  throw std::invalid_argument("unknown model '" + name + "'");
}

bool IsLenet(const ModelSpec& model) { return model.name.rfind("lenet5", 0) == 0; }

bool IsModifiedVariant(const ModelSpec& model) {
  return model.name.find("modified") != std::string::npos;
}

}  // namespace mkor
