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

#include "mkor/params.h"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mkor {

std::span<float> ParamSet::Bias(const ModelSpec& m, int layer) {
  int e = m.layers.at(layer).bias_entry;
  if (e < 0) return {};
  return Entry(m.manifest[e]);
}

std::span<const float> ParamSet::Bias(const ModelSpec& m, int layer) const {
  int e = m.layers.at(layer).bias_entry;
  if (e < 0) return {};
  return Entry(m.manifest[e]);
}

GradientUpdate SumGradients(const std::vector<GradientUpdate>& grads) {
  if (grads.empty()) throw std::invalid_argument("SumGradients: empty list");
  GradientUpdate out = grads.front();
  for (std::size_t g = 1; g < grads.size(); ++g) {
    if (grads[g].values.size() != out.values.size()) {
      throw std::invalid_argument("SumGradients: layout mismatch");
    }
    const float* src = grads[g].values.data();
    float* dst = out.values.data();
    for (std::size_t i = 0; i < out.values.size(); ++i) dst[i] += src[i];
    out.batch_size += grads[g].batch_size;
  }
  return out;
}

double L2Norm(std::span<const float> v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

namespace {

const char* RoleName(ParamRole r) { return r == ParamRole::kWeight ? "weight" : "bias"; }

void WriteManifest(std::ostream& out, const ModelSpec& model) {
  out << "model " << model.name << "\n";
  out << "entries " << model.manifest.size() << "\n";
  for (const auto& e : model.manifest) {
    out << e.layer << " " << RoleName(e.role) << " " << ShapeToString(e.shape) << "\n";
  }
}

void CheckManifest(std::istream& in, const ModelSpec& model, const std::string& path) {
  std::string line, word;
  std::getline(in, line);
  std::size_t entries = 0;
  {
    std::istringstream ls(line);
    ls >> word;
    if (word != "model") throw std::runtime_error(path + ": missing model line");
  }
  std::getline(in, line);
  {
    std::istringstream ls(line);
    ls >> word >> entries;
    if (word != "entries") throw std::runtime_error(path + ": missing entries line");
  }
  if (entries != model.manifest.size()) {
    throw std::runtime_error(path + ": manifest has " + std::to_string(entries) +
                             " entries, model expects " + std::to_string(model.manifest.size()));
  }
  for (const auto& e : model.manifest) {
    std::getline(in, line);
    std::ostringstream want;
    want << e.layer << " " << RoleName(e.role) << " " << ShapeToString(e.shape);
    if (line != want.str()) {
      throw std::runtime_error(path + ": manifest entry '" + line + "' != '" + want.str() + "'");
    }
  }
}

void WriteValues(std::ostream& out, const std::vector<float>& v) {
  static_assert(std::endian::native == std::endian::little, "big-endian hosts not supported");
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void ReadValues(std::istream& in, std::vector<float>& v, const std::string& path) {
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
  if (static_cast<std::size_t>(in.gcount()) != v.size() * sizeof(float)) {
    throw std::runtime_error(path + ": truncated value block");
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw std::runtime_error(path + ": trailing bytes after value block");
  }
}

std::ofstream OpenOut(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::ifstream OpenIn(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return in;
}

}  // namespace

void WriteParams(const std::string& path, const ModelSpec& model, const ParamSet& params) {
  if (params.values.size() != model.param_count) throw std::invalid_argument("params/model mismatch");
  auto out = OpenOut(path);
  out << "MKORPARAMS v1\n";
  WriteManifest(out, model);
  WriteValues(out, params.values);
  if (!out) throw std::runtime_error("write failed: " + path);
}

ParamSet ReadParams(const std::string& path, const ModelSpec& model) {
  auto in = OpenIn(path);
  std::string line;
  std::getline(in, line);
  if (line != "MKORPARAMS v1") throw std::runtime_error(path + ": not an MKORPARAMS v1 file");
  CheckManifest(in, model, path);
  ParamSet p(model);
  ReadValues(in, p.values, path);
  return p;
}

void WriteGradients(const std::string& path, const ModelSpec& model, const GradientUpdate& grad) {
  if (grad.values.size() != model.param_count) throw std::invalid_argument("gradient/model mismatch");
  auto out = OpenOut(path);
  out << "MKORGRADS v1\n";
  out << "K " << grad.batch_size << "\n";
  WriteManifest(out, model);
  WriteValues(out, grad.values);
  if (!out) throw std::runtime_error("write failed: " + path);
}

GradientUpdate ReadGradients(const std::string& path, const ModelSpec& model) {
  auto in = OpenIn(path);
  std::string line, word;
  std::getline(in, line);
  if (line != "MKORGRADS v1") throw std::runtime_error(path + ": not an MKORGRADS v1 file");
  std::getline(in, line);
  std::istringstream ls(line);
  int k = 0;
  ls >> word >> k;
  if (word != "K" || k < 1) throw std::runtime_error(path + ": bad batch-size line");
  CheckManifest(in, model, path);
  GradientUpdate g(model, k);
  ReadValues(in, g.values, path);
  return g;
}

}  // namespace mkor
