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

#include "config.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace mkor::cli {
namespace {

const std::set<std::string>& KnownKeys() {
  static const std::set<std::string> keys = {
      "model", "input_side", "num_classes", "fc_width", "bias", "init_seed",
      "dataset", "data_path", "synth_classes", "synth_per_class", "synth_cell", "synth_seed",
      "batch_regime", "batch_size", "class_cap", "class_probs", "batch_seed",
      "injection", "alpha_lo", "alpha_hi", "fc_sigma", "fc_seed", "sink_margin", "sink_label",
      "fc_jitter", "conv_sigma", "beta", "betas", "conv_seed", "input_block", "plan_i", "plan_j",
      "plan_seed", "clip_norm", "noise_std", "defense_seed", "calibration", "auto_calibrate",
      "gamma", "eps_rel", "delta", "histogram_reference", "threads", "out_dir", "image_format"};
  return keys;
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string Unquote(std::string v) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
    return v.substr(1, v.size() - 2);
  }
  return v;
}

[[noreturn]] void Bad(const std::string& key, const std::string& v, const char* what) {
  throw std::invalid_argument("config: " + key + " = '" + v + "' is not " + what);
}

InputBlock ParseBlock(const std::string& s) {
  if (s == "auto") return InputBlock::kAuto;
  if (s == "considered") return InputBlock::kConsidered;
  if (s == "all") return InputBlock::kAll;
  throw std::invalid_argument("config: input_block must be auto, considered or all");
}

}  // namespace

Config Config::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  Config c;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    // Comments only outside quotes; values here never contain '#'.
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = Trim(line);
    if (line.empty() || line.front() == '[') continue;  // tolerate TOML table headers
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(path + ":" + std::to_string(n) + ": expected key = value");
    }
    c.Set(Trim(line.substr(0, eq)), Unquote(Trim(line.substr(eq + 1))));
  }
  return c;
}

void Config::Set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw std::invalid_argument("--set expects key=value, got '" + assignment + "'");
  Set(Trim(assignment.substr(0, eq)), Unquote(Trim(assignment.substr(eq + 1))));
}

void Config::Set(const std::string& key, const std::string& value) {
  if (!KnownKeys().count(key)) throw std::invalid_argument("config: unknown key '" + key + "'");
  values_[key] = value;
}

std::string Config::Str(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double Config::Real(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) Bad(key, it->second, "a number");
    return v;
  } catch (const std::logic_error&) {
    Bad(key, it->second, "a number");
  }
}

long long Config::Int(const std::string& key, long long fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  long long v = 0;
  const auto& s = it->second;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) Bad(key, s, "an integer");
  return v;
}

std::uint64_t Config::Seed(const std::string& key, std::uint64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::uint64_t v = 0;
  const auto& s = it->second;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) Bad(key, s, "an unsigned seed");
  return v;
}

bool Config::Bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  Bad(key, it->second, "true/false");
}

std::vector<double> Config::Reals(const std::string& key) const {
  std::vector<double> out;
  auto it = values_.find(key);
  if (it == values_.end()) return out;
  std::string s = it->second;
  if (!s.empty() && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = Trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      Bad(key, it->second, "a comma-separated list of numbers");
    }
  }
  return out;
}

RunConfig Resolve(const Config& c) {
  RunConfig rc;
  ModelOptions mo;
  mo.input_side = static_cast<int>(c.Int("input_side", 0));
  mo.num_classes = static_cast<int>(c.Int("num_classes", 0));
  mo.fc_width = static_cast<int>(c.Int("fc_width", 0));
  mo.bias = c.Bool("bias", true);
  rc.model = BuildModel(c.Str("model", "lenet5-original"), mo);
  rc.init_seed = c.Seed("init_seed", 1);

  rc.dataset = c.Str("dataset", "synth");
  if (rc.dataset != "mnist" && rc.dataset != "cifar100" && rc.dataset != "synth" && rc.dataset != "ppm-folder") {
    throw std::invalid_argument("config: dataset must be mnist, cifar100, synth or ppm-folder");
  }
  rc.data_path = c.Str("data_path", "");
  if (rc.dataset != "synth" && rc.data_path.empty()) {
    throw std::invalid_argument("config: dataset " + rc.dataset + " needs data_path");
  }
  rc.synth_classes = static_cast<int>(c.Int("synth_classes", 0));
  rc.synth_per_class = static_cast<int>(c.Int("synth_per_class", 1));
  rc.synth_cell = static_cast<int>(c.Int("synth_cell", 1));
  rc.synth_seed = c.Seed("synth_seed", 1);

  rc.batch.regime = ParseBatchRegime(c.Str("batch_regime", "unique"));
  rc.batch.batch_size = static_cast<int>(c.Int("batch_size", 10));
  rc.batch.class_cap = static_cast<int>(c.Int("class_cap", 0));
  rc.batch.class_probs = c.Reals("class_probs");
  rc.batch.seed = c.Seed("batch_seed", 1);

  InjectionConfig& ic = rc.injection;
  ic.mode = ParseInjectionMode(c.Str("injection", "inconspicuous"));
  ic.fc.alpha_lo = c.Real("alpha_lo", ic.fc.alpha_lo);
  ic.fc.alpha_hi = c.Real("alpha_hi", ic.fc.alpha_hi);
  ic.fc.sigma = c.Real("fc_sigma", ic.fc.sigma);
  ic.fc.seed = c.Seed("fc_seed", 1);
  ic.fc.sink_margin = c.Real("sink_margin", ic.fc.sink_margin);
  ic.fc.sink_label = static_cast<int>(c.Int("sink_label", 0));
  ic.fc.jitter = c.Bool("fc_jitter", false);
  ic.conv.sigma = c.Real("conv_sigma", ic.conv.sigma);
  ic.conv.beta = c.Real("beta", 1.0);
  ic.conv.betas = c.Reals("betas");
  ic.conv.seed = c.Seed("conv_seed", 1);
  ic.conv.block = ParseBlock(c.Str("input_block", "auto"));
  ic.I = static_cast<int>(c.Int("plan_i", -1));
  ic.J = static_cast<int>(c.Int("plan_j", -1));
  ic.plan_seed = c.Seed("plan_seed", 1);

  rc.defense.clip_norm = c.Real("clip_norm", 0.0);
  rc.defense.noise_std = c.Real("noise_std", 0.0);
  rc.defense.seed = c.Seed("defense_seed", 1);

  rc.recon.calibration = ParseCalibrationMode(c.Str("calibration", "none"));
  rc.recon.auto_calibrate = c.Bool("auto_calibrate", true);
  rc.recon.gamma = c.Real("gamma", 1.0);
  rc.recon.eps_rel = c.Real("eps_rel", 1e-8);
  rc.recon.delta = c.Real("delta", 1e-6);
  rc.histogram_reference = c.Str("histogram_reference", "");
  if (rc.recon.calibration == CalibrationMode::kHistogram && rc.histogram_reference.empty()) {
    throw std::invalid_argument("config: calibration = histogram needs histogram_reference");
  }
  rc.out_dir = c.Str("out_dir", "");
  if (c.Str("image_format", "pnm") != "pnm") {
    throw std::invalid_argument("config: image_format must be pnm (PGM for gray, PPM for color)");
  }
  rc.threads = static_cast<int>(c.Int("threads", 1));
  if (rc.threads < 1) throw std::invalid_argument("config: threads must be >= 1");
  return rc;
}

std::vector<LabeledImage> LoadData(const RunConfig& rc) {
  if (rc.dataset == "mnist") return LoadMnistDir(rc.data_path);
  if (rc.dataset == "cifar100") return LoadCifar100(rc.data_path);
  if (rc.dataset == "ppm-folder") return LoadPnmFolder(rc.data_path);
  const auto& in = rc.model.input_shape;
  if (rc.synth_cell < 1 || in[0] % rc.synth_cell || in[1] % rc.synth_cell) {
    throw std::invalid_argument("config: synth_cell must divide the input side");
  }
  const int classes = rc.synth_classes > 0 ? rc.synth_classes : rc.model.num_classes;
  auto data = SynthDataset(classes, rc.synth_per_class, in[0] / rc.synth_cell, in[1] / rc.synth_cell, in[2],
                           rc.synth_seed);
  if (rc.synth_cell > 1) {
    for (auto& d : data) d.image = ResizeNearest(d.image, in[0], in[1]);
  }
  return data;
}

}  // namespace mkor::cli
