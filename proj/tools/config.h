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

#ifndef MKOR_TOOLS_CONFIG_H_
#define MKOR_TOOLS_CONFIG_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mkor/datasets.h"
#include "mkor/fl_sim.h"
#include "mkor/model.h"
#include "mkor/pipeline.h"

namespace mkor::cli {

// Flat "key = value" file. '#' starts a comment; values may be quoted.
// Unknown keys are rejected so typos do not silently fall back to defaults.
class Config {
 public:
  static Config Load(const std::string& path);
  // "key=value"
  void Set(const std::string& assignment);
  void Set(const std::string& key, const std::string& value);

  bool Has(const std::string& key) const { return values_.count(key) > 0; }
  std::string Str(const std::string& key, const std::string& fallback) const;
  double Real(const std::string& key, double fallback) const;
  long long Int(const std::string& key, long long fallback) const;
  std::uint64_t Seed(const std::string& key, std::uint64_t fallback) const;
  bool Bool(const std::string& key, bool fallback) const;
  std::vector<double> Reals(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct RunConfig {
  ModelSpec model;
  std::uint64_t init_seed = 1;

  std::string dataset = "synth";  // mnist | cifar100 | synth | ppm-folder
  std::string data_path;
  int synth_classes = 0;          // 0: model classes
  int synth_per_class = 1;
  int synth_cell = 1;             // generate at side / cell, upsample nearest
  std::uint64_t synth_seed = 1;

  BatchSpec batch;
  InjectionConfig injection;
  DefenseConfig defense;
  ReconstructionOptions recon;
  std::string histogram_reference;  // image path; histogram calibration only
  std::string out_dir;
  int threads = 1;
};

RunConfig Resolve(const Config& c);

// Loads the configured dataset (not resized).
std::vector<LabeledImage> LoadData(const RunConfig& rc);

}  // namespace mkor::cli

#endif  // MKOR_TOOLS_CONFIG_H_
