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

// mkor: inject / simulate / reconstruct / evaluate / run / audit.
// Every command is a pure function of its config and input files.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <regex>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "config.h"
#include "mkor/image_io.h"
#include "mkor/params.h"
#include "mkor/serialize.h"

namespace fs = std::filesystem;

namespace mkor::cli {
namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  int threads = 0;  // 0: config value
};

RunConfig LoadRun(const Common& common) {
  Config c = Config::Load(common.config_path);
  for (const auto& s : common.sets) c.Set(s);
  RunConfig rc = Resolve(c);
  if (common.threads > 0) rc.threads = common.threads;
  return rc;
}

std::string OutDir(const std::string& flag, const RunConfig* rc) {
  const std::string dir = !flag.empty() ? flag : (rc ? rc->out_dir : "");
  if (dir.empty()) throw std::invalid_argument("no output directory: pass --out or set out_dir");
  fs::create_directories(dir);
  return dir;
}

std::string ImageExt(const Tensor& t) { return t.channels() == 1 ? ".pgm" : ".ppm"; }

std::string Join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void RequireFile(const std::string& path) {
  if (!fs::is_regular_file(path)) throw std::runtime_error("missing file " + path);
}

// Stored images are 8-bit; quantizing first keeps the gradient consistent
// with the ground truth written next to it.
Tensor Quantize(const Tensor& t) {
  Tensor out = t;
  for (auto& v : out.values()) v = static_cast<float>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0);
  return out;
}

// ---- inject ----

void DoInject(const RunConfig& rc, const std::string& dir) {
  const ParamSet reference = InitParams(rc.model, rc.init_seed);
  const AttackSetup setup = PrepareAttack(rc.model, reference, rc.injection);
  WriteParams(Join(dir, "reference.mkor"), rc.model, setup.reference);
  WriteParams(Join(dir, "params.mkor"), rc.model, setup.injected);
  WriteJson(Join(dir, "map.json"), ToJson(setup.map));
  WriteJson(Join(dir, "plan.json"), ToJson(setup.plan));
}

AttackSetup LoadSetup(const RunConfig& rc, const std::string& dir) {
  for (const char* f : {"reference.mkor", "params.mkor", "map.json", "plan.json"}) RequireFile(Join(dir, f));
  AttackSetup s;
  s.model = rc.model;
  s.reference = ReadParams(Join(dir, "reference.mkor"), rc.model);
  s.injected = ReadParams(Join(dir, "params.mkor"), rc.model);
  s.map = DecouplingMapFromJson(ReadJson(Join(dir, "map.json")));
  s.plan = ConvPlanFromJson(ReadJson(Join(dir, "plan.json")), rc.model);
  return s;
}

// ---- simulate ----

void DoSimulate(const RunConfig& rc, const std::string& inject_dir, const std::string& dir) {
  RequireFile(Join(inject_dir, "params.mkor"));
  const ParamSet params = ReadParams(Join(inject_dir, "params.mkor"), rc.model);
  auto batch = FitToModel(MakeBatch(LoadData(rc), rc.batch), rc.model);
  for (auto& b : batch) b.image = Quantize(b.image);

  ClientStats stats;
  const GradientUpdate grad = ClientUpdate(rc.model, params, batch, rc.defense, &stats, true, rc.threads);
  WriteGradients(Join(dir, "grads.mkor"), rc.model, grad);

  const std::string truth = Join(dir, "truth");
  fs::remove_all(truth);
  fs::create_directories(truth);
  Json labels = Json::array();
  for (std::size_t i = 0; i < batch.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%d_%04zu", batch[i].label, i);
    WritePnm(Join(truth, name + ImageExt(batch[i].image)), batch[i].image);
    labels.push_back(batch[i].label);
  }
  Json j;
  j["batch_size"] = batch.size();
  j["distinct_classes"] = CountClasses(batch);
  j["labels"] = labels;
  j["losses"] = Json::array();
  for (double v : stats.losses) j["losses"].push_back(Number(v));
  j["sample_norms"] = Json::array();
  for (double v : stats.sample_norms) j["sample_norms"].push_back(Number(v));
  j["clean_rms"] = Number(stats.clean_rms);
  j["clipped"] = stats.clipped;
  j["clip_norm"] = Number(rc.defense.clip_norm);
  j["noise_std"] = Number(rc.defense.noise_std);
  WriteJson(Join(dir, "batch.json"), j);
}

// ---- reconstruct / evaluate ----

std::map<int, Tensor> LoadRecoveries(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  static const std::regex name(R"(class_(\d+)\.(pgm|ppm))");
  std::map<int, Tensor> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string f = e.path().filename().string();
    if (e.is_regular_file() && std::regex_match(f, m, name)) out.emplace(std::stoi(m[1]), ReadPnm(e.path().string()));
  }
  return out;
}

std::vector<LabeledImage> LoadTruth(const std::string& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  auto truth = LoadPnmFolder(dir);
  if (truth.empty()) throw std::runtime_error("no ground-truth images in " + dir);
  return truth;
}

// Mismatched directories are an error, not a low score.
BatchScore Evaluate(const std::map<int, Tensor>& rec, const std::vector<LabeledImage>& truth) {
  std::set<int> labels;
  for (const auto& t : truth) {
    if (t.image.shape() != truth.front().image.shape()) throw std::runtime_error("ground-truth images differ in size");
    labels.insert(t.label);
  }
  const Tensor& ref = truth.front().image;
  for (const auto& [label, img] : rec) {
    if (!labels.count(label)) {
      throw std::runtime_error("recovered class " + std::to_string(label) + " has no ground-truth image");
    }
    if (img.shape() != ref.shape()) {
      throw std::runtime_error("class " + std::to_string(label) + " image is " + std::to_string(img.height()) + "x" +
                               std::to_string(img.width()) + "x" + std::to_string(img.channels()) +
                               ", ground truth is " + std::to_string(ref.height()) + "x" +
                               std::to_string(ref.width()) + "x" + std::to_string(ref.channels()));
    }
  }
  return ScoreBatch(rec, truth);
}

void DoReconstruct(const RunConfig& rc, const std::string& inject_dir, const std::string& grads_path,
                   const std::string& truth_dir, const std::string& dir) {
  const AttackSetup setup = LoadSetup(rc, inject_dir);
  RequireFile(grads_path);
  const GradientUpdate grad = ReadGradients(grads_path, rc.model);
  ReconstructionOptions options = rc.recon;
  if (!rc.histogram_reference.empty()) options.histogram_reference = ReadPnm(rc.histogram_reference);

  ReconstructionReport report = Reconstruct(setup, grad, options);

  const std::string native = Join(dir, "native");
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename().string().rfind("class_", 0) == 0) fs::remove(e.path());
  }
  fs::remove_all(native);
  fs::create_directories(native);
  const int cell = std::max(1, setup.plan.native_cell);
  std::map<int, Tensor> rec;
  for (const auto& c : report.classes) {
    const std::string name = "class_" + std::to_string(c.recovery.label) + ImageExt(c.image);
    WritePnm(Join(dir, name), c.image);
    const bool divisible = c.image.height() % cell == 0 && c.image.width() % cell == 0;
    WritePnm(Join(native, name), divisible ? BlockMean(c.image, cell) : c.image);
    rec.emplace(c.recovery.label, c.image);
  }
  if (!truth_dir.empty()) {
    const auto truth = LoadTruth(truth_dir);
    report.score = Evaluate(rec, truth);
    for (const auto& t : truth) report.batch_labels.push_back(t.label);
  }

  Json j = ToJson(report);
  // Wall-clock numbers would break byte-identical reruns; they get their own file.
  Json timings;
  timings["seconds_reconstruct"] = j["seconds_reconstruct"];
  j.erase("seconds_gradient");
  j.erase("seconds_reconstruct");
  j["native_cell"] = cell;
  WriteJson(Join(dir, "report.json"), j);
  WriteJson(Join(dir, "timings.json"), timings);
}

Json ScoreJson(const BatchScore& s) { return ToJson(s); }

// ---- audit ----

Json DoAudit(const RunConfig& rc, const std::string& params_path, const std::string& reference_path,
             bool with_batch) {
  RequireFile(params_path);
  const ParamSet received = ReadParams(params_path, rc.model);
  ParamSet reference;
  if (!reference_path.empty()) {
    RequireFile(reference_path);
    reference = ReadParams(reference_path, rc.model);
  } else {
    reference = InitParams(rc.model, rc.init_seed);
  }
  std::vector<double> norms;
  if (with_batch) {
    const auto batch = FitToModel(MakeBatch(LoadData(rc), rc.batch), rc.model);
    ClientStats stats;
    ClientUpdate(rc.model, received, batch, DefenseConfig{}, &stats, true, rc.threads);
    norms = stats.sample_norms;
  }
  const AuditReport report = Audit(rc.model, reference, received, with_batch ? &norms : nullptr);
  return ToJson(report);
}

void Emit(const Json& j, const std::string& path) {
  if (path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    WriteJson(path, j);
  }
}

void AddCommon(CLI::App* app, Common& common) {
  app->add_option("-c,--config", common.config_path, "Flat key = value config file")->required()->check(CLI::ExistingFile);
  app->add_option("--set", common.sets, "Override a config key: key=value (repeatable)");
  app->add_option("--threads", common.threads, "Worker cap for per-sample gradients")->check(CLI::PositiveNumber);
}

int Main(int argc, char** argv) {
  CLI::App app{"MKOR gradient-inversion attack lab"};
  app.require_subcommand(1);

  Common common;
  std::string out, inject_dir, grads, truth, recon, params, reference;
  bool with_batch = false;

  auto* inject = app.add_subcommand("inject", "Write malicious parameters, decoupling map and conv plan");
  AddCommon(inject, common);
  inject->add_option("-o,--out", out, "Output directory");

  auto* simulate = app.add_subcommand("simulate", "Run one client on the malicious parameters");
  AddCommon(simulate, common);
  simulate->add_option("--inject", inject_dir, "Directory written by inject")->required();
  simulate->add_option("-o,--out", out, "Output directory");

  auto* reconstruct = app.add_subcommand("reconstruct", "Recover one image per class from a gradient");
  AddCommon(reconstruct, common);
  reconstruct->add_option("--inject", inject_dir, "Directory written by inject")->required();
  reconstruct->add_option("--grads", grads, "Gradient file written by simulate")->required();
  reconstruct->add_option("--truth", truth, "Ground-truth image directory; adds a score to the report");
  reconstruct->add_option("-o,--out", out, "Output directory");

  auto* evaluate = app.add_subcommand("evaluate", "Score recovered images against ground truth");
  evaluate->add_option("--recon", recon, "Directory with class_<label> images")->required();
  evaluate->add_option("--truth", truth, "Directory with <label>_<idx> images")->required();
  evaluate->add_option("-o,--out", out, "Score JSON path (stdout if omitted)");

  auto* run = app.add_subcommand("run", "inject -> simulate -> reconstruct -> evaluate");
  AddCommon(run, common);
  run->add_option("-o,--out", out, "Output directory");

  auto* audit = app.add_subcommand("audit", "Client-side checks on received parameters");
  AddCommon(audit, common);
  audit->add_option("--params", params, "Received parameter file")->required();
  audit->add_option("--reference", reference, "Expected parameters (default: honest init from the config)");
  audit->add_flag("--with-batch", with_batch, "Also check per-sample gradient shares on the configured batch");
  audit->add_option("-o,--out", out, "Audit JSON path (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*inject) {
      const RunConfig rc = LoadRun(common);
      DoInject(rc, OutDir(out, &rc));
    } else if (*simulate) {
      const RunConfig rc = LoadRun(common);
      DoSimulate(rc, inject_dir, OutDir(out, &rc));
    } else if (*reconstruct) {
      const RunConfig rc = LoadRun(common);
      DoReconstruct(rc, inject_dir, grads, truth, OutDir(out, &rc));
    } else if (*evaluate) {
      Emit(ScoreJson(Evaluate(LoadRecoveries(recon), LoadTruth(truth))), out);
    } else if (*run) {
      const RunConfig rc = LoadRun(common);
      const std::string dir = OutDir(out, &rc);
      const std::string inj = Join(dir, "inject"), sim = Join(dir, "simulate"), rec = Join(dir, "recon");
      for (const auto& d : {inj, sim, rec}) fs::create_directories(d);
      DoInject(rc, inj);
      DoSimulate(rc, inj, sim);
      DoReconstruct(rc, inj, Join(sim, "grads.mkor"), Join(sim, "truth"), rec);
      const BatchScore score = Evaluate(LoadRecoveries(rec), LoadTruth(Join(sim, "truth")));
      WriteJson(Join(dir, "score.json"), ScoreJson(score));
      std::cout << "classes scored " << score.scored() << ", avg SSIM " << score.avg_ssim << ", avg PSNR "
                << score.avg_psnr << "\n";
    } else if (*audit) {
      const RunConfig rc = LoadRun(common);
      const Json j = DoAudit(rc, params, reference, with_batch);
      Emit(j, out);
      if (out.empty()) return 0;
      std::cout << (j.value("flags", Json::array()).empty() ? "no flags" : "flagged") << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "mkor: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace
}  // namespace mkor::cli

int main(int argc, char** argv) { return mkor::cli::Main(argc, argv); }
