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

#include "mkor/serialize.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace mkor {

Json Number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double NumberFrom(const Json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::numeric_limits<double>::quiet_NaN();
}

Json ToJson(const DecouplingMap& m) {
  Json j;
  j["mode"] = m.mode;
  j["num_classes"] = m.num_classes;
  j["fc_layers"] = m.fc_layers;
  j["seed"] = m.seed;
  j["sigma"] = m.sigma;
  j["sink_label"] = m.sink_label;
  j["sink_margin"] = m.sink_margin;
  j["unnormalized"] = m.unnormalized;
  Json classes = Json::array();
  for (int n = 0; n < m.num_classes; ++n) {
    Json c;
    c["label"] = n + 1;
    c["twins"] = {m.twins[n][0], m.twins[n][1]};
    c["alpha"] = m.alpha[n];
    std::vector<int> carried;
    for (const auto& layer : m.carried) carried.push_back(layer[n]);
    c["carried"] = carried;
    if (!m.chain_gain.empty()) c["chain_gain"] = {m.chain_gain[n][0], m.chain_gain[n][1]};
    classes.push_back(c);
  }
  j["classes"] = classes;
  return j;
}

DecouplingMap DecouplingMapFromJson(const Json& j) {
  DecouplingMap m;
  m.mode = j.at("mode").get<std::string>();
  m.num_classes = j.at("num_classes").get<int>();
  m.fc_layers = j.at("fc_layers").get<std::vector<int>>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.sigma = j.at("sigma").get<double>();
  m.sink_label = j.at("sink_label").get<int>();
  m.sink_margin = j.at("sink_margin").get<double>();
  m.unnormalized = j.at("unnormalized").get<bool>();
  const auto& classes = j.at("classes");
  if (static_cast<int>(classes.size()) != m.num_classes) throw std::runtime_error("decoupling map: class count");
  m.carried.assign(m.fc_layers.size() - 1, std::vector<int>(m.num_classes));
  for (int n = 0; n < m.num_classes; ++n) {
    const auto& c = classes[n];
    m.twins.push_back({c.at("twins")[0].get<int>(), c.at("twins")[1].get<int>()});
    m.alpha.push_back(c.at("alpha").get<double>());
    const auto carried = c.at("carried").get<std::vector<int>>();
    if (carried.size() != m.carried.size()) throw std::runtime_error("decoupling map: chain length");
    for (std::size_t l = 0; l < carried.size(); ++l) m.carried[l][n] = carried[l];
    if (c.contains("chain_gain")) {
      m.chain_gain.push_back({c["chain_gain"][0].get<double>(), c["chain_gain"][1].get<double>()});
    }
  }
  return m;
}

Json ToJson(const ConvPlan& p) {
  Json j;
  j["model"] = p.model;
  j["I"] = p.I;
  j["J"] = p.J;
  j["seed"] = p.seed;
  j["considered_channels"] = p.considered();
  j["native_cell"] = p.native_cell;
  j["noise_sigma"] = p.noise_sigma;
  j["beta_product"] = p.BetaProduct();
  Json layers = Json::array();
  for (const auto& l : p.layers) {
    Json lj;
    lj["layer"] = l.layer;
    lj["type"] = ConvLayerTypeName(l.type);
    lj["beta"] = l.beta;
    lj["in_channels"] = l.in_channels;
    lj["out_channels"] = l.out_channels;
    Json edges = Json::array();
    for (const auto& e : l.edges) {
      edges.push_back({{"in", e.in}, {"out", e.out}, {"role", FilterRoleName(e.role)},
                       {"tap", {e.tap_r, e.tap_c}}});
    }
    lj["edges"] = edges;
    layers.push_back(lj);
  }
  j["layers"] = layers;
  Json traces = Json::array();
  for (const auto& t : p.traces) {
    traces.push_back({{"channel", t.channel}, {"source", t.source},
                      {"polarity", t.polarity > 0 ? "max" : "min"}, {"scale", t.scale},
                      {"offset", {t.off_r, t.off_c}}, {"size", t.size},
                      {"shifts", {t.shifts_r, t.shifts_c}}});
  }
  j["traces"] = traces;
  return j;
}

namespace {

FilterRole RoleFrom(const std::string& s) {
  for (FilterRole r : {FilterRole::kCopy, FilterRole::kMin, FilterRole::kRight, FilterRole::kLower,
                       FilterRole::kLowerRight, FilterRole::kTap}) {
    if (s == FilterRoleName(r)) return r;
  }
  throw std::runtime_error("unknown filter role '" + s + "'");
}

ConvLayerType TypeFrom(const std::string& s) {
  for (ConvLayerType t : {ConvLayerType::kSplit, ConvLayerType::kCopy, ConvLayerType::kCopyPool,
                          ConvLayerType::kFourDirection, ConvLayerType::kFinalPool,
                          ConvLayerType::kStrideCopy, ConvLayerType::kCropSplit,
                          ConvLayerType::kPhaseSplit}) {
    if (s == ConvLayerTypeName(t)) return t;
  }
  throw std::runtime_error("unknown conv layer type '" + s + "'");
}

}  // namespace

ConvPlan ConvPlanFromJson(const Json& j, const ModelSpec& model) {
  ConvPlan p;
  p.model = j.at("model").get<std::string>();
  if (p.model != model.name) throw std::runtime_error("conv plan is for " + p.model);
  p.I = j.at("I").get<int>();
  p.J = j.at("J").get<int>();
  p.seed = j.at("seed").get<std::uint64_t>();
  p.noise_sigma = j.value("noise_sigma", 0.0);
  for (const auto& lj : j.at("layers")) {
    PlanLayer l;
    l.layer = lj.at("layer").get<int>();
    l.type = TypeFrom(lj.at("type").get<std::string>());
    l.beta = lj.at("beta").get<double>();
    l.in_channels = lj.at("in_channels").get<std::vector<int>>();
    l.out_channels = lj.at("out_channels").get<std::vector<int>>();
    for (const auto& e : lj.at("edges")) {
      l.edges.push_back({e.at("in").get<int>(), e.at("out").get<int>(),
                         RoleFrom(e.at("role").get<std::string>()), e.at("tap")[0].get<int>(),
                         e.at("tap")[1].get<int>()});
    }
    p.layers.push_back(std::move(l));
  }
  TracePlan(model, p);
  return p;
}

Json ToJson(const AuditReport& r) {
  Json j;
  j["flagged"] = r.flagged();
  j["flags"] = r.flags;
  j["peak_modified_fraction"] = r.peak_modified_fraction;
  j["overall_modified_fraction"] = r.overall_modified_fraction;
  if (r.max_sample_share >= 0) {
    j["max_sample_share"] = r.max_sample_share;
    j["mean_sample_share"] = r.mean_sample_share;
  }
  Json layers = Json::array();
  for (const auto& l : r.layers) {
    layers.push_back({{"layer", l.layer}, {"kind", l.kind}, {"count", l.count},
                      {"zero_fraction", l.zero_fraction}, {"modified_fraction", l.modified_fraction},
                      {"flags", l.flags}});
  }
  j["layers"] = layers;
  return j;
}

Json ToJson(const BatchScore& s) {
  Json j;
  j["scored"] = s.scored();
  j["max_ssim"] = Number(s.max_ssim);
  j["avg_ssim"] = Number(s.avg_ssim);
  j["max_psnr"] = Number(s.max_psnr);
  j["avg_psnr"] = Number(s.avg_psnr);
  j["unmatched_labels"] = s.unmatched_labels;
  Json rows = Json::array();
  for (const auto& c : s.per_class) {
    rows.push_back({{"label", c.label}, {"ssim", Number(c.ssim)}, {"psnr", Number(c.psnr)},
                    {"matched_index", c.matched_index}, {"ssim_global_fallback", c.ssim_fallback}});
  }
  j["per_class"] = rows;
  return j;
}

Json ToJson(const ReconstructionReport& r) {
  Json j;
  j["model"] = r.model;
  j["recovered"] = r.classes.size();
  j["threshold"] = Number(r.threshold);
  j["sink_label"] = r.sink_label;
  j["sink_present"] = r.sink_present;
  j["calibration"] = CalibrationModeName(r.calibration);
  j["absent_labels"] = r.absent_labels;
  Json classes = Json::array();
  for (const auto& c : r.classes) {
    const auto& k = c.recovery;
    Json cj;
    cj["label"] = k.label;
    cj["denominator"] = Number(k.d);
    cj["twin_denominators"] = {Number(k.twin_d[0]), Number(k.twin_d[1])};
    cj["twin_node"] = k.twin_used;
    cj["twin_share"] = Number(k.twin_share);
    cj["multiplicity"] = Number(k.multiplicity);
    cj["singleton"] = k.singleton;
    cj["unnormalized"] = k.unnormalized;
    cj["pixels_both_bounds"] = c.estimate.both;
    cj["pixels_upper_only"] = c.estimate.upper_only;
    cj["pixels_lower_only"] = c.estimate.lower_only;
    cj["pixels_cell_filled"] = c.estimate.cell_filled;
    cj["pixels_prior_filled"] = c.estimate.prior_filled;
    cj["logit_clamps"] = c.inversion.clamped;
    cj["pixels_uncovered"] = c.inversion.uncovered;
    cj["inversion_cell_filled"] = c.inversion.cell_filled;
    cj["inversion_nearest_filled"] = c.inversion.nearest_filled;
    classes.push_back(cj);
  }
  j["classes"] = classes;
  j["warnings"] = r.warnings;
  j["seconds_gradient"] = r.seconds_gradient;
  j["seconds_reconstruct"] = r.seconds_reconstruct;
  if (!r.batch_labels.empty()) j["batch_labels"] = r.batch_labels;
  if (r.score) j["score"] = ToJson(*r.score);
  return j;
}

Json ToJson(const LeakageResult& r) {
  Json j;
  Json pts = Json::array();
  for (const auto& p : r.points) {
    pts.push_back({{"K", p.k}, {"closed_form", p.closed_form}, {"estimate", p.estimate}});
  }
  j["points"] = pts;
  j["slope_closed_form"] = r.slope_closed_form;
  j["slope_estimate"] = r.slope_estimate;
  return j;
}

void WriteJson(const std::string& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

Json ReadJson(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return Json::parse(in);
}

}  // namespace mkor
