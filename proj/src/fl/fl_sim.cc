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

#include "mkor/fl_sim.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "mkor/network.h"

namespace mkor {
namespace {

struct Partial {
  GradientUpdate sum;
  std::vector<double> losses, norms;
  int clipped = 0;
};

void RunChunk(const ModelSpec& model, const ParamSet& params, const std::vector<LabeledImage>& batch,
              std::size_t begin, std::size_t end, const DefenseConfig& defense, bool per_sample,
              Partial& out) {
  out.sum = GradientUpdate(model, 0);
  GradientUpdate one;
  for (std::size_t k = begin; k < end; ++k) {
    if (!per_sample) {
      out.losses.push_back(AccumulateGradient(model, params, batch[k].image, batch[k].label, out.sum));
      continue;
    }
    if (one.values.size() != model.param_count) one = GradientUpdate(model, 0);
    std::fill(one.values.begin(), one.values.end(), 0.0f);
    out.losses.push_back(AccumulateGradientT<float>(model, params.values, batch[k].image,
                                                    batch[k].label, one.values));
    const double norm = L2Norm(one.values);
    out.norms.push_back(norm);
    double scale = 1.0;
    if (defense.clip_norm > 0.0 && norm > defense.clip_norm) {
      scale = defense.clip_norm / norm;
      ++out.clipped;
    }
    float* dst = out.sum.values.data();
    const float* src = one.values.data();
    if (scale == 1.0) {
      for (std::size_t i = 0; i < one.values.size(); ++i) dst[i] += src[i];
    } else {
      for (std::size_t i = 0; i < one.values.size(); ++i) dst[i] += static_cast<float>(src[i] * scale);
    }
    out.sum.batch_size += 1;
  }
}

}  // namespace

GradientUpdate ClientUpdate(const ModelSpec& model, const ParamSet& params,
                            const std::vector<LabeledImage>& batch, const DefenseConfig& defense,
                            ClientStats* stats, bool want_sample_norms, int threads) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (defense.noise_std < 0.0) throw std::invalid_argument("noise std must be >= 0");
  const bool per_sample = want_sample_norms || defense.clip_norm > 0.0;
  const int t = std::max(1, std::min<int>(threads, static_cast<int>(batch.size())));
  std::vector<Partial> parts(t);
  if (t == 1) {
    RunChunk(model, params, batch, 0, batch.size(), defense, per_sample, parts[0]);
  } else {
    std::vector<std::thread> pool;
    const std::size_t n = batch.size();
    for (int i = 0; i < t; ++i) {
      const std::size_t b = n * i / t, e = n * (i + 1) / t;
      pool.emplace_back([&, b, e, i] { RunChunk(model, params, batch, b, e, defense, per_sample, parts[i]); });
    }
    for (auto& th : pool) th.join();
  }
  GradientUpdate sum = std::move(parts[0].sum);
  ClientStats st;
  for (int i = 0; i < t; ++i) {
    if (i > 0) {
      for (std::size_t k = 0; k < sum.values.size(); ++k) sum.values[k] += parts[i].sum.values[k];
      sum.batch_size += parts[i].sum.batch_size;
    }
    st.losses.insert(st.losses.end(), parts[i].losses.begin(), parts[i].losses.end());
    st.sample_norms.insert(st.sample_norms.end(), parts[i].norms.begin(), parts[i].norms.end());
    st.clipped += parts[i].clipped;
  }
  st.clean_rms = L2Norm(sum.values) / std::sqrt(static_cast<double>(sum.values.size()));
  if (defense.noise_std > 0.0) {
    std::mt19937_64 rng(defense.seed);
    std::normal_distribution<double> noise(0.0, defense.noise_std * st.clean_rms);
    for (float& v : sum.values) v += static_cast<float>(noise(rng));
  }
  if (stats) *stats = std::move(st);
  return sum;
}

AuditReport Audit(const ModelSpec& model, const ParamSet& reference, const ParamSet& received,
                  const std::vector<double>* sample_norms, const AuditThresholds& th) {
  if (reference.values.size() != model.param_count || received.values.size() != model.param_count) {
    throw std::invalid_argument("audit: parameter layout mismatch");
  }
  AuditReport r;
  std::size_t total = 0, total_mod = 0;
  for (int i = 0; i < static_cast<int>(model.layers.size()); ++i) {
    const auto& l = model.layers[i];
    if (l.weight_entry < 0) continue;
    LayerAudit a;
    a.layer = i;
    a.kind = LayerKindName(l.kind);
    const auto w = received.Weight(model, i);
    const auto wr = reference.Weight(model, i);
    const auto b = received.Bias(model, i);
    const auto br = reference.Bias(model, i);
    std::size_t zeros = 0, mod = 0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      zeros += w[k] == 0.0f;
      mod += w[k] != wr[k];
    }
    for (std::size_t k = 0; k < b.size(); ++k) mod += b[k] != br[k];
    a.count = w.size() + b.size();
    a.zero_fraction = static_cast<double>(zeros) / w.size();
    a.modified_fraction = static_cast<double>(mod) / a.count;
    total += a.count;
    total_mod += mod;
    auto flag = [&](const std::string& what, double v, double limit) {
      std::ostringstream s;
      s << "layer " << i << " (" << a.kind << "): " << what << " " << v << " > " << limit;
      a.flags.push_back(s.str());
      r.flags.push_back(s.str());
    };
    if (a.zero_fraction > th.zero_fraction) flag("zero-weight fraction", a.zero_fraction, th.zero_fraction);
    if (a.modified_fraction > th.modified_fraction) {
      flag("modified fraction", a.modified_fraction, th.modified_fraction);
    }
    r.peak_modified_fraction = std::max(r.peak_modified_fraction, a.modified_fraction);
    r.layers.push_back(std::move(a));
  }
  r.overall_modified_fraction = total ? static_cast<double>(total_mod) / total : 0.0;
  if (sample_norms && !sample_norms->empty()) {
    double s = 0, mx = 0;
    for (double v : *sample_norms) {
      s += v;
      mx = std::max(mx, v);
    }
    r.max_sample_share = s > 0 ? mx / s : 0.0;
    r.mean_sample_share = 1.0 / sample_norms->size();
    if (r.max_sample_share > th.sample_share) {
      std::ostringstream m;
      m << "batch: one sample holds " << r.max_sample_share << " of the gradient norm";
      r.flags.push_back(m.str());
    }
  }
  return r;
}

double LogLogSlope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("need >= 2 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw std::invalid_argument("log-log fit needs positive values");
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

LeakageResult LeakageDecayExperiment(int dims, const std::vector<int>& ks, int trials,
                                     std::uint64_t seed) {
  if (dims < 1 || trials < 1) throw std::invalid_argument("dims and trials must be positive");
  LeakageResult r;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> kx, yc, ye;
  for (int k : ks) {
    if (k < 2) throw std::invalid_argument("K must be >= 2");
    // Correlation between g_1 and the sum over dims * trials independent coordinates.
    double s1 = 0, s2 = 0, s11 = 0, s22 = 0, s12 = 0;
    const double n = static_cast<double>(dims) * trials;
    for (long long i = 0; i < static_cast<long long>(dims) * trials; ++i) {
      const double first = g(rng);
      double sum = first;
      for (int j = 1; j < k; ++j) sum += g(rng);
      s1 += first;
      s2 += sum;
      s11 += first * first;
      s22 += sum * sum;
      s12 += first * sum;
    }
    const double cov = s12 / n - (s1 / n) * (s2 / n);
    const double v1 = s11 / n - (s1 / n) * (s1 / n);
    const double v2 = s22 / n - (s2 / n) * (s2 / n);
    const double rho2 = std::min(1.0 - 1e-12, cov * cov / (v1 * v2));
    LeakagePoint p;
    p.k = k;
    p.closed_form = 0.5 * std::log1p(1.0 / (k - 1));
    p.estimate = -0.5 * std::log1p(-rho2);
    r.points.push_back(p);
    kx.push_back(k);
    yc.push_back(p.closed_form);
    ye.push_back(p.estimate);
  }
  if (r.points.size() >= 2) {
    r.slope_closed_form = LogLogSlope(kx, yc);
    r.slope_estimate = LogLogSlope(kx, ye);
  }
  return r;
}

}  // namespace mkor
