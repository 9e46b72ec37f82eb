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

#include "mkor/fc_attack.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace mkor {

double ExpectedUniqueCount(int k, const std::vector<double>& p) {
  if (k < 1) throw std::invalid_argument("K must be >= 1");
  if (p.empty()) throw std::invalid_argument("empty distribution");
  double total = 0.0;
  for (double v : p) {
    if (v < 0.0) throw std::invalid_argument("negative probability");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("probabilities must sum to 1");
  double s = 0.0;
  for (double v : p) s += v * std::pow(1.0 - v, k - 1);
  return k * s;
}

namespace {

struct FcView {
  int layer;
  int in, out;
  std::span<float> w, b;
  float& W(int o, int i) { return w[static_cast<std::size_t>(o) * in + i]; }
};

std::vector<FcView> Classifier(const ModelSpec& model, ParamSet& p) {
  std::vector<FcView> v;
  for (int l : model.FcLayers()) {
    const auto& spec = model.layers[l];
    v.push_back({l, spec.in_channels, spec.out_channels, p.Weight(model, l), p.Bias(model, l)});
  }
  return v;
}

bool ChainIsRelu(const ModelSpec& model) {
  for (int l : model.FcLayers()) {
    if (l + 1 < static_cast<int>(model.layers.size()) &&
        model.layers[l + 1].kind == LayerKind::kSigmoid) {
      return false;
    }
  }
  return true;
}

void CheckWidths(const ModelSpec& model, int n, int first_factor) {
  const auto fc = model.FcLayers();
  if (fc.size() < 2) throw std::invalid_argument("classifier needs at least 2 fc layers");
  if (n < 1 || n > model.num_classes) {
    throw std::invalid_argument("class count " + std::to_string(n) + " outside [1, " +
                                std::to_string(model.num_classes) + "]");
  }
  for (std::size_t i = 0; i + 1 < fc.size(); ++i) {
    const int need = i == 0 ? first_factor * n : n;
    if (model.layers[fc[i]].out_channels < need) {
      throw std::invalid_argument("classifier too narrow: fc layer " + std::to_string(i + 1) +
                                  " has " + std::to_string(model.layers[fc[i]].out_channels) +
                                  " nodes, needs " + std::to_string(need));
    }
  }
}

int PickSink(const FcInjectionConfig& c, int n, std::mt19937_64& rng) {
  if (c.sink_margin <= 0.0) return 0;
  if (c.sink_label > 0) {
    if (c.sink_label > n) throw std::invalid_argument("sink label outside decoupled classes");
    return c.sink_label;
  }
  return 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(n));
}

void ApplySink(const ModelSpec& model, std::vector<FcView>& fc, DecouplingMap& map,
               const FcInjectionConfig& c) {
  map.sink_margin = c.sink_margin;
  if (map.sink_label == 0) return;
  if (!model.has_bias) {
    map.sink_label = 0;
    map.sink_margin = 0.0;
    return;
  }
  fc.back().b[map.sink_label - 1] += static_cast<float>(c.sink_margin);
}

void ComputeGains(const ModelSpec& model, const ParamSet& p, DecouplingMap& map) {
  const bool relu = ChainIsRelu(model);
  const auto fcl = model.FcLayers();
  map.chain_gain.assign(map.num_classes, {0.0, 0.0});
  if (!relu) return;
  for (int n = 0; n < map.num_classes; ++n) {
    for (int t = 0; t < 2; ++t) {
      int prev = map.twins[n][t];
      if (prev < 0) continue;
      double g = 1.0;
      for (std::size_t i = 1; i < fcl.size(); ++i) {
        const int cur = map.carried[i - 1][n];
        const int in = model.layers[fcl[i]].in_channels;
        g *= p.Weight(model, fcl[i])[static_cast<std::size_t>(cur) * in + prev];
        prev = cur;
      }
      map.chain_gain[n][t] = g;
    }
  }
}

}  // namespace

FcInjection InjectFcNaive(const ParamSet& params, const ModelSpec& model, int num_classes,
                          const FcInjectionConfig& config) {
  CheckWidths(model, num_classes, 1);
  FcInjection r{params, {}};
  auto fc = Classifier(model, r.params);
  std::mt19937_64 rng(config.seed);
  DecouplingMap& map = r.map;
  map.mode = "naive";
  map.num_classes = num_classes;
  map.fc_layers = model.FcLayers();
  map.seed = config.seed;
  map.unnormalized = !model.has_bias;
  map.sink_label = PickSink(config, num_classes, rng);
  for (auto& v : fc) {
    // Keep the chain entries, zero everything else.
    std::vector<float> keep_w(num_classes), keep_b(num_classes, 0.0f);
    for (int n = 0; n < num_classes; ++n) {
      keep_w[n] = std::abs(v.layer == fc.front().layer ? 0.0f : v.W(n, n));
      if (!v.b.empty()) keep_b[n] = std::abs(v.b[n]);
    }
    std::vector<float> first_rows;
    if (v.layer == fc.front().layer) {
      first_rows.assign(v.w.begin(), v.w.begin() + static_cast<std::ptrdiff_t>(num_classes) * v.in);
    }
    std::fill(v.w.begin(), v.w.end(), 0.0f);
    std::fill(v.b.begin(), v.b.end(), 0.0f);
    for (int n = 0; n < num_classes; ++n) {
      if (v.layer == fc.front().layer) {
        for (int i = 0; i < v.in; ++i) v.W(n, i) = std::abs(first_rows[static_cast<std::size_t>(n) * v.in + i]);
      } else {
        v.W(n, n) = keep_w[n];
      }
      if (!v.b.empty()) v.b[n] = keep_b[n];
    }
  }
  if (map.unnormalized) {
    // No bias to normalize by: use one shared positive constant along the chains.
    for (std::size_t i = 1; i < fc.size(); ++i)
      for (int n = 0; n < num_classes; ++n) fc[i].W(n, n) = 1.0f;
  }
  map.twins.resize(num_classes);
  map.alpha.assign(num_classes, 0.0);
  for (int n = 0; n < num_classes; ++n) map.twins[n] = {n, -1};
  map.carried.assign(fc.size() - 1, std::vector<int>(num_classes));
  for (auto& c : map.carried) std::iota(c.begin(), c.end(), 0);
  ApplySink(model, fc, map, config);
  ComputeGains(model, r.params, map);
  return r;
}

FcInjection InjectFcInconspicuous(const ParamSet& params, const ModelSpec& model, int num_classes,
                                  const FcInjectionConfig& config) {
  CheckWidths(model, num_classes, 2);
  if (!(config.alpha_lo <= config.alpha_hi) || config.alpha_hi >= 0.0) {
    throw std::invalid_argument("alpha range must be negative and ordered");
  }
  FcInjection r{params, {}};
  auto fc = Classifier(model, r.params);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto draw_noise = [&]() { return static_cast<float>(config.sigma * noise(rng)); };
  DecouplingMap& map = r.map;
  map.mode = "inconspicuous";
  map.num_classes = num_classes;
  map.fc_layers = model.FcLayers();
  map.seed = config.seed;
  map.sigma = config.sigma;
  map.unnormalized = !model.has_bias;
  map.sink_label = PickSink(config, num_classes, rng);

  auto shuffled = [&](int count) {
    std::vector<int> idx(count);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    return idx;
  };

  // Twins in the first layer: q = alpha * p, weights and bias alike.
  FcView& f1 = fc.front();
  const auto perm1 = shuffled(f1.out);
  map.twins.resize(num_classes);
  map.alpha.resize(num_classes);
  std::uniform_real_distribution<double> alpha_dist(config.alpha_lo, config.alpha_hi);
  for (int n = 0; n < num_classes; ++n) {
    const int p = perm1[2 * n], q = perm1[2 * n + 1];
    map.twins[n] = {p, q};
    const double a = alpha_dist(rng);
    map.alpha[n] = a;
    for (int i = 0; i < f1.in; ++i) f1.W(q, i) = static_cast<float>(a * f1.W(p, i));
    if (!f1.b.empty()) f1.b[q] = static_cast<float>(a * f1.b[p]);
  }

  // Later layers: one carried node per class, isolated on its row and column.
  map.carried.assign(fc.size() - 1, {});
  std::vector<int> prev_nodes;  // per class, flattened twins for layer 2
  for (std::size_t li = 1; li < fc.size(); ++li) {
    FcView& v = fc[li];
    const bool last = li + 1 == fc.size();
    std::vector<int> cur(num_classes);
    if (last) {
      std::iota(cur.begin(), cur.end(), 0);
    } else {
      const auto perm = shuffled(v.out);
      std::copy(perm.begin(), perm.begin() + num_classes, cur.begin());
    }
    map.carried[li - 1] = cur;
    for (int n = 0; n < num_classes; ++n) {
      std::vector<int> cols;
      if (li == 1) {
        cols = {map.twins[n][0], map.twins[n][1]};
      } else {
        cols = {map.carried[li - 2][n]};
      }
      const int row = cur[n];
      // Columns: only the carried row keeps a (positive) weight.
      for (int c : cols) {
        const float keep = std::abs(v.W(row, c));
        for (int o = 0; o < v.out; ++o) v.W(o, c) = draw_noise();
        v.W(row, c) = keep;
      }
      // Rows feeding a ReLU/Sigmoid: clear the rest so the node stays live.
      if (!last) {
        for (int i = 0; i < v.in; ++i) {
          if (std::find(cols.begin(), cols.end(), i) != cols.end()) continue;
          bool other_chain = false;
          if (li == 1) {
            for (int m = 0; m < num_classes && !other_chain; ++m)
              other_chain = m != n && (map.twins[m][0] == i || map.twins[m][1] == i);
          } else {
            for (int m = 0; m < num_classes && !other_chain; ++m)
              other_chain = m != n && map.carried[li - 2][m] == i;
          }
          // Entries in other chains' columns are set when those columns are processed.
          if (!other_chain) v.W(row, i) = draw_noise();
        }
      }
      if (!v.b.empty()) v.b[row] = std::abs(v.b[row]);
    }
  }
  if (map.unnormalized) {
    for (std::size_t li = 1; li < fc.size(); ++li) {
      for (int n = 0; n < num_classes; ++n) {
        const int row = map.carried[li - 1][n];
        if (li == 1) {
          fc[li].W(row, map.twins[n][0]) = 1.0f;
          fc[li].W(row, map.twins[n][1]) = 1.0f;
        } else {
          fc[li].W(row, map.carried[li - 2][n]) = 1.0f;
        }
      }
    }
  }
  if (config.jitter) {
    // Perturb every parameter that differs from the original.
    std::normal_distribution<double> j(0.0, config.jitter_sigma);
    for (std::size_t i = 0; i < r.params.values.size(); ++i) {
      if (r.params.values[i] != params.values[i]) r.params.values[i] += static_cast<float>(j(rng));
    }
  }
  ApplySink(model, fc, map, config);
  ComputeGains(model, r.params, map);
  return r;
}

FcRecovery ReconstructFcInputs(const GradientUpdate& grad, const ModelSpec& model,
                               const DecouplingMap& map, double eps_rel) {
  if (grad.values.size() != model.param_count) {
    throw std::invalid_argument("gradient layout does not match the model");
  }
  const int f1 = model.FcLayers().front();
  const int in = model.layers[f1].in_channels;
  const auto gw = grad.Weight(model, f1);
  const auto gb = grad.Bias(model, f1);
  auto row = [&](int node) { return gw.subspan(static_cast<std::size_t>(node) * in, in); };
  auto denom = [&](int node) -> double {
    if (node < 0) return 0.0;
    if (!gb.empty()) return gb[node];
    // Bias-free: the row itself carries the magnitude; use its largest entry.
    double best = 0.0;
    for (float v : row(node)) {
      if (std::abs(v) > std::abs(best)) best = v;
    }
    return best;
  };

  FcRecovery out;
  for (int n = 0; n < map.num_classes; ++n) {
    for (int t = 0; t < 2; ++t) out.max_abs_d = std::max(out.max_abs_d, std::abs(denom(map.twins[n][t])));
  }
  out.threshold = eps_rel * out.max_abs_d;
  for (int n = 0; n < map.num_classes; ++n) {
    ClassRecovery c;
    c.label = n + 1;
    c.sink = c.label == map.sink_label;
    c.unnormalized = map.unnormalized;
    c.twin_d = {denom(map.twins[n][0]), denom(map.twins[n][1])};
    const int t = std::abs(c.twin_d[1]) > std::abs(c.twin_d[0]) ? 1 : 0;
    c.twin_used = map.twins[n][t];
    c.d = c.twin_d[t];
    const double both = std::abs(c.twin_d[0]) + std::abs(c.twin_d[1]);
    c.twin_share = both > 0 ? std::abs(c.d) / both : 0.0;
    c.present = out.max_abs_d > 0.0 && std::abs(c.d) >= out.threshold && std::abs(c.d) > 0.0;
    if (!map.chain_gain.empty() && map.chain_gain[n][0] != 0.0) {
      double m = 0.0;
      for (int k = 0; k < 2; ++k) {
        if (map.twins[n][k] >= 0 && map.chain_gain[n][k] != 0.0) {
          m += std::abs(c.twin_d[k]) / std::abs(map.chain_gain[n][k]);
        }
      }
      c.multiplicity = m;
    }
    c.singleton = c.present && !c.sink &&
                  (c.multiplicity < 0 || std::lround(c.multiplicity) == 1);
    if (c.present) {
      if (c.d == 0.0) throw std::runtime_error("zero denominator on a present class");
      c.z1 = Tensor({in});
      const auto r = row(c.twin_used);
      for (int i = 0; i < in; ++i) c.z1[i] = static_cast<float>(static_cast<double>(r[i]) / c.d);
    }
    out.classes.push_back(std::move(c));
  }
  return out;
}

}  // namespace mkor
