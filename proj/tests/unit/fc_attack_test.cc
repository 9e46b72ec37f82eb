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

#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "mkor/fc_attack.h"
#include "mkor/network.h"
#include "test_util.h"

namespace mkor {
namespace {

using testing::RandomImage;

// Flattened classifier input of one sample.
Tensor FcInput(const ModelSpec& m, const ParamSet& p, const Tensor& x) {
  return Forward(m, p, x)[m.flatten_layer];
}

ModelSpec SmallVgg() { return BuildModel("vgg16-original", {.input_side = 32, .num_classes = 10, .fc_width = 64}); }

ModelSpec Mlp(bool bias = true) {
  return FinalizeModel("mlp", {4, 4, 2},
                       {Act(LayerKind::kFlatten), Fc(32, 48), Act(LayerKind::kRelu), Fc(48, 24),
                        Act(LayerKind::kRelu), Fc(24, 10)},
                       bias);
}

double MaxRelError(const Tensor& got, const Tensor& want) {
  double scale = 0, err = 0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    scale = std::max(scale, std::abs(double(want[i])));
    err = std::max(err, std::abs(double(got[i]) - want[i]));
  }
  return err / scale;
}

FcInjectionConfig Config(int sink, std::uint64_t seed = 1) {
  FcInjectionConfig c;
  c.sink_label = sink;
  c.seed = seed;
  return c;
}

TEST(NaiveInjection, ChainStructure) {
  const ModelSpec m = FinalizeModel("w", {1, 1, 3}, {Act(LayerKind::kFlatten), Fc(3, 4), Act(LayerKind::kRelu),
                                                     Fc(4, 4), Act(LayerKind::kRelu), Fc(4, 2)});
  const auto inj = InjectFcNaive(InitParams(m, 2), m, 2, Config(0));
  const auto& p = inj.params;
  int rows = 0;
  for (int o = 0; o < 4; ++o) {
    bool any = false;
    for (int i = 0; i < 3; ++i) any |= p.Weight(m, 1)[o * 3 + i] != 0.0f;
    rows += any;
  }
  EXPECT_EQ(rows, 2);
  for (int l : {3, 5}) {
    int nz = 0;
    for (float v : p.Weight(m, l)) {
      nz += v != 0.0f;
      EXPECT_GE(v, 0.0f);
    }
    EXPECT_EQ(nz, 2);
  }
  for (float v : p.Bias(m, 3)) EXPECT_GE(v, 0.0f);
}

TEST(NaiveInjection, LaterLayersAreMostlyZero) {
  const ModelSpec m = SmallVgg();
  const auto inj = InjectFcNaive(InitParams(m, 1), m, 10, Config(0));
  const auto fc = m.FcLayers();
  int zero = 0;
  const auto w = inj.params.Weight(m, fc[1]);
  for (float v : w) zero += v == 0.0f;
  EXPECT_GT(double(zero) / w.size(), 0.9);
}

TEST(NaiveInjection, SingleSampleExact) {
  const ModelSpec m = Mlp();
  const auto inj = InjectFcNaive(InitParams(m, 3), m, 10, Config(7));
  const Tensor x = RandomImage(4, 4, 2, 4);
  GradientUpdate g;
  LossAndGradient(m, inj.params, x, 2, &g);
  const auto rec = ReconstructFcInputs(g, m, inj.map);
  const auto& c = rec.classes[1];
  ASSERT_TRUE(c.present);
  EXPECT_TRUE(c.singleton);
  EXPECT_LT(MaxRelError(c.z1, FcInput(m, inj.params, x)), 1e-5);
}

TEST(InconspicuousInjection, MapInvariants) {
  const ModelSpec m = SmallVgg();
  const auto inj = InjectFcInconspicuous(InitParams(m, 1), m, 10, Config(0, 5));
  std::set<int> first;
  for (const auto& t : inj.map.twins) {
    first.insert(t[0]);
    first.insert(t[1]);
  }
  EXPECT_EQ(first.size(), 20u);
  for (const auto& layer : inj.map.carried) EXPECT_EQ(std::set<int>(layer.begin(), layer.end()).size(), 10u);
  for (double a : inj.map.alpha) {
    EXPECT_LT(a, -0.5 + 1e-12);
    EXPECT_GE(a, -1.5);
  }
  EXPECT_GE(inj.map.sink_label, 1);
  EXPECT_LE(inj.map.sink_label, 10);
}

TEST(InconspicuousInjection, TwinsHaveOppositeSigns) {
  const ModelSpec m = SmallVgg();
  const auto inj = InjectFcInconspicuous(InitParams(m, 1), m, 10, Config(0, 5));
  const int f1 = m.FcLayers().front();
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto acts = Forward(m, inj.params, RandomImage(32, 32, 3, s));
    const Tensor& pre = acts[f1];
    for (const auto& t : inj.map.twins) {
      EXPECT_LE(double(pre[t[0]]) * pre[t[1]], 0.0);
      EXPECT_TRUE(pre[t[0]] > 0 || pre[t[1]] > 0);
    }
  }
}

TEST(InconspicuousInjection, UntouchedParametersPreserved) {
  const ModelSpec m = SmallVgg();
  const ParamSet ref = InitParams(m, 1);
  const auto inj = InjectFcInconspicuous(ref, m, 10, Config(0, 5));
  const int f1 = m.FcLayers().front();
  const std::size_t fc_start = m.manifest[m.layers[f1].weight_entry].offset;
  for (std::size_t i = 0; i < fc_start; ++i) ASSERT_EQ(ref.values[i], inj.params.values[i]);
  std::set<int> twins;
  for (const auto& t : inj.map.twins) twins.insert(t[1]);
  const int in = m.layers[f1].in_channels;
  for (int o = 0; o < m.layers[f1].out_channels; ++o) {
    if (twins.count(o)) continue;
    for (int i = 0; i < in; ++i)
      ASSERT_EQ(inj.params.Weight(m, f1)[o * in + i], ref.Weight(m, f1)[o * in + i]) << o;
  }
}

TEST(InconspicuousInjection, WeightStatisticsBarelyMove) {
  const ModelSpec m = BuildModel("vgg16-original", {.input_side = 32, .num_classes = 100, .fc_width = 4096});
  const ParamSet ref = InitParams(m, 1);
  FcInjectionConfig c = Config(0, 3);
  c.sigma = 1e-2;
  const auto inj = InjectFcInconspicuous(ref, m, 100, c);
  for (int l : m.FcLayers()) {
    auto stats = [&](const ParamSet& p) {
      double s = 0, s2 = 0;
      const auto w = p.Weight(m, l);
      for (float v : w) {
        s += v;
        s2 += double(v) * v;
      }
      const double mean = s / w.size();
      return std::pair{mean, s2 / w.size() - mean * mean};
    };
    const auto [m0, v0] = stats(ref);
    const auto [m1, v1] = stats(inj.params);
    // Means sit near zero, so compare the mean shift against the spread.
    EXPECT_LT(std::abs(m1 - m0), 0.05 * std::sqrt(v0)) << l;
    EXPECT_LT(std::abs(v1 - v0), 0.05 * v0) << l;
  }
}

TEST(InconspicuousInjection, RejectsNarrowClassifier) {
  const ModelSpec m = Mlp();
  EXPECT_THROW(InjectFcInconspicuous(InitParams(m, 1), m, 25, Config(0)), std::invalid_argument);
  const ModelSpec narrow = FinalizeModel("n", {1, 1, 4}, {Act(LayerKind::kFlatten), Fc(4, 15), Act(LayerKind::kRelu),
                                                          Fc(15, 8)});
  EXPECT_THROW(InjectFcInconspicuous(InitParams(narrow, 1), narrow, 8, Config(0)), std::invalid_argument);
  EXPECT_NO_THROW(InjectFcNaive(InitParams(narrow, 1), narrow, 8, Config(0)));
  FcInjectionConfig bad = Config(0);
  bad.alpha_hi = 0.5;
  EXPECT_THROW(InjectFcInconspicuous(InitParams(m, 1), m, 4, bad), std::invalid_argument);
}

class SingleSample : public ::testing::TestWithParam<int> {};

TEST_P(SingleSample, RecoveryEqualsForwardFeatures) {
  const ModelSpec m = GetParam() == 0 ? BuildModel("lenet5-original") : SmallVgg();
  const auto inj = InjectFcInconspicuous(InitParams(m, 2), m, 10, Config(10, 4));
  const auto& shape = m.input_shape;
  for (int label : {1, 4, 9}) {
    const Tensor x = RandomImage(shape[0], shape[1], shape[2], 40 + label);
    GradientUpdate g;
    LossAndGradient(m, inj.params, x, label, &g);
    const auto rec = ReconstructFcInputs(g, m, inj.map);
    for (const auto& c : rec.classes) {
      if (c.label == label) {
        ASSERT_TRUE(c.present);
        EXPECT_TRUE(c.singleton);
        // Sigmoid chains (original LeNet) leave the count undefined.
        if (c.multiplicity >= 0) EXPECT_NEAR(c.multiplicity, 1.0, 1e-3);
        if (GetParam() == 0) EXPECT_LT(c.multiplicity, 0.0);
        EXPECT_LT(MaxRelError(c.z1, FcInput(m, inj.params, x)), 1e-5) << m.name << " " << label;
      } else if (c.label == 10) {
        EXPECT_TRUE(c.sink);
        EXPECT_FALSE(c.singleton);
      } else {
        EXPECT_FALSE(c.present) << c.label;
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Models, SingleSample, ::testing::Values(0, 1));

TEST(Recovery, TwoClassesBothExact) {
  const ModelSpec m = Mlp();
  const auto inj = InjectFcInconspicuous(InitParams(m, 5), m, 10, Config(10, 2));
  const Tensor a = RandomImage(4, 4, 2, 1), b = RandomImage(4, 4, 2, 2);
  GradientUpdate g(m, 0);
  AccumulateGradient(m, inj.params, a, 3, g);
  AccumulateGradient(m, inj.params, b, 6, g);
  const auto rec = ReconstructFcInputs(g, m, inj.map);
  EXPECT_LT(MaxRelError(rec.classes[2].z1, FcInput(m, inj.params, a)), 1e-5);
  EXPECT_LT(MaxRelError(rec.classes[5].z1, FcInput(m, inj.params, b)), 1e-5);
  int present = 0;
  for (const auto& c : rec.classes) present += c.present;
  EXPECT_EQ(present, 3);  // two samples plus the sink
}

TEST(Recovery, SameClassGivesGradientWeightedAverage) {
  const ModelSpec m = Mlp();
  const auto inj = InjectFcInconspicuous(InitParams(m, 5), m, 10, Config(10, 2));
  const Tensor a = RandomImage(4, 4, 2, 1), b = RandomImage(4, 4, 2, 2);
  GradientUpdate ga, gb;
  LossAndGradient(m, inj.params, a, 3, &ga);
  LossAndGradient(m, inj.params, b, 3, &gb);
  const auto rec = ReconstructFcInputs(SumGradients({ga, gb}), m, inj.map);
  const auto& c = rec.classes[2];
  const int f1 = m.FcLayers().front();
  const int node = c.twin_used;
  const double da = ga.Bias(m, f1)[node], db = gb.Bias(m, f1)[node];
  const Tensor za = FcInput(m, inj.params, a), zb = FcInput(m, inj.params, b);
  Tensor want(za.shape());
  for (std::size_t i = 0; i < want.size(); ++i) want[i] = static_cast<float>((da * za[i] + db * zb[i]) / (da + db));
  EXPECT_LT(MaxRelError(c.z1, want), 1e-5);
  EXPECT_FALSE(c.singleton);
  // Both samples fall on the same or opposite twins; the count still sees two.
  EXPECT_NEAR(c.multiplicity, 2.0, 0.05);
}

TEST(Recovery, EveryDecoupledNodeIsReachedByItsClass) {
  const ModelSpec m = Mlp();
  const auto inj = InjectFcInconspicuous(InitParams(m, 8), m, 10, Config(10, 3));
  for (int label = 1; label < 10; ++label) {
    GradientUpdate g;
    LossAndGradient(m, inj.params, RandomImage(4, 4, 2, 200 + label), label, &g);
    const auto rec = ReconstructFcInputs(g, m, inj.map);
    const auto& c = rec.classes[label - 1];
    EXPECT_TRUE(c.present);
    // Exactly one twin is active for a single sample.
    EXPECT_TRUE((c.twin_d[0] == 0.0) != (c.twin_d[1] == 0.0)) << label;
    EXPECT_DOUBLE_EQ(c.twin_share, 1.0);
  }
}

TEST(Recovery, BiasFreeClassifierRecoversDirection) {
  const ModelSpec m = Mlp(false);
  const auto inj = InjectFcInconspicuous(InitParams(m, 5), m, 10, Config(0, 2));
  EXPECT_TRUE(inj.map.unnormalized);
  EXPECT_EQ(inj.map.sink_label, 0);
  const Tensor x = RandomImage(4, 4, 2, 9);
  GradientUpdate g;
  LossAndGradient(m, inj.params, x, 5, &g);
  const auto rec = ReconstructFcInputs(g, m, inj.map);
  const auto& c = rec.classes[4];
  ASSERT_TRUE(c.present);
  EXPECT_TRUE(c.unnormalized);
  const Tensor z = FcInput(m, inj.params, x);
  double dot = 0, n1 = 0, n2 = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    dot += double(z[i]) * c.z1[i];
    n1 += double(z[i]) * z[i];
    n2 += double(c.z1[i]) * c.z1[i];
  }
  EXPECT_NEAR(dot / std::sqrt(n1 * n2), 1.0, 1e-6);
}

TEST(Recovery, RejectsMismatchedGradient) {
  const ModelSpec m = Mlp();
  const auto inj = InjectFcNaive(InitParams(m, 1), m, 10, Config(0));
  EXPECT_THROW(ReconstructFcInputs(GradientUpdate(BuildModel("lenet5-original"), 1), m, inj.map),
               std::invalid_argument);
}

}  // namespace
}  // namespace mkor
