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

#include "mkor/pipeline.h"
#include "mkor/serialize.h"
#include "test_util.h"

namespace mkor {
namespace {

// Unique synthetic batch at the modified LeNet's native 14x14 resolution.
std::vector<LabeledImage> NativeSynth(int side, int cell, int channels, int classes, std::uint64_t seed) {
  auto d = SynthDataset(classes, 1, side / cell, side / cell, channels, seed);
  for (auto& x : d) x.image = ResizeNearest(x.image, side, side);
  return d;
}

InjectionConfig Config(InjectionMode mode, int sink) {
  InjectionConfig c;
  c.mode = mode;
  c.fc.sink_label = sink;
  return c;
}

TEST(Pipeline, ModifiedLenetIsExactOnUniqueSyntheticBatch) {
  const ModelSpec m = BuildModel("lenet5-modified");
  const auto data = NativeSynth(28, 2, 1, 10, 3);
  for (InjectionMode mode : {InjectionMode::kNaive, InjectionMode::kInconspicuous}) {
    const AttackSetup s = PrepareAttack(m, InitParams(m, 1), Config(mode, 4));
    const AttackRun r = RunAttack(s, data, {.regime = BatchRegime::kUnique, .batch_size = 10, .seed = 2}, {}, {});
    ASSERT_TRUE(r.report.score);
    EXPECT_EQ(r.report.score->scored(), 9);
    EXPECT_TRUE(r.report.sink_present);
    EXPECT_EQ(r.report.sink_label, 4);
    // Block noise (sigma 1e-5) passes through four logit inversions.
    const double floor = mode == InjectionMode::kNaive ? 0.999 : 0.95;
    for (const auto& c : r.report.score->per_class) EXPECT_GE(c.ssim, floor) << InjectionModeName(mode) << c.label;
  }
}

TEST(Pipeline, DeterministicUnderSeeds) {
  const ModelSpec m = BuildModel("lenet5-original");
  const auto data = SynthDataset(10, 3, 28, 28, 1, 1);
  const AttackSetup s = PrepareAttack(m, InitParams(m, 1), {});
  const BatchSpec b{.regime = BatchRegime::kRandom, .batch_size = 20, .seed = 7};
  const DefenseConfig d{.noise_std = 1e-3, .seed = 2};
  const AttackRun a = RunAttack(s, data, b, d, {});
  const AttackRun c = RunAttack(s, data, b, d, {});
  EXPECT_EQ(a.gradient.values, c.gradient.values);
  ASSERT_EQ(a.report.classes.size(), c.report.classes.size());
  for (std::size_t i = 0; i < a.report.classes.size(); ++i)
    EXPECT_EQ(a.report.classes[i].image.storage(), c.report.classes[i].image.storage());
  EXPECT_EQ(a.report.batch_labels, c.report.batch_labels);
}

TEST(Pipeline, AbsentClassesAreReported) {
  const ModelSpec m = BuildModel("lenet5-original");
  const auto data = SynthDataset(10, 1, 28, 28, 1, 1);
  const AttackSetup s = PrepareAttack(m, InitParams(m, 1), Config(InjectionMode::kInconspicuous, 10));
  const AttackRun r = RunAttack(s, data, {.regime = BatchRegime::kCapped, .batch_size = 5, .class_cap = 1, .seed = 1}, {}, {});
  EXPECT_EQ(r.report.classes.size(), r.report.batch_labels[0] == 10 ? 0u : 1u);
  EXPECT_GE(r.report.absent_labels.size(), 8u);
}

TEST(Pipeline, GammaTriggersMinMaxCalibration) {
  const ModelSpec m = BuildModel("vgg16-modified", {.input_side = 64, .num_classes = 10, .fc_width = 32});
  const auto data = NativeSynth(64, 4, 3, 10, 3);
  const AttackSetup s = PrepareAttack(m, InitParams(m, 1), Config(InjectionMode::kNaive, 1));
  ReconstructionOptions o;
  o.gamma = 0.5;
  const AttackRun r = RunAttack(s, data, {.regime = BatchRegime::kUnique, .batch_size = 3, .seed = 2}, {}, o);
  EXPECT_EQ(r.report.calibration, CalibrationMode::kMinMax);
  ASSERT_FALSE(r.report.classes.empty());
  for (const auto& c : r.report.classes) {
    const auto [lo, hi] = std::minmax_element(c.image.values().begin(), c.image.values().end());
    EXPECT_FLOAT_EQ(*lo, 0.0f);
    EXPECT_FLOAT_EQ(*hi, 1.0f);
  }
  o.calibration = CalibrationMode::kHistogram;
  EXPECT_THROW(RunAttack(s, data, {.regime = BatchRegime::kUnique, .batch_size = 2, .seed = 2}, {}, o),
               std::invalid_argument);
}

TEST(Pipeline, FitToModel) {
  const ModelSpec m = BuildModel("vgg16-original", {.input_side = 64, .num_classes = 10, .fc_width = 32});
  const auto small = SynthDataset(2, 1, 32, 32, 3, 1);
  const auto fit = FitToModel(small, m);
  EXPECT_EQ(fit[0].image.shape(), (std::vector<int>{64, 64, 3}));
  EXPECT_EQ(fit[1].label, 2);
  EXPECT_THROW(FitToModel(SynthDataset(1, 1, 32, 32, 1, 1), m), std::invalid_argument);
}

TEST(Serialize, NonFiniteNumbers) {
  EXPECT_EQ(Number(std::numeric_limits<double>::infinity()), "inf");
  EXPECT_TRUE(std::isinf(NumberFrom(Json("inf"))));
  EXPECT_DOUBLE_EQ(NumberFrom(Number(2.5)), 2.5);
}

TEST(Serialize, MapAndPlanRoundTrip) {
  const ModelSpec m = BuildModel("lenet5-modified");
  AttackSetup s = PrepareAttack(m, InitParams(m, 1), {});
  const std::string mp = testing::TempPath("map.json"), pp = testing::TempPath("plan.json");
  WriteJson(mp, ToJson(s.map));
  WriteJson(pp, ToJson(s.plan));
  const DecouplingMap map = DecouplingMapFromJson(ReadJson(mp));
  EXPECT_EQ(map.twins, s.map.twins);
  EXPECT_EQ(map.carried, s.map.carried);
  EXPECT_EQ(map.alpha, s.map.alpha);
  EXPECT_EQ(map.sink_label, s.map.sink_label);
  EXPECT_EQ(map.chain_gain, s.map.chain_gain);
  const ConvPlan plan = ConvPlanFromJson(ReadJson(pp), m);
  ASSERT_EQ(plan.traces.size(), s.plan.traces.size());
  for (std::size_t i = 0; i < plan.traces.size(); ++i) {
    EXPECT_EQ(plan.traces[i].channel, s.plan.traces[i].channel);
    EXPECT_EQ(plan.traces[i].off_r, s.plan.traces[i].off_r);
  }
  EXPECT_EQ(plan.BetaProduct(), s.plan.BetaProduct());
  EXPECT_EQ(plan.noise_sigma, 1e-5);
  EXPECT_THROW(ConvPlanFromJson(ReadJson(pp), BuildModel("lenet5-original")), std::exception);
}

TEST(Serialize, ReportCarriesScores) {
  const ModelSpec m = BuildModel("lenet5-modified");
  const auto data = NativeSynth(28, 2, 1, 10, 3);
  const AttackSetup s = PrepareAttack(m, InitParams(m, 1), Config(InjectionMode::kNaive, 1));
  const AttackRun r = RunAttack(s, data, {.regime = BatchRegime::kUnique, .batch_size = 3, .seed = 2}, {}, {});
  const Json j = ToJson(r.report);
  EXPECT_EQ(j["model"], "lenet5-modified");
  EXPECT_TRUE(j.contains("score"));
  EXPECT_EQ(j["batch_labels"].size(), 3u);
  EXPECT_TRUE(j["score"]["per_class"].is_array());
}

}  // namespace
}  // namespace mkor
