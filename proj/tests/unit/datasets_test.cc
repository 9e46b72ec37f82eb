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

#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "mkor/datasets.h"
#include "mkor/fc_attack.h"
#include "mkor/image_io.h"
#include "test_util.h"

namespace mkor {
namespace {

void PutBe32(std::ofstream& f, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  f.write(reinterpret_cast<const char*>(b), 4);
}

TEST(Mnist, IdxRoundTrip) {
  const std::string ip = testing::TempPath("t-images-idx3-ubyte"), lp = testing::TempPath("t-labels-idx1-ubyte");
  {
    std::ofstream f(ip, std::ios::binary);
    PutBe32(f, 0x803);
    PutBe32(f, 2);
    PutBe32(f, 3);
    PutBe32(f, 2);
    for (int i = 0; i < 12; ++i) f.put(static_cast<char>(i * 20));
    std::ofstream g(lp, std::ios::binary);
    PutBe32(g, 0x801);
    PutBe32(g, 2);
    g.put(0);
    g.put(9);
  }
  const auto d = LoadMnist(ip, lp);
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].image.shape(), (std::vector<int>{3, 2, 1}));
  EXPECT_EQ(d[0].label, 1);
  EXPECT_EQ(d[1].label, 10);
  EXPECT_FLOAT_EQ(d[0].image.at(1, 0, 0), 40 / 255.0f);
  EXPECT_FLOAT_EQ(d[1].image.at(2, 1, 0), 220 / 255.0f);
  EXPECT_THROW(LoadMnist(lp, ip), std::runtime_error);
  EXPECT_THROW(LoadMnist(ip, testing::TempPath("missing")), std::runtime_error);
}

TEST(Cifar100, PlanarRecordBecomesChannelLast) {
  const std::string p = testing::TempPath("cifar.bin");
  {
    std::ofstream f(p, std::ios::binary);
    f.put(3);   // coarse
    f.put(41);  // fine
    for (int c = 0; c < 3; ++c)
      for (int i = 0; i < 1024; ++i) f.put(static_cast<char>(c * 100 + (i % 7)));
  }
  const auto d = LoadCifar100(p);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].label, 42);
  EXPECT_EQ(d[0].image.shape(), (std::vector<int>{32, 32, 3}));
  EXPECT_FLOAT_EQ(d[0].image.at(0, 3, 2), (200 + 3) / 255.0f);
  EXPECT_FLOAT_EQ(d[0].image.at(1, 0, 1), (100 + 32 % 7) / 255.0f);
  std::ofstream(p, std::ios::binary | std::ios::app).put(0);
  EXPECT_THROW(LoadCifar100(p), std::runtime_error);
}

TEST(Pnm, RoundTripGrayAndColor) {
  for (int c : {1, 3}) {
    Tensor t = testing::RandomImage(5, 7, c, 3);
    for (float& v : t.storage()) v = std::round(v * 255) / 255;
    const std::string p = testing::TempPath(c == 1 ? "x.pgm" : "x.ppm");
    WritePnm(p, t);
    const Tensor back = ReadPnm(p);
    ASSERT_EQ(back.shape(), t.shape());
    for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(back[i], t[i], 1e-6);
  }
}

TEST(Pnm, FolderLabelsFromPrefix) {
  const std::string dir = testing::TempPath("pnmdir");
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  WritePnm(dir + "/3_a.pgm", Tensor({4, 4, 1}));
  WritePnm(dir + "/12_b.pgm", Tensor({4, 4, 1}));
  std::ofstream(dir + "/notes.txt") << "skip";
  auto d = LoadPnmFolder(dir);
  ASSERT_EQ(d.size(), 2u);
  std::set<int> labels{d[0].label, d[1].label};
  EXPECT_EQ(labels, (std::set<int>{3, 12}));
}

TEST(Synth, DeterministicDistinctAndInRange) {
  const auto a = SynthDataset(10, 1, 16, 16, 3, 5);
  const auto b = SynthDataset(10, 1, 16, 16, 3, 5);
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].image.storage(), b[i].image.storage());
    EXPECT_EQ(a[i].label, static_cast<int>(i) + 1);
    double mean = 0;
    for (float v : a[i].image.values()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
      mean += v;
    }
    mean /= a[i].image.size();
    EXPECT_GE(mean, 0.1);
    EXPECT_LE(mean, 0.9);
    for (std::size_t j = 0; j < i; ++j) EXPECT_NE(a[i].image.storage(), a[j].image.storage());
  }
  EXPECT_NE(SynthDataset(10, 1, 16, 16, 3, 6)[0].image.storage(), a[0].image.storage());
}

TEST(Batch, UniqueIsASetAndDeterministic) {
  const auto data = SynthDataset(20, 3, 8, 8, 1, 1);
  BatchSpec s{.regime = BatchRegime::kUnique, .batch_size = 20, .seed = 4};
  const auto b = MakeBatch(data, s);
  std::set<int> labels;
  for (const auto& x : b) labels.insert(x.label);
  EXPECT_EQ(labels.size(), 20u);
  const auto again = MakeBatch(data, s);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(b[i].image.storage(), again[i].image.storage());
  s.batch_size = 21;
  EXPECT_THROW(MakeBatch(data, s), std::invalid_argument);
}

TEST(Batch, CappedOneGivesSingleLabel) {
  const auto data = SynthDataset(10, 2, 8, 8, 1, 1);
  const auto b = MakeBatch(data, {.regime = BatchRegime::kCapped, .batch_size = 100, .class_cap = 1, .seed = 9});
  ASSERT_EQ(b.size(), 100u);
  for (const auto& x : b) EXPECT_EQ(x.label, b[0].label);
  EXPECT_EQ(CountClasses(b), 1);
  EXPECT_THROW(MakeBatch(data, {.regime = BatchRegime::kCapped, .batch_size = 5, .class_cap = 11}),
               std::invalid_argument);
}

TEST(Batch, RandomRespectsDistribution) {
  const auto data = SynthDataset(3, 1, 4, 4, 1, 1);
  const auto b = MakeBatch(data, {.regime = BatchRegime::kRandom, .batch_size = 200,
                                  .class_probs = {0.0, 1.0, 0.0}, .seed = 2});
  for (const auto& x : b) EXPECT_EQ(x.label, 2);
  EXPECT_THROW(MakeBatch(data, {.regime = BatchRegime::kRandom, .batch_size = 2, .class_probs = {0.5, 0.6, 0.0}}),
               std::invalid_argument);
  EXPECT_EQ(ParseBatchRegime("capped"), BatchRegime::kCapped);
  EXPECT_STREQ(BatchRegimeName(BatchRegime::kRandom), "random");
  EXPECT_THROW(ParseBatchRegime("sorted"), std::invalid_argument);
}

TEST(ExpectedUnique, ClosedFormValues) {
  EXPECT_NEAR(ExpectedUniqueCount(100, std::vector<double>(100, 0.01)), 36.97, 0.005);
  EXPECT_DOUBLE_EQ(ExpectedUniqueCount(1, {0.2, 0.8}), 1.0);
  EXPECT_DOUBLE_EQ(ExpectedUniqueCount(2, {0.5, 0.5}), 1.0);
  EXPECT_THROW(ExpectedUniqueCount(3, {0.5, 0.6}), std::invalid_argument);
  EXPECT_THROW(ExpectedUniqueCount(0, {1.0}), std::invalid_argument);
}

TEST(ExpectedUnique, MonteCarloAgreesWithinTwoPercent) {
  // One image per class keeps MakeBatch cheap.
  const auto data = SynthDataset(100, 1, 1, 1, 1, 1);
  for (const auto& probs : {std::vector<double>(100, 0.01), [] {
         std::vector<double> p(100);
         double s = 0;
         for (int i = 0; i < 100; ++i) s += (p[i] = 1.0 / (i + 1));
         for (double& v : p) v /= s;
         return p;
       }()}) {
    double total = 0;
    const int trials = 2000;
    for (int t = 0; t < trials; ++t) {
      const auto b = MakeBatch(data, {.regime = BatchRegime::kRandom, .batch_size = 100,
                                      .class_probs = probs, .seed = static_cast<std::uint64_t>(t)});
      std::map<int, int> count;
      for (const auto& x : b) ++count[x.label];
      for (const auto& [_, n] : count) total += n == 1;
    }
    const double expected = ExpectedUniqueCount(100, probs);
    EXPECT_NEAR(total / trials, expected, 0.02 * expected);
  }
}

TEST(Resize, BilinearConstantAndCorners) {
  Tensor flat({3, 5, 2});
  for (float& v : flat.storage()) v = 0.37f;
  const Tensor flat_up = UpscaleBilinear(flat, 9, 11);
  for (float v : flat_up.values()) EXPECT_FLOAT_EQ(v, 0.37f);

  Tensor checker({2, 2, 1}, std::vector<float>{0.0f, 1.0f, 1.0f, 0.0f});
  const Tensor up = UpscaleBilinear(checker, 4, 4);
  EXPECT_FLOAT_EQ(up.at(0, 0, 0), 0.0f);
  EXPECT_FLOAT_EQ(up.at(0, 3, 0), 1.0f);
  EXPECT_FLOAT_EQ(up.at(3, 0, 0), 1.0f);
  EXPECT_FLOAT_EQ(up.at(3, 3, 0), 0.0f);
  EXPECT_FLOAT_EQ(up.at(1, 1, 0), 0.375f);
  for (float v : up.values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Resize, UpscaleThenRegionMaxMatchesSourceMax) {
  // A 4x upscale keeps every output value inside the hull of the source pixels it interpolates.
  const Tensor src = testing::RandomImage(8, 8, 1, 12);
  const Tensor up = UpscaleBilinear(src, 32, 32);
  for (int h = 0; h < 8; h += 2) {
    for (int w = 0; w < 8; w += 2) {
      float region = 0, truth = 0;
      for (int y = 4 * h + 2; y < 4 * h + 6; ++y)
        for (int x = 4 * w + 2; x < 4 * w + 6; ++x) region = std::max(region, up.at(y, x, 0));
      for (int y = h; y <= std::min(h + 1, 7); ++y)
        for (int x = w; x <= std::min(w + 1, 7); ++x) truth = std::max(truth, src.at(y, x, 0));
      EXPECT_LE(region, truth + 1e-6f);
    }
  }
}

TEST(Resize, NearestAndBlockMean) {
  const Tensor src = testing::RandomImage(3, 4, 2, 1);
  const Tensor up = ResizeNearest(src, 6, 8);
  EXPECT_EQ(up.at(5, 7, 1), src.at(2, 3, 1));
  EXPECT_EQ(up.at(2, 1, 0), src.at(1, 0, 0));
  const Tensor down = BlockMean(up, 2);
  for (std::size_t i = 0; i < src.size(); ++i) EXPECT_FLOAT_EQ(down[i], src[i]);
}

}  // namespace
}  // namespace mkor
