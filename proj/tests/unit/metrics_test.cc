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
#include <limits>

#include "mkor/metrics.h"
#include "test_util.h"

namespace mkor {
namespace {

using testing::RandomImage;

// Deliberately slow second implementation: full 2D window per position.
double NaiveSsim(const Tensor& a, const Tensor& b) {
  double g[11][11], s = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) s += g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / 4.5);
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0;
  int n = 0;
  for (int c = 0; c < a.channels(); ++c) {
    for (int y = 0; y + 11 <= a.height(); ++y) {
      for (int x = 0; x + 11 <= a.width(); ++x) {
        double ma = 0, mb = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            ma += g[i][j] / s * a.at(y + i, x + j, c);
            mb += g[i][j] / s * b.at(y + i, x + j, c);
          }
        double va = 0, vb = 0, cov = 0;
        for (int i = 0; i < 11; ++i)
          for (int j = 0; j < 11; ++j) {
            const double da = a.at(y + i, x + j, c) - ma, db = b.at(y + i, x + j, c) - mb;
            va += g[i][j] / s * da * da;
            vb += g[i][j] / s * db * db;
            cov += g[i][j] / s * da * db;
          }
        total += (2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
        ++n;
      }
    }
  }
  return total / n;
}

TEST(Psnr, Cases) {
  const Tensor a = RandomImage(6, 6, 1, 1);
  EXPECT_EQ(Psnr(a, a), std::numeric_limits<double>::infinity());
  Tensor zeros({4, 4, 3}), ones({4, 4, 3});
  for (float& v : ones.storage()) v = 1.0f;
  EXPECT_DOUBLE_EQ(Psnr(zeros, ones), 0.0);
  const Tensor b = RandomImage(6, 6, 1, 2);
  double mse = 0;
  for (std::size_t i = 0; i < a.size(); ++i) mse += (double(a[i]) - b[i]) * (double(a[i]) - b[i]);
  EXPECT_NEAR(Psnr(a, b), -10 * std::log10(mse / a.size()), 1e-9);
  EXPECT_THROW(Psnr(a, zeros), std::invalid_argument);
}

TEST(Psnr, DecreasesWithNoiseAmplitude) {
  const Tensor a = RandomImage(16, 16, 1, 1, 0.3f, 0.7f);
  const Tensor noise = RandomImage(16, 16, 1, 2, -0.1f, 0.1f);
  double last = std::numeric_limits<double>::infinity();
  for (float amp : {0.1f, 0.5f, 1.0f, 2.0f}) {
    Tensor b = a;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += amp * noise[i];
    const double p = Psnr(a, b);
    EXPECT_LT(p, last);
    last = p;
  }
}

TEST(Ssim, MatchesNaiveImplementation) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const Tensor a = RandomImage(24, 19, 3, seed);
    Tensor b = a;
    const Tensor n = RandomImage(24, 19, 3, seed + 10, -0.2f, 0.2f);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::clamp(b[i] + n[i], 0.0f, 1.0f);
    bool fallback = true;
    EXPECT_NEAR(Ssim(a, b, &fallback), NaiveSsim(a, b), 1e-6);
    EXPECT_FALSE(fallback);
  }
}

TEST(Ssim, IdentitySymmetryAndInversion) {
  const Tensor a = RandomImage(28, 28, 1, 4);
  const Tensor b = RandomImage(28, 28, 1, 5);
  EXPECT_EQ(Ssim(a, a), 1.0);
  EXPECT_NEAR(Ssim(a, b), Ssim(b, a), 1e-9);
  Tensor inv = a;
  for (float& v : inv.storage()) v = 1.0f - v;
  EXPECT_LT(Ssim(a, inv), 1.0);
  const double s = Ssim(a, b);
  EXPECT_GE(s, -1.0);
  EXPECT_LE(s, 1.0);
}

TEST(Ssim, SmallImagesFallBackToGlobalStatistics) {
  const Tensor a = RandomImage(7, 7, 1, 1), b = RandomImage(7, 7, 1, 2);
  bool fallback = false;
  const double s = Ssim(a, b, &fallback);
  EXPECT_TRUE(fallback);
  EXPECT_LT(s, 1.0);
  EXPECT_EQ(Ssim(a, a), 1.0);
}

std::vector<LabeledImage> Batch(std::initializer_list<int> labels, std::uint64_t seed) {
  std::vector<LabeledImage> b;
  for (int l : labels) b.push_back({RandomImage(16, 16, 1, seed++), l});
  return b;
}

TEST(ScoreBatch, PerfectRecoveriesAndIdentityMatching) {
  const auto batch = Batch({3, 1, 2}, 10);
  std::map<int, Tensor> rec;
  for (const auto& x : batch) rec[x.label] = x.image;
  const BatchScore s = ScoreBatch(rec, batch);
  EXPECT_EQ(s.scored(), 3);
  EXPECT_EQ(s.max_ssim, 1.0);
  EXPECT_EQ(s.avg_ssim, 1.0);
  for (const auto& c : s.per_class) EXPECT_EQ(batch[c.matched_index].label, c.label);
}

TEST(ScoreBatch, BestMatchWithinClassAndUnmatched) {
  auto batch = Batch({4, 4, 4}, 20);
  std::map<int, Tensor> rec{{4, batch[1].image}, {7, batch[0].image}};
  const BatchScore s = ScoreBatch(rec, batch);
  ASSERT_EQ(s.scored(), 1);
  EXPECT_EQ(s.per_class[0].matched_index, 1);
  EXPECT_EQ(s.unmatched_labels, std::vector<int>{7});
}

TEST(ScoreBatch, LowResolutionRecoveryIsUpsampled) {
  Tensor small({4, 4, 1});
  for (std::size_t i = 0; i < small.size(); ++i) small[i] = static_cast<float>(i) / 16;
  const Tensor big = ResizeNearest(small, 16, 16);
  const BatchScore s = ScoreBatch({{1, small}}, {{big, 1}});
  EXPECT_EQ(s.max_ssim, 1.0);
}

TEST(ScoreBatch, InvariantToConsistentRelabeling) {
  const auto batch = Batch({1, 2, 3}, 30);
  std::map<int, Tensor> rec{{1, batch[2].image}, {2, batch[1].image}, {3, batch[0].image}};
  const BatchScore s = ScoreBatch(rec, batch);
  auto relabeled = batch;
  std::map<int, Tensor> rec2;
  const int perm[4] = {0, 3, 1, 2};
  for (auto& x : relabeled) x.label = perm[x.label];
  for (const auto& [l, t] : rec) rec2[perm[l]] = t;
  const BatchScore s2 = ScoreBatch(rec2, relabeled);
  EXPECT_DOUBLE_EQ(s.avg_ssim, s2.avg_ssim);
  EXPECT_DOUBLE_EQ(s.max_psnr, s2.max_psnr);
}

}  // namespace
}  // namespace mkor
