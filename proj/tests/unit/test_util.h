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

#ifndef MKOR_TESTS_TEST_UTIL_H_
#define MKOR_TESTS_TEST_UTIL_H_

#include <filesystem>
#include <random>
#include <string>

#include "mkor/tensor.h"

namespace mkor::testing {

inline Tensor RandomImage(int h, int w, int c, std::uint64_t seed, float lo = 0.0f, float hi = 1.0f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(lo, hi);
  Tensor t({h, w, c});
  for (float& v : t.storage()) v = u(rng);
  return t;
}

inline std::string TempPath(const std::string& name) {
  std::filesystem::create_directories(MKOR_TEST_TMP);
  return std::string(MKOR_TEST_TMP) + "/" + name;
}

}  // namespace mkor::testing

#endif  // MKOR_TESTS_TEST_UTIL_H_
