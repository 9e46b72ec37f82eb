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

#ifndef MKOR_METRICS_H_
#define MKOR_METRICS_H_

#include <map>
#include <vector>

#include "mkor/datasets.h"
#include "mkor/tensor.h"

namespace mkor {

// Dynamic range 1. +inf when the images are identical.
double Psnr(const Tensor& a, const Tensor& b);

// Gaussian-window SSIM (11x11, sigma 1.5, K1 0.01, K2 0.03, L 1), averaged
// over valid window positions and channels. Images smaller than the window
// use whole-image statistics and set *global_fallback.
double Ssim(const Tensor& a, const Tensor& b, bool* global_fallback = nullptr);

struct ClassScore {
  int label = 0;
  double ssim = 0.0;
  double psnr = 0.0;
  int matched_index = -1;  // index into the batch
  bool ssim_fallback = false;
};

struct BatchScore {
  std::vector<ClassScore> per_class;
  std::vector<int> unmatched_labels;  // recovered but absent from the batch
  double max_ssim = 0.0, avg_ssim = 0.0;
  double max_psnr = 0.0, avg_psnr = 0.0;
  int scored() const { return static_cast<int>(per_class.size()); }
};

// Each recovery is resized (nearest) to the ground-truth size and compared
// with the best-SSIM sample of its class.
BatchScore ScoreBatch(const std::map<int, Tensor>& recoveries, const std::vector<LabeledImage>& batch);

}  // namespace mkor

#endif  // MKOR_METRICS_H_
