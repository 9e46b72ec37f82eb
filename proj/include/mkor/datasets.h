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

#ifndef MKOR_DATASETS_H_
#define MKOR_DATASETS_H_

#include <cstdint>
#include <string>
#include <vector>

#include "mkor/tensor.h"

namespace mkor {

struct LabeledImage {
  Tensor image;   // H x W x C in [0, 1]
  int label = 1;  // 1-based
};

// IDX files; labels stored 0..9 come back as 1..10.
std::vector<LabeledImage> LoadMnist(const std::string& images_path, const std::string& labels_path);

// Picks train-*, else t10k-*, else subset5k-* IDX pairs inside `dir`.
std::vector<LabeledImage> LoadMnistDir(const std::string& dir);

// CIFAR-100 binary records (coarse byte, fine byte, 3072 planar RGB bytes); fine label used.
std::vector<LabeledImage> LoadCifar100(const std::string& path);

// Every *.ppm / *.pgm in `dir`, sorted by name. The label is the integer
// prefix of the file name before the first '_' (e.g. "7_cat.ppm" -> 7), else 1.
std::vector<LabeledImage> LoadPnmFolder(const std::string& dir);

// Smooth class-keyed images: each class owns 2-4 Gaussian blobs; each image
// jitters them slightly. Deterministic in `seed`.
std::vector<LabeledImage> SynthDataset(int num_classes, int per_class, int height, int width,
                                       int channels, std::uint64_t seed);

enum class BatchRegime { kUnique, kRandom, kCapped };

BatchRegime ParseBatchRegime(const std::string& s);
const char* BatchRegimeName(BatchRegime r);

struct BatchSpec {
  BatchRegime regime = BatchRegime::kUnique;
  int batch_size = 1;
  int class_cap = 0;                 // capped only
  std::vector<double> class_probs;   // random only; empty = uniform over present classes
  std::uint64_t seed = 0;
};

std::vector<LabeledImage> MakeBatch(const std::vector<LabeledImage>& data, const BatchSpec& spec);

// Half-pixel-centred bilinear interpolation (align_corners = false).
Tensor UpscaleBilinear(const Tensor& image, int height, int width);
Tensor ResizeNearest(const Tensor& image, int height, int width);
// Mean over `factor` x `factor` blocks.
Tensor BlockMean(const Tensor& image, int factor);

int CountClasses(const std::vector<LabeledImage>& data);

}  // namespace mkor

#endif  // MKOR_DATASETS_H_
