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

#include "mkor/datasets.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

#include "mkor/image_io.h"

namespace mkor {
namespace {

std::vector<unsigned char> ReadAll(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

std::uint32_t BigEndian32(const std::vector<unsigned char>& b, std::size_t at) {
  return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) |
         (std::uint32_t(b[at + 2]) << 8) | std::uint32_t(b[at + 3]);
}

}  // namespace

std::vector<LabeledImage> LoadMnist(const std::string& images_path, const std::string& labels_path) {
  const auto img = ReadAll(images_path);
  const auto lab = ReadAll(labels_path);
  if (img.size() < 16 || BigEndian32(img, 0) != 0x00000803) {
    throw std::runtime_error(images_path + ": bad IDX image magic");
  }
  if (lab.size() < 8 || BigEndian32(lab, 0) != 0x00000801) {
    throw std::runtime_error(labels_path + ": bad IDX label magic");
  }
  const std::size_t n = BigEndian32(img, 4);
  const int rows = static_cast<int>(BigEndian32(img, 8));
  const int cols = static_cast<int>(BigEndian32(img, 12));
  const std::size_t nl = BigEndian32(lab, 4);
  if (n != nl) {
    throw std::runtime_error("MNIST count mismatch: " + std::to_string(n) + " images, " +
                             std::to_string(nl) + " labels");
  }
  const std::size_t pix = static_cast<std::size_t>(rows) * cols;
  if (img.size() < 16 + n * pix) throw std::runtime_error(images_path + ": truncated");
  if (lab.size() < 8 + n) throw std::runtime_error(labels_path + ": truncated");
  std::vector<LabeledImage> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    Tensor t({rows, cols, 1});
    const unsigned char* src = img.data() + 16 + i * pix;
    for (std::size_t p = 0; p < pix; ++p) t[p] = src[p] / 255.0f;
    if (lab[8 + i] > 9) throw std::runtime_error(labels_path + ": label out of range");
    out[i] = {std::move(t), lab[8 + i] + 1};
  }
  return out;
}

std::vector<LabeledImage> LoadMnistDir(const std::string& dir) {
  namespace fs = std::filesystem;
  for (const char* prefix : {"train", "t10k", "subset5k"}) {
    const fs::path img = fs::path(dir) / (std::string(prefix) + "-images-idx3-ubyte");
    const fs::path lab = fs::path(dir) / (std::string(prefix) + "-labels-idx1-ubyte");
    if (fs::exists(img) && fs::exists(lab)) return LoadMnist(img.string(), lab.string());
  }
  throw std::runtime_error(dir + ": no MNIST IDX files (run tools/fetch_mnist_subset.py)");
}

std::vector<LabeledImage> LoadCifar100(const std::string& path) {
  constexpr std::size_t kRecord = 2 + 3072;
  const auto b = ReadAll(path);
  if (b.empty() || b.size() % kRecord != 0) {
    throw std::runtime_error(path + ": size is not a whole number of CIFAR-100 records");
  }
  const std::size_t n = b.size() / kRecord;
  std::vector<LabeledImage> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned char* r = b.data() + i * kRecord;
    if (r[1] > 99) throw std::runtime_error(path + ": fine label out of range");
    Tensor t({32, 32, 3});
    for (int c = 0; c < 3; ++c) {
      for (int p = 0; p < 1024; ++p) t[static_cast<std::size_t>(p) * 3 + c] = r[2 + c * 1024 + p] / 255.0f;
    }
    out[i] = {std::move(t), r[1] + 1};
  }
  return out;
}

std::vector<LabeledImage> LoadPnmFolder(const std::string& dir) {
  namespace fs = std::filesystem;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto ext = e.path().extension().string();
    if (e.is_regular_file() && (ext == ".ppm" || ext == ".pgm")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<LabeledImage> out;
  for (const auto& f : files) {
    const std::string stem = f.stem().string();
    int label = 1;
    const auto us = stem.find('_');
    try {
      if (us != std::string::npos) label = std::max(1, std::stoi(stem.substr(0, us)));
    } catch (const std::exception&) {
      label = 1;
    }
    out.push_back({ReadPnm(f.string()), label});
  }
  if (out.empty()) throw std::runtime_error(dir + ": no .ppm/.pgm files");
  return out;
}

std::vector<LabeledImage> SynthDataset(int num_classes, int per_class, int height, int width,
                                       int channels, std::uint64_t seed) {
  if (num_classes < 1 || per_class < 1 || height < 1 || width < 1 || channels < 1) {
    throw std::invalid_argument("SynthDataset: sizes must be positive");
  }
  struct Blob {
    double cy, cx, s;
    std::vector<double> amp;
  };
  std::vector<LabeledImage> out;
  for (int n = 1; n <= num_classes; ++n) {
    std::seed_seq class_seq{seed, std::uint64_t(n), std::uint64_t(0x5eed)};
    std::mt19937_64 crng(class_seq);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const int blobs = 2 + static_cast<int>(crng() % 3);
    std::vector<Blob> proto(blobs);
    std::vector<double> base(channels);
    for (double& b : base) b = 0.1 + 0.15 * u(crng);
    for (auto& b : proto) {
      b.cy = 0.15 + 0.7 * u(crng);
      b.cx = 0.15 + 0.7 * u(crng);
      b.s = 0.06 + 0.12 * u(crng);
      b.amp.resize(channels);
      const double sign = u(crng) < 0.2 ? -0.5 : 1.0;
      for (double& a : b.amp) a = sign * (0.25 + 0.35 * u(crng));
    }
    for (int k = 0; k < per_class; ++k) {
      std::seed_seq img_seq{seed, std::uint64_t(n), std::uint64_t(k) + 1};
      std::mt19937_64 irng(img_seq);
      std::normal_distribution<double> jitter(0.0, 0.03);
      std::uniform_real_distribution<double> gain(0.85, 1.15);
      std::vector<Blob> blob = proto;
      for (auto& b : blob) {
        b.cy += jitter(irng);
        b.cx += jitter(irng);
        const double g = gain(irng);
        for (double& a : b.amp) a *= g;
      }
      Tensor t({height, width, channels});
      for (int h = 0; h < height; ++h) {
        for (int w = 0; w < width; ++w) {
          const double y = (h + 0.5) / height, x = (w + 0.5) / width;
          for (int c = 0; c < channels; ++c) {
            double v = base[c];
            for (const auto& b : blob) {
              const double d2 = (y - b.cy) * (y - b.cy) + (x - b.cx) * (x - b.cx);
              v += b.amp[c] * std::exp(-d2 / (2 * b.s * b.s));
            }
            t.at(h, w, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
          }
        }
      }
      out.push_back({std::move(t), n});
    }
  }
  return out;
}

BatchRegime ParseBatchRegime(const std::string& s) {
  if (s == "unique") return BatchRegime::kUnique;
  if (s == "random") return BatchRegime::kRandom;
  if (s == "capped") return BatchRegime::kCapped;
  throw std::invalid_argument("unknown batch regime '" + s + "'");
}

const char* BatchRegimeName(BatchRegime r) {
  switch (r) {
    case BatchRegime::kUnique: return "unique";
    case BatchRegime::kRandom: return "random";
    case BatchRegime::kCapped: return "capped";
  }
  return "?";
}

int CountClasses(const std::vector<LabeledImage>& data) {
  std::set<int> s;
  for (const auto& d : data) s.insert(d.label);
  return static_cast<int>(s.size());
}

std::vector<LabeledImage> MakeBatch(const std::vector<LabeledImage>& data, const BatchSpec& spec) {
  if (spec.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) by_class[data[i].label].push_back(i);
  std::vector<int> classes;
  for (const auto& [c, _] : by_class) classes.push_back(c);
  if (classes.empty()) throw std::invalid_argument("empty dataset");

  std::mt19937_64 rng(spec.seed);
  auto pick = [&](int label) {
    const auto& idx = by_class.at(label);
    return data[idx[std::uniform_int_distribution<std::size_t>(0, idx.size() - 1)(rng)]];
  };
  std::vector<LabeledImage> batch;
  batch.reserve(spec.batch_size);
  switch (spec.regime) {
    case BatchRegime::kUnique: {
      if (spec.batch_size > static_cast<int>(classes.size())) {
        throw std::invalid_argument("unique batch of " + std::to_string(spec.batch_size) +
                                    " needs that many classes, data has " +
                                    std::to_string(classes.size()));
      }
      std::shuffle(classes.begin(), classes.end(), rng);
      for (int k = 0; k < spec.batch_size; ++k) batch.push_back(pick(classes[k]));
      break;
    }
    case BatchRegime::kRandom: {
      std::vector<double> p = spec.class_probs;
      std::vector<int> support = classes;
      if (!p.empty()) {
        // p is indexed by label - 1.
        double total = 0.0;
        for (double v : p) {
          if (v < 0) throw std::invalid_argument("negative class probability");
          total += v;
        }
        if (std::abs(total - 1.0) > 1e-6) throw std::invalid_argument("class probabilities must sum to 1");
        support.clear();
        for (std::size_t i = 0; i < p.size(); ++i) support.push_back(static_cast<int>(i) + 1);
        for (std::size_t i = 0; i < p.size(); ++i) {
          if (p[i] > 0 && !by_class.count(static_cast<int>(i) + 1)) {
            throw std::invalid_argument("class " + std::to_string(i + 1) + " has probability but no images");
          }
        }
      } else {
        p.assign(classes.size(), 1.0 / classes.size());
      }
      std::discrete_distribution<std::size_t> draw(p.begin(), p.end());
      for (int k = 0; k < spec.batch_size; ++k) batch.push_back(pick(support[draw(rng)]));
      break;
    }
    case BatchRegime::kCapped: {
      if (spec.class_cap < 1 || spec.class_cap > static_cast<int>(classes.size())) {
        throw std::invalid_argument("class cap must be in [1, " + std::to_string(classes.size()) + "]");
      }
      std::shuffle(classes.begin(), classes.end(), rng);
      std::uniform_int_distribution<int> draw(0, spec.class_cap - 1);
      for (int k = 0; k < spec.batch_size; ++k) batch.push_back(pick(classes[draw(rng)]));
      break;
    }
  }
  return batch;
}

Tensor UpscaleBilinear(const Tensor& image, int height, int width) {
  const int H = image.height(), W = image.width(), C = image.channels();
  Tensor out({height, width, C});
  auto src = [](int dst, int in, int outn) {
    double s = (dst + 0.5) * in / outn - 0.5;
    return std::clamp(s, 0.0, double(in - 1));
  };
  for (int h = 0; h < height; ++h) {
    const double sy = src(h, H, height);
    const int y0 = static_cast<int>(std::floor(sy));
    const int y1 = std::min(y0 + 1, H - 1);
    const double fy = sy - y0;
    for (int w = 0; w < width; ++w) {
      const double sx = src(w, W, width);
      const int x0 = static_cast<int>(std::floor(sx));
      const int x1 = std::min(x0 + 1, W - 1);
      const double fx = sx - x0;
      for (int c = 0; c < C; ++c) {
        const double v = (1 - fy) * ((1 - fx) * image.at(y0, x0, c) + fx * image.at(y0, x1, c)) +
                         fy * ((1 - fx) * image.at(y1, x0, c) + fx * image.at(y1, x1, c));
        out.at(h, w, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return out;
}

Tensor ResizeNearest(const Tensor& image, int height, int width) {
  const int H = image.height(), W = image.width(), C = image.channels();
  Tensor out({height, width, C});
  for (int h = 0; h < height; ++h) {
    const int sy = std::min(H - 1, static_cast<int>((h + 0.5) * H / height));
    for (int w = 0; w < width; ++w) {
      const int sx = std::min(W - 1, static_cast<int>((w + 0.5) * W / width));
      for (int c = 0; c < C; ++c) out.at(h, w, c) = image.at(sy, sx, c);
    }
  }
  return out;
}

Tensor BlockMean(const Tensor& image, int factor) {
  const int H = image.height() / factor, W = image.width() / factor, C = image.channels();
  Tensor out({H, W, C});
  for (int h = 0; h < H; ++h)
    for (int w = 0; w < W; ++w)
      for (int c = 0; c < C; ++c) {
        double s = 0;
        for (int i = 0; i < factor; ++i)
          for (int j = 0; j < factor; ++j) s += image.at(h * factor + i, w * factor + j, c);
        out.at(h, w, c) = static_cast<float>(s / (factor * factor));
      }
  return out;
}

}  // namespace mkor
