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

#include "mkor/network.h"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mkor {
namespace {

// OpenBLAS may split a GEMM across threads, which reorders the reduction.
// Pin it to one thread so results are bit-reproducible.
const bool kBlasPinned = [] {
  openblas_set_num_threads(1);
  return true;
}();

constexpr int kChunkRows = 4096;

template <typename T>
void CheckShape(const BasicTensor<T>& t, const std::vector<int>& want, const char* what) {
  if (t.shape() != want) {
    throw std::invalid_argument(std::string(what) + " shape " + ShapeToString(t.shape()) +
                                ", expected " + ShapeToString(want));
  }
}

// Rows [r0, r1) of the im2col matrix: row = output pixel, col = (kh, kw, ci).
template <typename T>
void Im2Col(const LayerSpec& l, const T* x, int r0, int r1, double* col) {
  const int H = l.in_shape[0], W = l.in_shape[1], C = l.in_shape[2];
  const int OW = l.out_shape[1], K = l.kernel;
  const int kkc = K * K * C;
  for (int r = r0; r < r1; ++r) {
    const int oh = r / OW, ow = r % OW;
    double* row = col + static_cast<std::size_t>(r - r0) * kkc;
    for (int kh = 0; kh < K; ++kh) {
      const int ih = oh * l.stride + kh - l.pad;
      for (int kw = 0; kw < K; ++kw) {
        const int iw = ow * l.stride + kw - l.pad;
        double* dst = row + (kh * K + kw) * C;
        if (ih < 0 || ih >= H || iw < 0 || iw >= W) {
          std::fill(dst, dst + C, 0.0);
        } else {
          const T* src = x + (static_cast<std::size_t>(ih) * W + iw) * C;
          for (int c = 0; c < C; ++c) dst[c] = static_cast<double>(src[c]);
        }
      }
    }
  }
}

template <typename T>
void Col2ImAdd(const LayerSpec& l, const double* dcol, int r0, int r1, double* dx) {
  const int H = l.in_shape[0], W = l.in_shape[1], C = l.in_shape[2];
  const int OW = l.out_shape[1], K = l.kernel;
  const int kkc = K * K * C;
  for (int r = r0; r < r1; ++r) {
    const int oh = r / OW, ow = r % OW;
    const double* row = dcol + static_cast<std::size_t>(r - r0) * kkc;
    for (int kh = 0; kh < K; ++kh) {
      const int ih = oh * l.stride + kh - l.pad;
      if (ih < 0 || ih >= H) continue;
      for (int kw = 0; kw < K; ++kw) {
        const int iw = ow * l.stride + kw - l.pad;
        if (iw < 0 || iw >= W) continue;
        const double* src = row + (kh * K + kw) * C;
        double* dst = dx + (static_cast<std::size_t>(ih) * W + iw) * C;
        for (int c = 0; c < C; ++c) dst[c] += src[c];
      }
    }
  }
}

template <typename T>
std::vector<double> ToDouble(std::span<const T> v) {
  return std::vector<double>(v.begin(), v.end());
}

template <typename T>
BasicTensor<T> ConvForward(const ModelSpec& m, const LayerSpec& l, std::span<const T> params,
                           const BasicTensor<T>& x) {
  const auto& we = m.manifest[l.weight_entry];
  std::vector<double> w = ToDouble(params.subspan(we.offset, we.count));
  const int M = l.out_shape[0] * l.out_shape[1];
  const int N = l.out_channels;
  const int kkc = l.kernel * l.kernel * l.in_channels;
  BasicTensor<T> y(l.out_shape);
  std::vector<double> col(static_cast<std::size_t>(std::min(M, kChunkRows)) * kkc);
  std::vector<double> out(static_cast<std::size_t>(std::min(M, kChunkRows)) * N);
  std::span<const T> bias;
  if (l.bias_entry >= 0) {
    const auto& be = m.manifest[l.bias_entry];
    bias = params.subspan(be.offset, be.count);
  }
  for (int r0 = 0; r0 < M; r0 += kChunkRows) {
    const int r1 = std::min(M, r0 + kChunkRows);
    const int rows = r1 - r0;
    Im2Col(l, x.data(), r0, r1, col.data());
    cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasTrans, rows, N, kkc, 1.0, col.data(), kkc,
                w.data(), kkc, 0.0, out.data(), N);
    for (int r = 0; r < rows; ++r) {
      T* dst = y.data() + static_cast<std::size_t>(r0 + r) * N;
      const double* src = out.data() + static_cast<std::size_t>(r) * N;
      for (int c = 0; c < N; ++c) {
        dst[c] = static_cast<T>(src[c] + (bias.empty() ? 0.0 : static_cast<double>(bias[c])));
      }
    }
  }
  return y;
}

// Accumulates weight/bias gradients into `grad`; returns dL/dx unless skip_dx.
template <typename T>
BasicTensor<T> ConvBackward(const ModelSpec& m, const LayerSpec& l, std::span<const T> params,
                            const BasicTensor<T>& x, const BasicTensor<T>& dy, std::span<T> grad,
                            bool skip_dx) {
  const auto& we = m.manifest[l.weight_entry];
  std::vector<double> w = ToDouble(params.subspan(we.offset, we.count));
  const int M = l.out_shape[0] * l.out_shape[1];
  const int N = l.out_channels;
  const int kkc = l.kernel * l.kernel * l.in_channels;
  const int chunk = std::min(M, kChunkRows);
  std::vector<double> col(static_cast<std::size_t>(chunk) * kkc);
  std::vector<double> dcol(skip_dx ? 0 : static_cast<std::size_t>(chunk) * kkc);
  std::vector<double> dyd(static_cast<std::size_t>(chunk) * N);
  std::vector<double> dw(static_cast<std::size_t>(N) * kkc, 0.0);
  std::vector<double> db(N, 0.0);
  std::vector<double> dx(skip_dx ? 0 : x.size(), 0.0);
  for (int r0 = 0; r0 < M; r0 += kChunkRows) {
    const int r1 = std::min(M, r0 + kChunkRows);
    const int rows = r1 - r0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(rows) * N; ++i) {
      dyd[i] = static_cast<double>(dy[static_cast<std::size_t>(r0) * N + i]);
    }
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < N; ++c) db[c] += dyd[static_cast<std::size_t>(r) * N + c];
    }
    Im2Col(l, x.data(), r0, r1, col.data());
    cblas_dgemm(CblasRowMajor, CblasTrans, CblasNoTrans, N, kkc, rows, 1.0, dyd.data(), N,
                col.data(), kkc, 1.0, dw.data(), kkc);
    if (!skip_dx) {
      cblas_dgemm(CblasRowMajor, CblasNoTrans, CblasNoTrans, rows, kkc, N, 1.0, dyd.data(), N,
                  w.data(), kkc, 0.0, dcol.data(), kkc);
      Col2ImAdd<T>(l, dcol.data(), r0, r1, dx.data());
    }
  }
  T* gw = grad.data() + we.offset;
  for (std::size_t i = 0; i < dw.size(); ++i) gw[i] += static_cast<T>(dw[i]);
  if (l.bias_entry >= 0) {
    T* gb = grad.data() + m.manifest[l.bias_entry].offset;
    for (int c = 0; c < N; ++c) gb[c] += static_cast<T>(db[c]);
  }
  BasicTensor<T> out;
  if (!skip_dx) {
    out = BasicTensor<T>(l.in_shape);
    for (std::size_t i = 0; i < dx.size(); ++i) out[i] = static_cast<T>(dx[i]);
  }
  return out;
}

template <typename T>
BasicTensor<T> FcForward(const ModelSpec& m, const LayerSpec& l, std::span<const T> params,
                         const BasicTensor<T>& x) {
  const T* w = params.data() + m.manifest[l.weight_entry].offset;
  const T* b = l.bias_entry >= 0 ? params.data() + m.manifest[l.bias_entry].offset : nullptr;
  const int in = l.in_channels, out = l.out_channels;
  BasicTensor<T> y(l.out_shape);
  for (int o = 0; o < out; ++o) {
    const T* row = w + static_cast<std::size_t>(o) * in;
    double s = b ? static_cast<double>(b[o]) : 0.0;
    for (int i = 0; i < in; ++i) s += static_cast<double>(row[i]) * static_cast<double>(x[i]);
    y[o] = static_cast<T>(s);
  }
  return y;
}

template <typename T>
BasicTensor<T> FcBackward(const ModelSpec& m, const LayerSpec& l, std::span<const T> params,
                          const BasicTensor<T>& x, const BasicTensor<T>& dy, std::span<T> grad) {
  const T* w = params.data() + m.manifest[l.weight_entry].offset;
  T* gw = grad.data() + m.manifest[l.weight_entry].offset;
  T* gb = l.bias_entry >= 0 ? grad.data() + m.manifest[l.bias_entry].offset : nullptr;
  const int in = l.in_channels, out = l.out_channels;
  std::vector<double> dx(in, 0.0);
  for (int o = 0; o < out; ++o) {
    const double d = static_cast<double>(dy[o]);
    if (gb) gb[o] += static_cast<T>(d);
    if (d == 0.0) continue;
    const T* row = w + static_cast<std::size_t>(o) * in;
    T* grow = gw + static_cast<std::size_t>(o) * in;
    for (int i = 0; i < in; ++i) {
      grow[i] += static_cast<T>(d * static_cast<double>(x[i]));
      dx[i] += d * static_cast<double>(row[i]);
    }
  }
  BasicTensor<T> out_t(l.in_shape);
  for (int i = 0; i < in; ++i) out_t[i] = static_cast<T>(dx[i]);
  return out_t;
}

template <typename T>
BasicTensor<T> PoolForward(const LayerSpec& l, const BasicTensor<T>& x) {
  const int OH = l.out_shape[0], OW = l.out_shape[1], C = l.out_shape[2];
  BasicTensor<T> y(l.out_shape);
  for (int h = 0; h < OH; ++h) {
    for (int w = 0; w < OW; ++w) {
      for (int c = 0; c < C; ++c) {
        const T a = x.at(2 * h, 2 * w, c), b = x.at(2 * h, 2 * w + 1, c);
        const T d = x.at(2 * h + 1, 2 * w, c), e = x.at(2 * h + 1, 2 * w + 1, c);
        if (l.kind == LayerKind::kMaxPool) {
          y.at(h, w, c) = std::max(std::max(a, b), std::max(d, e));
        } else {
          double s = static_cast<double>(a) + b + d + e;
          y.at(h, w, c) = static_cast<T>(0.25 * s);
        }
      }
    }
  }
  return y;
}

template <typename T>
BasicTensor<T> PoolBackward(const LayerSpec& l, const BasicTensor<T>& x, const BasicTensor<T>& dy) {
  const int OH = l.out_shape[0], OW = l.out_shape[1], C = l.out_shape[2];
  BasicTensor<T> dx(l.in_shape);
  for (int h = 0; h < OH; ++h) {
    for (int w = 0; w < OW; ++w) {
      for (int c = 0; c < C; ++c) {
        const T g = dy.at(h, w, c);
        if (l.kind == LayerKind::kAvgPool) {
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) dx.at(2 * h + i, 2 * w + j, c) = static_cast<T>(0.25 * g);
          continue;
        }
        // First maximum in row-major order takes the gradient.
        int bi = 0, bj = 0;
        T best = x.at(2 * h, 2 * w, c);
        for (int i = 0; i < 2; ++i) {
          for (int j = 0; j < 2; ++j) {
            const T v = x.at(2 * h + i, 2 * w + j, c);
            if (v > best) {
              best = v;
              bi = i;
              bj = j;
            }
          }
        }
        dx.at(2 * h + bi, 2 * w + bj, c) = g;
      }
    }
  }
  return dx;
}

template <typename T>
T Sigmoid(T v) {
  return static_cast<T>(1.0 / (1.0 + std::exp(-static_cast<double>(v))));
}

}  // namespace

double SoftmaxCrossEntropy(std::span<const double> logits, int label, std::vector<double>* dlogits) {
  const int n = static_cast<int>(logits.size());
  if (label < 1 || label > n) {
    throw std::invalid_argument("label " + std::to_string(label) + " outside [1, " +
                                std::to_string(n) + "]");
  }
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : logits) s += std::exp(v - mx);
  const double lse = mx + std::log(s);
  if (dlogits) {
    dlogits->resize(n);
    for (int i = 0; i < n; ++i) (*dlogits)[i] = std::exp(logits[i] - lse);
    (*dlogits)[label - 1] -= 1.0;
  }
  return std::max(0.0, lse - logits[label - 1]);
}

template <typename T>
std::vector<BasicTensor<T>> ForwardT(const ModelSpec& model, std::span<const T> params,
                                     const BasicTensor<T>& x) {
  (void)kBlasPinned;
  if (params.size() != model.param_count) throw std::invalid_argument("params/model mismatch");
  CheckShape(x, model.input_shape, "input");
  std::vector<BasicTensor<T>> acts;
  acts.reserve(model.layers.size());
  const BasicTensor<T>* cur = &x;
  for (const auto& l : model.layers) {
    switch (l.kind) {
      case LayerKind::kConv2d:
        acts.push_back(ConvForward(model, l, params, *cur));
        break;
      case LayerKind::kFc:
        acts.push_back(FcForward(model, l, params, *cur));
        break;
      case LayerKind::kRelu: {
        BasicTensor<T> y = *cur;
        for (T& v : y.storage()) v = v > T(0) ? v : T(0);
        acts.push_back(std::move(y));
        break;
      }
      case LayerKind::kSigmoid: {
        BasicTensor<T> y = *cur;
        for (T& v : y.storage()) v = Sigmoid(v);
        acts.push_back(std::move(y));
        break;
      }
      case LayerKind::kMaxPool:
      case LayerKind::kAvgPool:
        acts.push_back(PoolForward(l, *cur));
        break;
      case LayerKind::kFlatten:
        acts.push_back(cur->Reshaped(l.out_shape));
        break;
    }
    cur = &acts.back();
  }
  return acts;
}

template <typename T>
double AccumulateGradientT(const ModelSpec& model, std::span<const T> params,
                           const BasicTensor<T>& x, int label, std::span<T> grad,
                           BasicTensor<T>* input_grad) {
  if (grad.size() != model.param_count) throw std::invalid_argument("grad/model mismatch");
  auto acts = ForwardT(model, params, x);
  const auto& logits_t = acts.back();
  std::vector<double> logits(logits_t.values().begin(), logits_t.values().end());
  std::vector<double> dlog;
  const double loss = SoftmaxCrossEntropy(logits, label, &dlog);

  BasicTensor<T> dy(logits_t.shape());
  for (std::size_t i = 0; i < dlog.size(); ++i) dy[i] = static_cast<T>(dlog[i]);

  // The first layer with parameters does not need its input gradient.
  int first_param_layer = 0;
  while (first_param_layer < static_cast<int>(model.layers.size()) &&
         model.layers[first_param_layer].weight_entry < 0) {
    ++first_param_layer;
  }
  for (int i = static_cast<int>(model.layers.size()) - 1; i >= 0; --i) {
    const auto& l = model.layers[i];
    const BasicTensor<T>& in = i == 0 ? x : acts[i - 1];
    const bool skip_dx = input_grad == nullptr && i <= first_param_layer;
    switch (l.kind) {
      case LayerKind::kConv2d:
        dy = ConvBackward(model, l, params, in, dy, grad, skip_dx);
        break;
      case LayerKind::kFc:
        dy = FcBackward(model, l, params, in, dy, grad);
        break;
      case LayerKind::kRelu:
        for (std::size_t k = 0; k < dy.size(); ++k) {
          if (!(in[k] > T(0))) dy[k] = T(0);
        }
        break;
      case LayerKind::kSigmoid: {
        const auto& out = acts[i];
        for (std::size_t k = 0; k < dy.size(); ++k) {
          const double s = static_cast<double>(out[k]);
          dy[k] = static_cast<T>(static_cast<double>(dy[k]) * s * (1.0 - s));
        }
        break;
      }
      case LayerKind::kMaxPool:
      case LayerKind::kAvgPool:
        dy = PoolBackward(l, in, dy);
        break;
      case LayerKind::kFlatten:
        dy = dy.Reshaped(l.in_shape);
        break;
    }
    if (skip_dx && l.weight_entry >= 0) break;
  }
  if (input_grad) *input_grad = std::move(dy);
  return loss;
}

template std::vector<BasicTensor<float>> ForwardT(const ModelSpec&, std::span<const float>,
                                                  const BasicTensor<float>&);
template std::vector<BasicTensor<double>> ForwardT(const ModelSpec&, std::span<const double>,
                                                   const BasicTensor<double>&);
template double AccumulateGradientT(const ModelSpec&, std::span<const float>,
                                    const BasicTensor<float>&, int, std::span<float>,
                                    BasicTensor<float>*);
template double AccumulateGradientT(const ModelSpec&, std::span<const double>,
                                    const BasicTensor<double>&, int, std::span<double>,
                                    BasicTensor<double>*);

std::vector<Tensor> Forward(const ModelSpec& model, const ParamSet& params, const Tensor& x) {
  return ForwardT<float>(model, params.values, x);
}

double LossAndGradient(const ModelSpec& model, const ParamSet& params, const Tensor& x, int label,
                       GradientUpdate* grad) {
  GradientUpdate g(model, 1);
  const double loss = AccumulateGradientT<float>(model, params.values, x, label, g.values);
  if (grad) *grad = std::move(g);
  return loss;
}

double AccumulateGradient(const ModelSpec& model, const ParamSet& params, const Tensor& x,
                          int label, GradientUpdate& sum) {
  if (sum.values.size() != model.param_count) sum = GradientUpdate(model, 0);
  const double loss = AccumulateGradientT<float>(model, params.values, x, label, sum.values);
  sum.batch_size += 1;
  return loss;
}

}  // namespace mkor
