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

#ifndef MKOR_NETWORK_H_
#define MKOR_NETWORK_H_

#include <span>
#include <vector>

#include "mkor/model.h"
#include "mkor/params.h"
#include "mkor/tensor.h"

namespace mkor {

// outputs[i] is the output of layer i; the input itself is not included.
template <typename T>
std::vector<BasicTensor<T>> ForwardT(const ModelSpec& model, std::span<const T> params,
                                     const BasicTensor<T>& x);

// Softmax cross-entropy for a 1-based label. Adds dL/dA into `grad` (same
// layout as params) and returns the loss. Gradient w.r.t. the input is written
// to `input_grad` when non-null.
template <typename T>
double AccumulateGradientT(const ModelSpec& model, std::span<const T> params,
                           const BasicTensor<T>& x, int label, std::span<T> grad,
                           BasicTensor<T>* input_grad = nullptr);

std::vector<Tensor> Forward(const ModelSpec& model, const ParamSet& params, const Tensor& x);

// Per-sample loss and gradient (K = 1).
double LossAndGradient(const ModelSpec& model, const ParamSet& params, const Tensor& x, int label,
                       GradientUpdate* grad);

// Adds the gradient of one sample into `sum` and increments its batch size.
double AccumulateGradient(const ModelSpec& model, const ParamSet& params, const Tensor& x,
                          int label, GradientUpdate& sum);

// Loss of logits against a 1-based label, and dL/dlogits.
double SoftmaxCrossEntropy(std::span<const double> logits, int label, std::vector<double>* dlogits);

}  // namespace mkor

#endif  // MKOR_NETWORK_H_
