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

#ifndef MKOR_IMAGE_IO_H_
#define MKOR_IMAGE_IO_H_

#include <string>

#include "mkor/tensor.h"

namespace mkor {

// Binary PGM (P5) for one channel, PPM (P6) for three; maxval 255.
// Values are clamped to [0, 1] and rounded to the nearest byte.
void WritePnm(const std::string& path, const Tensor& image);
Tensor ReadPnm(const std::string& path);

}  // namespace mkor

#endif  // MKOR_IMAGE_IO_H_
