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

#ifndef MKOR_SERIALIZE_H_
#define MKOR_SERIALIZE_H_

#include <string>

#include "json.hpp"
#include "mkor/conv_plan.h"
#include "mkor/fc_attack.h"
#include "mkor/fl_sim.h"
#include "mkor/metrics.h"
#include "mkor/pipeline.h"

namespace mkor {

using Json = nlohmann::ordered_json;

// Non-finite values become the strings "inf", "-inf" or "nan".
Json Number(double v);
double NumberFrom(const Json& j);

Json ToJson(const DecouplingMap& map);
DecouplingMap DecouplingMapFromJson(const Json& j);

Json ToJson(const ConvPlan& plan);
// Traces are recomputed from the model.
ConvPlan ConvPlanFromJson(const Json& j, const ModelSpec& model);

Json ToJson(const AuditReport& report);
Json ToJson(const BatchScore& score);
Json ToJson(const ReconstructionReport& report);
Json ToJson(const LeakageResult& result);

void WriteJson(const std::string& path, const Json& j);
Json ReadJson(const std::string& path);

}  // namespace mkor

#endif  // MKOR_SERIALIZE_H_
