// Copyright (c) 2026 The funnelrank Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// A model directory holds model.json (config, normalization, task weights,
// training schema hash) next to params.json/params.bin.

#include <filesystem>
#include <stdexcept>

#include <json.hpp>

#include "funnelrank/journey/records.hpp"
#include "funnelrank/model/ranker.hpp"

namespace funnelrank::model {

class SchemaMismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr const char* kModelFormat = "funnelrank-model-v1";

nlohmann::json model_manifest(const MilestoneRanker& model);
void save_model(const MilestoneRanker& model, const std::filesystem::path& dir);
MilestoneRanker load_model(const std::filesystem::path& dir);

/// Throws SchemaMismatchError unless `schema` hashes to the model's training schema.
void require_schema(const MilestoneRanker& model, const journey::DatasetSchema& schema);

}  // namespace funnelrank::model
