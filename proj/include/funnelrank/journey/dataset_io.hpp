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

// Line-delimited JSON datasets. The first line is a header
//   {"schema": {"listing_dim", "context_dim", "context_names", "milestones", "window_days"}}
// and every following line is one journey:
//   {"guest_id", "outcome", "searches": [{"search_id", "t_days", "context": [...],
//     "impressions": [{"listing_id", "position", "features": [...], "labels": {"c": true, ...}}]}]}
// Only set labels are written.

#include <filesystem>
#include <iosfwd>
#include <stdexcept>

#include <json.hpp>

#include "funnelrank/journey/records.hpp"

namespace funnelrank::journey {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

nlohmann::json schema_to_json(const DatasetSchema& schema);
DatasetSchema schema_from_json(const nlohmann::json& j);

nlohmann::json journey_to_json(const JourneyRecord& journey);
JourneyRecord journey_from_json(const nlohmann::json& j);

void write_dataset(std::ostream& out, const Dataset& dataset);
Dataset read_dataset(std::istream& in);

void save_dataset(const std::filesystem::path& path, const Dataset& dataset);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace funnelrank::journey
