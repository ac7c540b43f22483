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

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "funnelrank/journey/milestone.hpp"

namespace funnelrank::journey {

using ListingId = std::uint64_t;

/// Raised for records that break a dataset invariant.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ImpressionRecord {
  ListingId listing_id = 0;
  int position = 0;  // 1-based
  Eigen::VectorXd features;
  LabelVector labels;
};

struct SearchRecord {
  std::uint64_t search_id = 0;
  double t_days = 0.0;
  Eigen::VectorXd context;
  std::vector<ImpressionRecord> impressions;
};

enum class JourneyOutcome { kUncancelled, kCancelledOrRejected, kAbandoned };

std::string_view to_string(JourneyOutcome o);
JourneyOutcome parse_outcome(std::string_view name);

struct JourneyRecord {
  std::uint64_t guest_id = 0;
  std::vector<SearchRecord> searches;  // ordered by t_days
  JourneyOutcome outcome = JourneyOutcome::kAbandoned;
};

inline constexpr const char* kDaysAheadFeature = "days_ahead";
inline constexpr const char* kNumPreviousSearchesFeature = "num_previous_searches";

/// Widths and names shared by every record of a dataset.
struct DatasetSchema {
  int listing_dim = 0;
  int context_dim = 0;
  std::vector<std::string> context_names;  // size context_dim
  double window_days = 30.0;

  /// Index of a context feature, or -1.
  int context_index(std::string_view name) const;

  /// Stable hex digest of the schema fields.
  std::string hash() const;

  friend bool operator==(const DatasetSchema&, const DatasetSchema&) = default;
};

struct Dataset {
  DatasetSchema schema;
  std::vector<JourneyRecord> journeys;

  std::size_t search_count() const;
  std::size_t impression_count() const;
};

/// Outcome implied by the labels a journey carries.
JourneyOutcome derive_outcome(const JourneyRecord& journey);

}  // namespace funnelrank::journey
