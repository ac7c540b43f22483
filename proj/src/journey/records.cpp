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

#include "funnelrank/journey/records.hpp"

#include <stdexcept>

#include <json.hpp>

#include "funnelrank/util/hash.hpp"

namespace funnelrank::journey {

namespace {
constexpr std::array<std::string_view, kMilestoneCount> kNames = {"imp", "c",   "lc",  "pp",  "req",
                                                                  "book", "unc", "rej", "cbh", "cbg"};
}

std::string_view to_string(Milestone m) { return kNames[static_cast<std::size_t>(m)]; }

std::optional<Milestone> parse_milestone(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return static_cast<Milestone>(i);
  }
  return std::nullopt;
}

Milestone milestone_from_string(std::string_view name) {
  if (auto m = parse_milestone(name)) return *m;
  throw std::invalid_argument("unknown milestone: " + std::string(name));
}

std::string_view to_string(JourneyOutcome o) {
  switch (o) {
    case JourneyOutcome::kUncancelled: return "unc";
    case JourneyOutcome::kCancelledOrRejected: return "cancelled_or_rejected";
    case JourneyOutcome::kAbandoned: return "abandoned";
  }
  return "abandoned";
}

JourneyOutcome parse_outcome(std::string_view name) {
  if (name == "unc") return JourneyOutcome::kUncancelled;
  if (name == "cancelled_or_rejected") return JourneyOutcome::kCancelledOrRejected;
  if (name == "abandoned") return JourneyOutcome::kAbandoned;
  throw std::invalid_argument("unknown journey outcome: " + std::string(name));
}

int DatasetSchema::context_index(std::string_view name) const {
  for (std::size_t i = 0; i < context_names.size(); ++i) {
    if (context_names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

std::string DatasetSchema::hash() const {
  nlohmann::json j = {{"listing_dim", listing_dim},
                      {"context_dim", context_dim},
                      {"context_names", context_names},
                      {"window_days", window_days}};
  return util::sha256_hex(j.dump()).substr(0, 16);
}

std::size_t Dataset::search_count() const {
  std::size_t n = 0;
  for (const auto& j : journeys) n += j.searches.size();
  return n;
}

std::size_t Dataset::impression_count() const {
  std::size_t n = 0;
  for (const auto& j : journeys)
    for (const auto& s : j.searches) n += s.impressions.size();
  return n;
}

JourneyOutcome derive_outcome(const JourneyRecord& journey) {
  bool negative = false;
  for (const auto& s : journey.searches) {
    for (const auto& imp : s.impressions) {
      if (imp.labels[Milestone::unc]) return JourneyOutcome::kUncancelled;
      negative = negative || imp.labels.any_negative();
    }
  }
  return negative ? JourneyOutcome::kCancelledOrRejected : JourneyOutcome::kAbandoned;
}

}  // namespace funnelrank::journey
