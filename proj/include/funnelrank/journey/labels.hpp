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

#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "funnelrank/journey/records.hpp"

namespace funnelrank::journey {

/// Kinds of invariant violation counted by validate_dataset.
enum class Violation {
  kMissingImpression,       // imp bit unset
  kFunnelConsistency,       // a chain milestone without its predecessor
  kRejectionImplication,    // rej without req, or rej with book
  kCancellationImplication, // cbh/cbg without book
  kUncExcludesNegatives,    // unc together with rej/cbh/cbg
  kListingWidth,
  kContextWidth,
  kNonFiniteFeature,
  kTooFewImpressions,
  kDuplicatePosition,
  kDuplicateListing,
  kUnorderedSearches,
  kJourneyWindow,
  kMultipleUncListings,
};

std::string_view to_string(Violation v);

/// Violations of the per-impression label implications, in a fixed order.
std::vector<Violation> label_violations(const LabelVector& labels);

struct ValidationReport {
  std::map<Violation, std::size_t> counts;
  std::size_t journeys = 0;
  std::size_t searches = 0;
  std::size_t impressions = 0;

  std::size_t total() const;
  bool accepted() const { return total() == 0; }
  std::size_t count(Violation v) const;
};

/// Checks every record against the label implications, schema widths,
/// position/listing uniqueness and the journey window.
ValidationReport validate_dataset(const Dataset& dataset);

/// Propagates outcomes recorded on the search where they happened to every
/// impression of the same listing in the journey.
///
/// A positive milestone reached on listing L at its latest occurrence s
/// labels every impression of L in searches at or before s. Impressions of L
/// shown after L was booked or rejected are dropped (searches left with
/// fewer than two impressions go too), after which rej/cbh/cbg label every
/// remaining impression of L. Throws ValidationError when a raw impression
/// breaks a label implication. Idempotent.
JourneyRecord attribute_labels(const JourneyRecord& journey);
Dataset attribute_labels(const Dataset& dataset);

struct FilterResult {
  Dataset dataset;
  std::size_t searches_before = 0;
  std::size_t searches_after = 0;
  std::vector<std::string> warnings;

  double retained_fraction() const {
    return searches_before == 0 ? 0.0 : static_cast<double>(searches_after) / static_cast<double>(searches_before);
  }
};

/// Keeps the journeys with at least one impression labeled `required`
/// (payment page by default), whole.
FilterResult filter_training_searches(const Dataset& dataset, Milestone required = Milestone::pp);

/// Raised when a task weight has no positive impressions to normalize by.
class UndefinedWeightError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Fraction of `task`-labeled impressions that are also unc-labeled.
double empirical_task_weight(const Dataset& dataset, Milestone task);

/// Number of impressions carrying each milestone.
std::map<Milestone, std::size_t> milestone_counts(const Dataset& dataset);

}  // namespace funnelrank::journey
