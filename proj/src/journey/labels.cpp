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

#include "funnelrank/journey/labels.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace funnelrank::journey {

std::string_view to_string(Violation v) {
  switch (v) {
    case Violation::kMissingImpression: return "impression label missing";
    case Violation::kFunnelConsistency: return "funnel consistency";
    case Violation::kRejectionImplication: return "rej requires req and excludes book";
    case Violation::kCancellationImplication: return "cancellation requires book";
    case Violation::kUncExcludesNegatives: return "unc excludes cancellations";
    case Violation::kListingWidth: return "listing feature width";
    case Violation::kContextWidth: return "context feature width";
    case Violation::kNonFiniteFeature: return "non-finite feature";
    case Violation::kTooFewImpressions: return "fewer than two impressions";
    case Violation::kDuplicatePosition: return "duplicate position";
    case Violation::kDuplicateListing: return "duplicate listing in search";
    case Violation::kUnorderedSearches: return "searches out of time order";
    case Violation::kJourneyWindow: return "journey window exceeded";
    case Violation::kMultipleUncListings: return "more than one unc listing";
  }
  return "unknown";
}

std::vector<Violation> label_violations(const LabelVector& labels) {
  std::vector<Violation> out;
  if (!labels[Milestone::imp]) out.push_back(Violation::kMissingImpression);
  for (std::size_t k = 1; k < kPositiveChain.size(); ++k) {
    if (labels[kPositiveChain[k]] && !labels[kPositiveChain[k - 1]]) {
      out.push_back(Violation::kFunnelConsistency);
      break;
    }
  }
  if (labels[Milestone::rej] && (!labels[Milestone::req] || labels[Milestone::book])) {
    out.push_back(Violation::kRejectionImplication);
  }
  if ((labels[Milestone::cbh] || labels[Milestone::cbg]) && !labels[Milestone::book]) {
    out.push_back(Violation::kCancellationImplication);
  }
  if (labels[Milestone::unc] && labels.any_negative()) out.push_back(Violation::kUncExcludesNegatives);
  return out;
}

std::size_t ValidationReport::total() const {
  std::size_t n = 0;
  for (const auto& [_, c] : counts) n += c;
  return n;
}

std::size_t ValidationReport::count(Violation v) const {
  auto it = counts.find(v);
  return it == counts.end() ? 0 : it->second;
}

ValidationReport validate_dataset(const Dataset& dataset) {
  ValidationReport report;
  auto bump = [&report](Violation v) { ++report.counts[v]; };
  const auto& schema = dataset.schema;
  for (const auto& journey : dataset.journeys) {
    ++report.journeys;
    std::set<ListingId> unc_listings;
    for (std::size_t s = 0; s < journey.searches.size(); ++s) {
      const auto& search = journey.searches[s];
      ++report.searches;
      if (s > 0 && search.t_days < journey.searches[s - 1].t_days) bump(Violation::kUnorderedSearches);
      if (search.context.size() != schema.context_dim) bump(Violation::kContextWidth);
      if (!search.context.allFinite()) bump(Violation::kNonFiniteFeature);
      if (search.impressions.size() < 2) bump(Violation::kTooFewImpressions);
      std::unordered_set<int> positions;
      std::unordered_set<ListingId> listings;
      for (const auto& imp : search.impressions) {
        ++report.impressions;
        if (!positions.insert(imp.position).second || imp.position < 1) bump(Violation::kDuplicatePosition);
        if (!listings.insert(imp.listing_id).second) bump(Violation::kDuplicateListing);
        if (imp.features.size() != schema.listing_dim) bump(Violation::kListingWidth);
        if (!imp.features.allFinite()) bump(Violation::kNonFiniteFeature);
        for (Violation v : label_violations(imp.labels)) bump(v);
        if (imp.labels[Milestone::unc]) unc_listings.insert(imp.listing_id);
      }
    }
    if (!journey.searches.empty() &&
        journey.searches.back().t_days - journey.searches.front().t_days > schema.window_days) {
      bump(Violation::kJourneyWindow);
    }
    if (unc_listings.size() > 1) bump(Violation::kMultipleUncListings);
  }
  return report;
}

JourneyRecord attribute_labels(const JourneyRecord& journey) {
  const std::size_t n_searches = journey.searches.size();
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

  // Raw labels must already be consistent impression by impression.
  for (const auto& search : journey.searches) {
    for (const auto& imp : search.impressions) {
      const auto bad = label_violations(imp.labels);
      if (!bad.empty()) {
        std::ostringstream msg;
        msg << "journey " << journey.guest_id << ", search " << search.search_id << ", listing "
            << imp.listing_id << ": " << to_string(bad.front());
        throw ValidationError(msg.str());
      }
    }
  }

  // Earliest search where the listing was booked or rejected.
  std::unordered_map<ListingId, std::size_t> terminal;
  for (std::size_t s = 0; s < n_searches; ++s) {
    for (const auto& imp : journey.searches[s].impressions) {
      if (imp.labels[Milestone::book] || imp.labels[Milestone::rej]) terminal.try_emplace(imp.listing_id, s);
    }
  }
  auto kept = [&terminal](ListingId id, std::size_t s) {
    auto it = terminal.find(id);
    return it == terminal.end() || s <= it->second;
  };

  struct ListingOutcome {
    std::array<std::size_t, kPositiveChain.size()> latest;
    LabelVector negatives;
    ListingOutcome() { latest.fill(kNone); }
  };
  std::unordered_map<ListingId, ListingOutcome> outcomes;
  for (std::size_t s = 0; s < n_searches; ++s) {
    for (const auto& imp : journey.searches[s].impressions) {
      if (!kept(imp.listing_id, s)) continue;
      auto& o = outcomes[imp.listing_id];
      for (std::size_t k = 0; k < kPositiveChain.size(); ++k) {
        if (imp.labels[kPositiveChain[k]]) o.latest[k] = s;
      }
      for (Milestone m : kNegativeMilestones) {
        if (imp.labels[m]) o.negatives.set(m);
      }
    }
  }

  JourneyRecord out;
  out.guest_id = journey.guest_id;
  for (std::size_t s = 0; s < n_searches; ++s) {
    const auto& search = journey.searches[s];
    SearchRecord copy;
    copy.search_id = search.search_id;
    copy.t_days = search.t_days;
    copy.context = search.context;
    for (const auto& imp : search.impressions) {
      if (!kept(imp.listing_id, s)) continue;
      const auto& o = outcomes.at(imp.listing_id);
      ImpressionRecord labeled = imp;
      for (std::size_t k = 0; k < kPositiveChain.size(); ++k) {
        if (o.latest[k] != kNone && s <= o.latest[k]) labeled.labels.set(kPositiveChain[k]);
      }
      labeled.labels.merge(o.negatives);
      copy.impressions.push_back(std::move(labeled));
    }
    if (copy.impressions.size() >= 2) out.searches.push_back(std::move(copy));
  }
  out.outcome = derive_outcome(out);
  return out;
}

Dataset attribute_labels(const Dataset& dataset) {
  Dataset out;
  out.schema = dataset.schema;
  out.journeys.reserve(dataset.journeys.size());
  for (const auto& j : dataset.journeys) out.journeys.push_back(attribute_labels(j));
  return out;
}

FilterResult filter_training_searches(const Dataset& dataset, Milestone required) {
  FilterResult result;
  result.dataset.schema = dataset.schema;
  result.searches_before = dataset.search_count();
  for (const auto& journey : dataset.journeys) {
    bool keep = false;
    for (const auto& s : journey.searches) {
      for (const auto& imp : s.impressions) keep = keep || imp.labels[required];
      if (keep) break;
    }
    if (keep) result.dataset.journeys.push_back(journey);
  }
  result.searches_after = result.dataset.search_count();
  if (result.dataset.journeys.empty()) {
    result.warnings.push_back("no journey contains a '" + std::string(to_string(required)) +
                              "' impression; filtered dataset is empty");
  }
  return result;
}

std::map<Milestone, std::size_t> milestone_counts(const Dataset& dataset) {
  std::map<Milestone, std::size_t> counts;
  for (Milestone m : kAllMilestones) counts[m] = 0;
  for (const auto& j : dataset.journeys)
    for (const auto& s : j.searches)
      for (const auto& imp : s.impressions)
        for (Milestone m : kAllMilestones) counts[m] += imp.labels[m] ? 1 : 0;
  return counts;
}

double empirical_task_weight(const Dataset& dataset, Milestone task) {
  if (!is_positive_chain(task)) {
    throw std::invalid_argument("task weight is defined for positive-chain milestones, got " +
                                std::string(to_string(task)));
  }
  std::size_t positives = 0;
  std::size_t converted = 0;
  for (const auto& j : dataset.journeys)
    for (const auto& s : j.searches)
      for (const auto& imp : s.impressions) {
        if (!imp.labels[task]) continue;
        ++positives;
        converted += imp.labels[Milestone::unc] ? 1 : 0;
      }
  if (positives == 0) {
    throw UndefinedWeightError("no impressions labeled '" + std::string(to_string(task)) + "'");
  }
  return static_cast<double>(converted) / static_cast<double>(positives);
}

}  // namespace funnelrank::journey
