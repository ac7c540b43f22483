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

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "funnelrank/journey/records.hpp"
#include "funnelrank/model/ranker.hpp"

namespace funnelrank::eval {

class NtcError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Per-bucket normalized twiddler coefficient alpha_t / alpha_base for one task.
struct NtcTaskCurve {
  journey::Milestone task = journey::Milestone::rej;
  std::vector<double> mean_ntc;    // signed; NaN for an empty bucket
  std::vector<double> magnitude;   // |mean_ntc|
  std::vector<double> normalized;  // mean_ntc / mean_ntc[0]; empty unless requested
};

struct NtcCurve {
  std::string feature;
  std::vector<double> edges;  // n_buckets + 1, strictly increasing
  std::vector<std::size_t> counts;
  std::vector<NtcTaskCurve> tasks;
  std::vector<std::string> warnings;

  std::size_t buckets() const { return counts.size(); }
  const NtcTaskCurve& task(journey::Milestone m) const;

  nlohmann::json to_json() const;
  std::string to_text() const;
  /// feature,bucket,lower,upper,count,task,mean_ntc,magnitude,normalized
  std::string to_csv() const;
};

/// Buckets every search context of `dataset` by the raw value of `feature`
/// (equal-width buckets over the observed range) and averages the NTC of each
/// twiddler task per bucket. "num_prev_searches" is accepted for
/// num_previous_searches. A constant feature yields one bucket and a warning.
NtcCurve ntc_curves(const model::MilestoneRanker& model, const journey::Dataset& dataset, const std::string& feature,
                    int n_buckets, bool normalize = false);

}  // namespace funnelrank::eval
