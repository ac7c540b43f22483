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
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "funnelrank/journey/records.hpp"
#include "funnelrank/model/ranker.hpp"
#include "funnelrank/sim/generator.hpp"

namespace funnelrank::eval {

using journey::Milestone;

struct LabelNdcg {
  double mean = 0.0;
  std::size_t searches = 0;  // searches with at least one positive
  std::size_t skipped = 0;   // searches without a positive
};

/// NDCG on one dataset: `overall` uses unc as the relevant label; every
/// positive-chain milestone is reported as well.
struct EvalReport {
  LabelNdcg overall;
  std::map<Milestone, LabelNdcg> per_milestone;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Scores for the impressions of every search of a dataset, in dataset order.
using ScoreTable = std::vector<std::vector<double>>;

/// NDCG of the rankings induced by `scores` (descending, ties by listing id).
EvalReport evaluate_scores(const journey::Dataset& dataset, const ScoreTable& scores);

/// Model scores for every search (combination score when present, base
/// score otherwise). Runs in chunks of whole searches.
ScoreTable model_scores(const model::MilestoneRanker& model, const journey::Dataset& dataset);

/// Refuses a dataset whose schema hash differs from the model's.
EvalReport evaluate(const model::MilestoneRanker& model, const journey::Dataset& dataset);

// Reference scorers.
ScoreTable oracle_scores(const sim::WorldTruth& world, const journey::Dataset& dataset);
ScoreTable reversed_scores(const ScoreTable& scores);
ScoreTable random_scores(const journey::Dataset& dataset, std::uint64_t seed);

}  // namespace funnelrank::eval
