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

#include "funnelrank/eval/evaluate.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "funnelrank/eval/ndcg.hpp"
#include "funnelrank/model/manifest.hpp"
#include "funnelrank/util/hash.hpp"

namespace funnelrank::eval {

namespace {

constexpr std::size_t kChunkSearches = 512;

nlohmann::json label_json(const LabelNdcg& l) {
  return {{"ndcg", l.mean}, {"searches", l.searches}, {"skipped", l.skipped}};
}

}  // namespace

nlohmann::json EvalReport::to_json() const {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [m, l] : per_milestone) per[std::string(journey::to_string(m))] = label_json(l);
  return {{"overall", label_json(overall)}, {"per_milestone", per}};
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out << std::left << std::setw(10) << "label" << std::right << std::setw(10) << "ndcg" << std::setw(10)
      << "searches" << std::setw(10) << "skipped" << '\n';
  auto row = [&out](const std::string& name, const LabelNdcg& l) {
    out << std::left << std::setw(10) << name << std::right << std::fixed << std::setprecision(6) << std::setw(10)
        << l.mean << std::setw(10) << l.searches << std::setw(10) << l.skipped << '\n';
  };
  row("overall", overall);
  for (const auto& [m, l] : per_milestone) row(std::string(journey::to_string(m)), l);
  return out.str();
}

EvalReport evaluate_scores(const journey::Dataset& dataset, const ScoreTable& scores) {
  if (scores.size() != dataset.search_count()) throw nn::ContractError("evaluate: one score list per search required");
  std::map<Milestone, double> sums;
  EvalReport report;
  for (Milestone m : journey::kPositiveChain) {
    report.per_milestone[m] = {};
    sums[m] = 0.0;
  }
  std::size_t s = 0;
  for (const auto& j : dataset.journeys)
    for (const auto& search : j.searches) {
      const auto& sc = scores[s++];
      if (sc.size() != search.impressions.size()) throw nn::ContractError("evaluate: score count mismatch");
      std::vector<ListingId> ids;
      for (const auto& imp : search.impressions) ids.push_back(imp.listing_id);
      const Eigen::Map<const Eigen::VectorXd> v(sc.data(), static_cast<Eigen::Index>(sc.size()));
      std::vector<ListingId> ranked;
      for (std::size_t i : model::rank_order(v, ids)) ranked.push_back(ids[i]);
      for (Milestone m : journey::kPositiveChain) {
        std::unordered_set<ListingId> positives;
        for (const auto& imp : search.impressions) {
          if (imp.labels[m]) positives.insert(imp.listing_id);
        }
        const auto value = ndcg_binary(ranked, positives);
        auto& l = report.per_milestone[m];
        if (!value) {
          ++l.skipped;
          continue;
        }
        sums[m] += *value;
        ++l.searches;
      }
    }
  for (auto& [m, l] : report.per_milestone) l.mean = l.searches ? sums[m] / static_cast<double>(l.searches) : 0.0;
  report.overall = report.per_milestone.at(Milestone::unc);
  return report;
}

ScoreTable model_scores(const model::MilestoneRanker& model, const journey::Dataset& dataset) {
  const model::FlatData data = model::flatten(dataset, model.normalizer());
  ScoreTable out;
  out.reserve(data.all.spans.size());
  const std::size_t n = data.all.spans.size();
  std::vector<nn::Index> idx;
  for (std::size_t start = 0; start < n; start += kChunkSearches) {
    idx.resize(std::min(kChunkSearches, n - start));
    std::iota(idx.begin(), idx.end(), static_cast<nn::Index>(start));
    const model::Batch batch = model::make_batch(data, idx);
    const auto outputs = model.predict(batch);
    const Eigen::VectorXd& score = outputs.final_score();
    for (const auto& span : batch.spans) {
      out.emplace_back(score.data() + span.begin, score.data() + span.begin + span.size);
    }
  }
  return out;
}

EvalReport evaluate(const model::MilestoneRanker& model, const journey::Dataset& dataset) {
  model::require_schema(model, dataset.schema);
  return evaluate_scores(dataset, model_scores(model, dataset));
}

ScoreTable oracle_scores(const sim::WorldTruth& world, const journey::Dataset& dataset) {
  ScoreTable out;
  for (const auto& j : dataset.journeys)
    for (const auto& search : j.searches) {
      std::vector<double> sc;
      for (const auto& imp : search.impressions) {
        sc.push_back(world.unc_probability(world.listing_features(imp.listing_id), search.context));
      }
      out.push_back(std::move(sc));
    }
  return out;
}

ScoreTable reversed_scores(const ScoreTable& scores) {
  ScoreTable out = scores;
  for (auto& sc : out)
    for (auto& v : sc) v = -v;
  return out;
}

ScoreTable random_scores(const journey::Dataset& dataset, std::uint64_t seed) {
  std::mt19937_64 rng(util::derive_seed(seed, "random-scores"));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScoreTable out;
  for (const auto& j : dataset.journeys)
    for (const auto& search : j.searches) {
      std::vector<double> sc(search.impressions.size());
      for (auto& v : sc) v = u(rng);
      out.push_back(std::move(sc));
    }
  return out;
}

}  // namespace funnelrank::eval
