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

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "funnelrank/journey/labels.hpp"
#include "funnelrank/journey/records.hpp"

namespace funnelrank::sim {

using journey::Milestone;

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Logit = bias + listing_weights . x + context_weights . z, where z is the
/// standardized context (days ahead and search index mapped to [-1, 1],
/// remaining context dimensions standard normal).
struct LogisticCoefficients {
  Eigen::VectorXd listing_weights;
  Eigen::VectorXd context_weights;
  double bias = 0.0;

  double logit(const Eigen::VectorXd& x, const Eigen::VectorXd& z) const {
    return bias + listing_weights.dot(x) + context_weights.dot(z);
  }
};

/// Declarative description of a synthetic world.
///
/// Positive stages: c, lc|c, pp|lc, req|pp, book (acceptance of a request
/// that was not rejected) and unc (a booking that survives both
/// cancellation draws). Negative outcomes: rej among requests, cbh then cbg
/// among bookings. Negative logits additionally receive
///   ctr_negative_coupling * (click listing logit)
///   days_ahead_ushape_strength * U(days ahead)      rej, cbh (U-shaped), cbg (rising)
///   late_journey_negative_coupling * (search index in [-1, 1])
struct GeneratorConfig {
  int n_guests = 2000;
  int listings_per_search = 10;
  int max_searches_per_journey = 8;
  int listing_feature_dim = 12;
  int context_feature_dim = 4;
  int catalog_size = 400;
  int market_pool_size = 20;
  double window_days = 30.0;
  double max_days_ahead = 180.0;
  double mean_search_gap_days = 1.5;
  double abandon_probability = 0.2;
  std::map<Milestone, LogisticCoefficients> stage_coefficients;     // all six chain milestones
  std::map<Milestone, LogisticCoefficients> negative_coefficients;  // rej, cbh, cbg
  double ctr_negative_coupling = 0.0;
  double days_ahead_ushape_strength = 0.0;
  double late_journey_negative_coupling = 0.0;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the offending key.
  void validate() const;
};

/// Fills stage/negative coefficients drawn from `seed`. Stage weights mix a
/// shared latent quality direction with a stage-specific one. Negative-outcome
/// listing weights are orthogonal to the span of the positive-stage weights
/// whenever the listing width allows it, so negatives are independent of
/// click propensity unless coupled explicitly.
void fill_default_coefficients(GeneratorConfig& config);

/// Desk-scale defaults with coefficients filled in.
GeneratorConfig default_generator_config(std::uint64_t seed = 7);

nlohmann::json config_to_json(const GeneratorConfig& config);
/// Missing keys take defaults; missing coefficients are drawn from the seed.
/// Unknown keys raise ConfigError.
GeneratorConfig config_from_json(const nlohmann::json& j);

/// True per-impression probabilities for one listing in one context.
struct TrueProbabilities {
  std::array<double, 6> conditional{};  // P(m_k | m_{k-1}) along the chain
  std::array<double, 6> joint{};        // P(m_k) from an impression
  double rej_given_req = 0.0;
  double cbh_given_book = 0.0;
  double cbg_given_book = 0.0;
};

/// Ground truth behind a generated dataset.
class WorldTruth {
 public:
  WorldTruth() = default;
  WorldTruth(GeneratorConfig config, Eigen::MatrixXd catalog);

  const GeneratorConfig& config() const { return config_; }
  /// Row `id - 1` holds the features of listing `id`.
  const Eigen::MatrixXd& catalog() const { return catalog_; }
  Eigen::VectorXd listing_features(journey::ListingId id) const;

  /// Raw context [days_ahead, num_previous_searches, extras...] to the
  /// standardized vector the coefficients act on.
  Eigen::VectorXd standardize_context(const Eigen::VectorXd& context) const;

  double stage_logit(Milestone m, const Eigen::VectorXd& x, const Eigen::VectorXd& context) const;
  double negative_logit(Milestone m, const Eigen::VectorXd& x, const Eigen::VectorXd& context) const;
  TrueProbabilities probabilities(const Eigen::VectorXd& x, const Eigen::VectorXd& context) const;
  double unc_probability(const Eigen::VectorXd& x, const Eigen::VectorXd& context) const {
    return probabilities(x, context).joint[5];
  }

  nlohmann::json to_json() const;
  static WorldTruth from_json(const nlohmann::json& j);

 private:
  GeneratorConfig config_;
  Eigen::MatrixXd catalog_;
};

struct GeneratedData {
  journey::Dataset dataset;
  WorldTruth world;
};

/// Samples journeys for every guest. Guests are processed in fixed-size
/// shards, each with its own stream derived from (seed, shard index), so the
/// output is identical for any `jobs`.
GeneratedData generate(const GeneratorConfig& config, int jobs = 1);

/// Listing ids ordered by true P(unc) in `context`, descending; ties by id.
std::vector<journey::ListingId> true_ranking(const WorldTruth& world, const Eigen::VectorXd& context,
                                             std::span<const journey::ListingId> listings);

struct FunnelReport {
  std::size_t journeys = 0;
  std::size_t searches = 0;
  std::size_t impressions = 0;
  std::map<Milestone, std::size_t> milestone_counts;
  std::map<std::size_t, std::size_t> searches_per_journey;  // journey length -> journeys
  std::map<journey::JourneyOutcome, std::size_t> outcomes;
  double pp_retained_fraction = 0.0;

  nlohmann::json to_json() const;
};

FunnelReport summarize(const journey::Dataset& dataset);

/// Pearson correlation, over request impressions, between the listing's
/// click-through rate in `dataset` and the impression's rejection label.
double ctr_rejection_correlation(const journey::Dataset& dataset);

}  // namespace funnelrank::sim
