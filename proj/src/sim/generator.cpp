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

#include "funnelrank/sim/generator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <thread>
#include <unordered_map>

#include "funnelrank/util/hash.hpp"

namespace funnelrank::sim {

using journey::Dataset;
using journey::ImpressionRecord;
using journey::JourneyRecord;
using journey::LabelVector;
using journey::ListingId;
using journey::SearchRecord;

namespace {

constexpr int kShardSize = 64;

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

void require(bool ok, const char* key, const std::string& what) {
  if (!ok) throw ConfigError(std::string(key) + ": " + what);
}

void check_coefficients(const std::map<Milestone, LogisticCoefficients>& coeffs, const char* key,
                        std::span<const Milestone> expected, int listing_dim, int context_dim) {
  for (Milestone m : expected) {
    auto it = coeffs.find(m);
    require(it != coeffs.end(), key, "missing entry for " + std::string(journey::to_string(m)));
    require(it->second.listing_weights.size() == listing_dim, key,
            std::string(journey::to_string(m)) + ".listing_weights must have listing_feature_dim entries");
    require(it->second.context_weights.size() == context_dim, key,
            std::string(journey::to_string(m)) + ".context_weights must have context_feature_dim entries");
    require(std::isfinite(it->second.bias) && it->second.listing_weights.allFinite() &&
                it->second.context_weights.allFinite(),
            key, "coefficients must be finite");
  }
  require(coeffs.size() == expected.size(), key, "unexpected milestone entry");
}

nlohmann::json coefficients_to_json(const std::map<Milestone, LogisticCoefficients>& coeffs) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [m, c] : coeffs) {
    j[std::string(journey::to_string(m))] = {
        {"listing_weights", std::vector<double>(c.listing_weights.data(), c.listing_weights.data() + c.listing_weights.size())},
        {"context_weights", std::vector<double>(c.context_weights.data(), c.context_weights.data() + c.context_weights.size())},
        {"bias", c.bias}};
  }
  return j;
}

std::map<Milestone, LogisticCoefficients> coefficients_from_json(const nlohmann::json& j, const char* key) {
  std::map<Milestone, LogisticCoefficients> out;
  for (const auto& [name, value] : j.items()) {
    const auto m = journey::parse_milestone(name);
    require(m.has_value(), key, "unknown milestone '" + name + "'");
    LogisticCoefficients c;
    const auto lw = value.at("listing_weights").get<std::vector<double>>();
    const auto cw = value.at("context_weights").get<std::vector<double>>();
    c.listing_weights = Eigen::Map<const Eigen::VectorXd>(lw.data(), static_cast<Eigen::Index>(lw.size()));
    c.context_weights = Eigen::Map<const Eigen::VectorXd>(cw.data(), static_cast<Eigen::Index>(cw.size()));
    c.bias = value.at("bias").get<double>();
    out[*m] = std::move(c);
  }
  return out;
}

}  // namespace

void GeneratorConfig::validate() const {
  require(n_guests > 0, "n_guests", "must be positive");
  require(listings_per_search >= 2, "listings_per_search", "must be at least 2 (a ranking needs a comparison)");
  require(max_searches_per_journey > 0, "max_searches_per_journey", "must be positive");
  require(listing_feature_dim > 0, "listing_feature_dim", "must be positive");
  require(context_feature_dim >= 2, "context_feature_dim",
          "must be at least 2 (days_ahead and num_previous_searches)");
  require(market_pool_size >= listings_per_search, "market_pool_size", "must be at least listings_per_search");
  require(catalog_size >= market_pool_size, "catalog_size", "must be at least market_pool_size");
  require(window_days > 0 && std::isfinite(window_days), "window_days", "must be positive");
  require(max_days_ahead > 0 && std::isfinite(max_days_ahead), "max_days_ahead", "must be positive");
  require(mean_search_gap_days > 0 && std::isfinite(mean_search_gap_days), "mean_search_gap_days",
          "must be positive");
  require(abandon_probability >= 0 && abandon_probability <= 1, "abandon_probability", "must be in [0, 1]");
  require(std::isfinite(ctr_negative_coupling) && ctr_negative_coupling >= 0, "ctr_negative_coupling",
          "must be finite and non-negative");
  require(std::isfinite(days_ahead_ushape_strength) && days_ahead_ushape_strength >= 0,
          "days_ahead_ushape_strength", "must be finite and non-negative");
  require(std::isfinite(late_journey_negative_coupling) && late_journey_negative_coupling >= 0,
          "late_journey_negative_coupling", "must be finite and non-negative");
  check_coefficients(stage_coefficients, "stage_coefficients", journey::kPositiveChain, listing_feature_dim,
                     context_feature_dim);
  check_coefficients(negative_coefficients, "negative_coefficients", journey::kNegativeMilestones,
                     listing_feature_dim, context_feature_dim);
}

namespace {
constexpr double kQualitySharing = 0.6;

// Features are stored on a 1e-4 grid so datasets serialize compactly and exactly.
double quantize(double x) { return std::round(x * 1e4) / 1e4; }

constexpr double kWeightScale = 2.5;
}  // namespace

void fill_default_coefficients(GeneratorConfig& config) {
  std::mt19937_64 rng(util::derive_seed(config.seed, "coefficients"));
  std::normal_distribution<double> normal(0.0, 1.0);
  const int d = config.listing_feature_dim;
  const int dc = config.context_feature_dim;

  auto random_unit = [&](int n) {
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = normal(rng);
    return Eigen::VectorXd(v / v.norm());
  };
  auto random_context = [&] {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dc);
    for (int i = 2; i < dc; ++i) v[i] = 0.3 * normal(rng);
    return v;
  };

  // Every stage shares one latent quality direction, so early milestones
  // carry signal about late ones without being identical to them.
  const Eigen::VectorXd shared = random_unit(d);
  auto stage_direction = [&] {
    Eigen::VectorXd v = random_unit(d);
    v -= shared * shared.dot(v);
    const double n = v.norm();
    if (n > 0.0) v /= n;
    return Eigen::VectorXd(kWeightScale * (kQualitySharing * shared + std::sqrt(1.0 - kQualitySharing * kQualitySharing) * v));
  };

  const std::array<double, 6> stage_bias = {-3.0, 0.0, -0.5, -0.3, 1.5, 3.5};
  Eigen::MatrixXd positive(d, 6);
  config.stage_coefficients.clear();
  for (std::size_t k = 0; k < journey::kPositiveChain.size(); ++k) {
    LogisticCoefficients c;
    c.listing_weights = stage_direction();
    c.context_weights = random_context();
    c.bias = stage_bias[k];
    positive.col(static_cast<Eigen::Index>(k)) = c.listing_weights;
    config.stage_coefficients[journey::kPositiveChain[k]] = std::move(c);
  }

  Eigen::MatrixXd basis;
  if (d > 6) basis = Eigen::HouseholderQR<Eigen::MatrixXd>(positive).householderQ() * Eigen::MatrixXd::Identity(d, 6);

  const std::array<double, 3> negative_bias = {-2.8, -3.0, -3.3};
  config.negative_coefficients.clear();
  for (std::size_t k = 0; k < journey::kNegativeMilestones.size(); ++k) {
    LogisticCoefficients c;
    Eigen::VectorXd v = random_unit(d);
    if (basis.size() != 0) v -= basis * (basis.transpose() * v);
    c.listing_weights = kWeightScale * v / v.norm();
    c.context_weights = random_context();
    c.bias = negative_bias[k];
    config.negative_coefficients[journey::kNegativeMilestones[k]] = std::move(c);
  }
}

GeneratorConfig default_generator_config(std::uint64_t seed) {
  GeneratorConfig c;
  c.seed = seed;
  fill_default_coefficients(c);
  return c;
}

nlohmann::json config_to_json(const GeneratorConfig& c) {
  return {{"n_guests", c.n_guests},
          {"listings_per_search", c.listings_per_search},
          {"max_searches_per_journey", c.max_searches_per_journey},
          {"listing_feature_dim", c.listing_feature_dim},
          {"context_feature_dim", c.context_feature_dim},
          {"catalog_size", c.catalog_size},
          {"market_pool_size", c.market_pool_size},
          {"window_days", c.window_days},
          {"max_days_ahead", c.max_days_ahead},
          {"mean_search_gap_days", c.mean_search_gap_days},
          {"abandon_probability", c.abandon_probability},
          {"stage_coefficients", coefficients_to_json(c.stage_coefficients)},
          {"negative_coefficients", coefficients_to_json(c.negative_coefficients)},
          {"ctr_negative_coupling", c.ctr_negative_coupling},
          {"days_ahead_ushape_strength", c.days_ahead_ushape_strength},
          {"late_journey_negative_coupling", c.late_journey_negative_coupling},
          {"seed", c.seed}};
}

GeneratorConfig config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> kKeys = {
      "n_guests",           "listings_per_search",   "max_searches_per_journey", "listing_feature_dim",
      "context_feature_dim", "catalog_size",         "market_pool_size",         "window_days",
      "max_days_ahead",     "mean_search_gap_days",  "abandon_probability",      "stage_coefficients",
      "negative_coefficients", "ctr_negative_coupling", "days_ahead_ushape_strength",
      "late_journey_negative_coupling", "seed"};
  if (!j.is_object()) throw ConfigError("generator config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (kKeys.count(key) == 0) throw ConfigError(key + ": unknown key");
  }
  GeneratorConfig c;
  auto read = [&j](const char* key, auto& field) {
    if (!j.contains(key)) return;
    try {
      field = j.at(key).get<std::decay_t<decltype(field)>>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(std::string(key) + ": wrong type");
    }
  };
  read("n_guests", c.n_guests);
  read("listings_per_search", c.listings_per_search);
  read("max_searches_per_journey", c.max_searches_per_journey);
  read("listing_feature_dim", c.listing_feature_dim);
  read("context_feature_dim", c.context_feature_dim);
  read("catalog_size", c.catalog_size);
  read("market_pool_size", c.market_pool_size);
  read("window_days", c.window_days);
  read("max_days_ahead", c.max_days_ahead);
  read("mean_search_gap_days", c.mean_search_gap_days);
  read("abandon_probability", c.abandon_probability);
  read("ctr_negative_coupling", c.ctr_negative_coupling);
  read("days_ahead_ushape_strength", c.days_ahead_ushape_strength);
  read("late_journey_negative_coupling", c.late_journey_negative_coupling);
  read("seed", c.seed);
  if (c.listing_feature_dim <= 0) throw ConfigError("listing_feature_dim: must be positive");
  if (c.context_feature_dim < 2) {
    throw ConfigError("context_feature_dim: must be at least 2 (days_ahead and num_previous_searches)");
  }
  const bool has_stage = j.contains("stage_coefficients");
  const bool has_negative = j.contains("negative_coefficients");
  if (!has_stage || !has_negative) fill_default_coefficients(c);
  try {
    if (has_stage) c.stage_coefficients = coefficients_from_json(j.at("stage_coefficients"), "stage_coefficients");
    if (has_negative) {
      c.negative_coefficients = coefficients_from_json(j.at("negative_coefficients"), "negative_coefficients");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("coefficients: ") + e.what());
  }
  c.validate();
  return c;
}

// --- WorldTruth --------------------------------------------------------------

WorldTruth::WorldTruth(GeneratorConfig config, Eigen::MatrixXd catalog)
    : config_(std::move(config)), catalog_(std::move(catalog)) {}

Eigen::VectorXd WorldTruth::listing_features(ListingId id) const {
  if (id == 0 || id > static_cast<ListingId>(catalog_.rows())) {
    throw std::out_of_range("listing id " + std::to_string(id) + " not in catalog");
  }
  return catalog_.row(static_cast<Eigen::Index>(id - 1)).transpose();
}

Eigen::VectorXd WorldTruth::standardize_context(const Eigen::VectorXd& context) const {
  Eigen::VectorXd z = context;
  z[0] = std::clamp(2.0 * context[0] / config_.max_days_ahead - 1.0, -1.0, 1.0);
  const int m = config_.max_searches_per_journey;
  z[1] = m > 1 ? std::clamp(2.0 * context[1] / (m - 1) - 1.0, -1.0, 1.0) : 0.0;
  return z;
}

double WorldTruth::stage_logit(Milestone m, const Eigen::VectorXd& x, const Eigen::VectorXd& context) const {
  return config_.stage_coefficients.at(m).logit(x, standardize_context(context));
}

double WorldTruth::negative_logit(Milestone m, const Eigen::VectorXd& x, const Eigen::VectorXd& context) const {
  const Eigen::VectorXd z = standardize_context(context);
  double logit = config_.negative_coefficients.at(m).logit(x, z);
  logit += config_.ctr_negative_coupling * config_.stage_coefficients.at(Milestone::c).listing_weights.dot(x);
  // Host-side outcomes are riskiest for imminent and far-out trips; guest
  // cancellations rise with lead time.
  const double lead = z[0];
  if (m == Milestone::cbg) {
    logit += config_.days_ahead_ushape_strength * lead;
  } else {
    logit += config_.days_ahead_ushape_strength * (lead * lead - 1.0 / 3.0);
  }
  logit += config_.late_journey_negative_coupling * z[1];
  return logit;
}

TrueProbabilities WorldTruth::probabilities(const Eigen::VectorXd& x, const Eigen::VectorXd& context) const {
  TrueProbabilities p;
  const Eigen::VectorXd z = standardize_context(context);
  std::array<double, 6> stage{};
  for (std::size_t k = 0; k < 6; ++k) {
    stage[k] = sigmoid(config_.stage_coefficients.at(journey::kPositiveChain[k]).logit(x, z));
  }
  p.rej_given_req = sigmoid(negative_logit(Milestone::rej, x, context));
  const double cbh = sigmoid(negative_logit(Milestone::cbh, x, context));
  const double cbg = sigmoid(negative_logit(Milestone::cbg, x, context));
  p.cbh_given_book = cbh;
  p.cbg_given_book = (1.0 - cbh) * (1.0 - (1.0 - cbg) * stage[5]);
  p.conditional = {stage[0], stage[1], stage[2], stage[3], (1.0 - p.rej_given_req) * stage[4],
                   (1.0 - cbh) * (1.0 - cbg) * stage[5]};
  double joint = 1.0;
  for (std::size_t k = 0; k < 6; ++k) {
    joint *= p.conditional[k];
    p.joint[k] = joint;
  }
  return p;
}

nlohmann::json WorldTruth::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < catalog_.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(catalog_.cols()));
    for (Eigen::Index k = 0; k < catalog_.cols(); ++k) r[static_cast<std::size_t>(k)] = catalog_(i, k);
    rows.push_back(r);
  }
  return {{"config", config_to_json(config_)}, {"catalog", rows}};
}

WorldTruth WorldTruth::from_json(const nlohmann::json& j) {
  GeneratorConfig config = config_from_json(j.at("config"));
  const auto& rows = j.at("catalog");
  Eigen::MatrixXd catalog(static_cast<Eigen::Index>(rows.size()), config.listing_feature_dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i].get<std::vector<double>>();
    if (static_cast<int>(r.size()) != config.listing_feature_dim) throw ConfigError("catalog: row width mismatch");
    for (std::size_t k = 0; k < r.size(); ++k) catalog(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = r[k];
  }
  return WorldTruth(std::move(config), std::move(catalog));
}

// --- generation ----------------------------------------------------------------

namespace {

struct Sampler {
  const WorldTruth& world;
  std::mt19937_64& rng;
  std::uniform_real_distribution<double> unit{0.0, 1.0};

  bool draw(double p) { return unit(rng) < p; }
  bool draw_logit(double logit) { return draw(sigmoid(logit)); }
};

JourneyRecord simulate_journey(const WorldTruth& world, std::uint64_t guest_id, std::mt19937_64& rng) {
  const GeneratorConfig& cfg = world.config();
  Sampler sample{world, rng};
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> gap(1.0 / cfg.mean_search_gap_days);

  // Market: a fixed pool of candidate listings for this guest's trip.
  std::vector<ListingId> catalog_ids(static_cast<std::size_t>(cfg.catalog_size));
  std::iota(catalog_ids.begin(), catalog_ids.end(), ListingId{1});
  for (int i = 0; i < cfg.market_pool_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(i), catalog_ids.size() - 1);
    std::swap(catalog_ids[static_cast<std::size_t>(i)], catalog_ids[pick(rng)]);
  }
  std::vector<ListingId> pool(catalog_ids.begin(), catalog_ids.begin() + cfg.market_pool_size);

  const double t0 = std::floor(sample.unit(rng) * 365.0 * 100.0) / 100.0;
  const double checkin = std::floor(sample.unit(rng) * (cfg.max_days_ahead + 1.0));
  Eigen::VectorXd extras(cfg.context_feature_dim - 2);
  for (Eigen::Index i = 0; i < extras.size(); ++i) extras[i] = quantize(normal(rng));

  JourneyRecord journey;
  journey.guest_id = guest_id;
  std::set<ListingId> rejected;
  double t = t0;
  for (int s = 0; s < cfg.max_searches_per_journey; ++s) {
    if (t - t0 > cfg.window_days) break;
    std::vector<ListingId> available;
    for (ListingId id : pool) {
      if (rejected.count(id) == 0) available.push_back(id);
    }
    if (available.size() < 2) break;
    const std::size_t shown = std::min(available.size(), static_cast<std::size_t>(cfg.listings_per_search));
    for (std::size_t i = 0; i < shown; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, available.size() - 1);
      std::swap(available[i], available[pick(rng)]);
    }

    SearchRecord search;
    search.search_id = guest_id * 1000 + static_cast<std::uint64_t>(s);
    search.t_days = t;
    search.context.resize(cfg.context_feature_dim);
    search.context[0] = std::max(0.0, checkin - std::floor(t - t0));
    search.context[1] = s;
    search.context.tail(extras.size()) = extras;

    bool booked = false;
    for (std::size_t i = 0; i < shown; ++i) {
      ImpressionRecord imp;
      imp.listing_id = available[i];
      imp.position = static_cast<int>(i) + 1;
      imp.features = world.listing_features(imp.listing_id);
      const auto& x = imp.features;
      const auto& ctx = search.context;
      LabelVector& y = imp.labels;
      if (sample.draw_logit(world.stage_logit(Milestone::c, x, ctx))) {
        y.set(Milestone::c);
        if (sample.draw_logit(world.stage_logit(Milestone::lc, x, ctx))) {
          y.set(Milestone::lc);
          if (sample.draw_logit(world.stage_logit(Milestone::pp, x, ctx))) {
            y.set(Milestone::pp);
            // One booking per journey: no further requests once a listing is booked.
            if (!booked && sample.draw_logit(world.stage_logit(Milestone::req, x, ctx))) {
              y.set(Milestone::req);
              if (sample.draw_logit(world.negative_logit(Milestone::rej, x, ctx))) {
                y.set(Milestone::rej);
                rejected.insert(imp.listing_id);
              } else if (sample.draw_logit(world.stage_logit(Milestone::book, x, ctx))) {
                y.set(Milestone::book);
                booked = true;
                if (sample.draw_logit(world.negative_logit(Milestone::cbh, x, ctx))) {
                  y.set(Milestone::cbh);
                } else if (sample.draw_logit(world.negative_logit(Milestone::cbg, x, ctx)) ||
                           !sample.draw_logit(world.stage_logit(Milestone::unc, x, ctx))) {
                  y.set(Milestone::cbg);
                } else {
                  y.set(Milestone::unc);
                }
              }
            }
          }
        }
      }
      search.impressions.push_back(std::move(imp));
    }
    journey.searches.push_back(std::move(search));
    if (booked || sample.draw(cfg.abandon_probability)) break;
    t += gap(rng);
  }
  return journey::attribute_labels(journey);
}

}  // namespace

GeneratedData generate(const GeneratorConfig& config, int jobs) {
  config.validate();
  std::mt19937_64 catalog_rng(util::derive_seed(config.seed, "catalog"));
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd catalog(config.catalog_size, config.listing_feature_dim);
  for (int i = 0; i < config.catalog_size; ++i)
    for (int k = 0; k < config.listing_feature_dim; ++k) catalog(i, k) = quantize(normal(catalog_rng));

  GeneratedData out;
  out.world = WorldTruth(config, std::move(catalog));
  out.dataset.schema.listing_dim = config.listing_feature_dim;
  out.dataset.schema.context_dim = config.context_feature_dim;
  out.dataset.schema.context_names = {journey::kDaysAheadFeature, journey::kNumPreviousSearchesFeature};
  for (int i = 2; i < config.context_feature_dim; ++i) {
    out.dataset.schema.context_names.push_back("context_" + std::to_string(i));
  }
  out.dataset.schema.window_days = config.window_days;

  const int n_shards = (config.n_guests + kShardSize - 1) / kShardSize;
  std::vector<std::vector<JourneyRecord>> shards(static_cast<std::size_t>(n_shards));
  auto run_shard = [&](int shard) {
    std::mt19937_64 rng(util::derive_seed(config.seed, static_cast<std::uint64_t>(shard)));
    const int begin = shard * kShardSize;
    const int end = std::min(config.n_guests, begin + kShardSize);
    auto& sink = shards[static_cast<std::size_t>(shard)];
    for (int g = begin; g < end; ++g) {
      auto j = simulate_journey(out.world, static_cast<std::uint64_t>(g) + 1, rng);
      if (!j.searches.empty()) sink.push_back(std::move(j));
    }
  };
  jobs = std::max(1, std::min(jobs, n_shards));
  if (jobs == 1) {
    for (int s = 0; s < n_shards; ++s) run_shard(s);
  } else {
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&, w] {
        for (int s = w; s < n_shards; s += jobs) run_shard(s);
      });
    }
    for (auto& t : workers) t.join();
  }
  for (auto& shard : shards) {
    for (auto& j : shard) out.dataset.journeys.push_back(std::move(j));
  }
  return out;
}

std::vector<ListingId> true_ranking(const WorldTruth& world, const Eigen::VectorXd& context,
                                    std::span<const ListingId> listings) {
  std::vector<std::pair<double, ListingId>> scored;
  scored.reserve(listings.size());
  for (ListingId id : listings) scored.emplace_back(world.unc_probability(world.listing_features(id), context), id);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<ListingId> out;
  out.reserve(scored.size());
  for (const auto& [_, id] : scored) out.push_back(id);
  return out;
}

nlohmann::json FunnelReport::to_json() const {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [m, n] : milestone_counts) counts[std::string(journey::to_string(m))] = n;
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [len, n] : searches_per_journey) hist[std::to_string(len)] = n;
  nlohmann::json outs = nlohmann::json::object();
  for (const auto& [o, n] : outcomes) outs[std::string(journey::to_string(o))] = n;
  return {{"journeys", journeys},
          {"searches", searches},
          {"impressions", impressions},
          {"milestone_counts", counts},
          {"searches_per_journey", hist},
          {"outcomes", outs},
          {"pp_retained_fraction", pp_retained_fraction}};
}

FunnelReport summarize(const Dataset& dataset) {
  FunnelReport r;
  r.journeys = dataset.journeys.size();
  r.searches = dataset.search_count();
  r.impressions = dataset.impression_count();
  r.milestone_counts = journey::milestone_counts(dataset);
  for (const auto& j : dataset.journeys) {
    ++r.searches_per_journey[j.searches.size()];
    ++r.outcomes[j.outcome];
  }
  if (r.searches > 0) r.pp_retained_fraction = journey::filter_training_searches(dataset).retained_fraction();
  return r;
}

double ctr_rejection_correlation(const Dataset& dataset) {
  std::unordered_map<ListingId, std::pair<std::size_t, std::size_t>> clicks;  // (impressions, clicks)
  for (const auto& j : dataset.journeys)
    for (const auto& s : j.searches)
      for (const auto& imp : s.impressions) {
        auto& c = clicks[imp.listing_id];
        ++c.first;
        c.second += imp.labels[Milestone::c] ? 1 : 0;
      }
  std::vector<double> ctr;
  std::vector<double> rej;
  for (const auto& j : dataset.journeys)
    for (const auto& s : j.searches)
      for (const auto& imp : s.impressions) {
        if (!imp.labels[Milestone::req]) continue;
        const auto& c = clicks.at(imp.listing_id);
        ctr.push_back(static_cast<double>(c.second) / static_cast<double>(c.first));
        rej.push_back(imp.labels[Milestone::rej] ? 1.0 : 0.0);
      }
  if (ctr.size() < 2) return 0.0;
  const Eigen::Map<const Eigen::VectorXd> a(ctr.data(), static_cast<Eigen::Index>(ctr.size()));
  const Eigen::Map<const Eigen::VectorXd> b(rej.data(), static_cast<Eigen::Index>(rej.size()));
  const Eigen::VectorXd da = a.array() - a.mean();
  const Eigen::VectorXd db = b.array() - b.mean();
  const double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
  return denom > 0 ? da.dot(db) / denom : 0.0;
}

}  // namespace funnelrank::sim
