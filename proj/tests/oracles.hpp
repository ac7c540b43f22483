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

// Straight-line reference computations for the model losses and forward
// pass. Nothing here touches the tape; everything runs in long double.

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "funnelrank/model/losses.hpp"
#include "funnelrank/model/ranker.hpp"
#include "testing.hpp"

namespace funnelrank::testing {

using model::Milestone;

using Real = long double;

inline Real log_sigmoid_ref(Real x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }
inline Real softplus_ref(Real x) { return -log_sigmoid_ref(-x); }

/// Sum over searches and positives of -log softmax, times `weight`.
inline Real listwise_ref(const Eigen::VectorXd& scores, const std::vector<model::SearchSpan>& spans,
                         const std::vector<std::uint8_t>& positive, Real weight) {
  Real total = 0;
  for (const auto& span : spans) {
    Real z = 0;
    for (nn::Index i = 0; i < span.size; ++i) z += std::exp(static_cast<Real>(scores[span.begin + i]));
    for (nn::Index i = 0; i < span.size; ++i) {
      if (positive[static_cast<std::size_t>(span.begin + i)]) total += std::log(z) - scores[span.begin + i];
    }
  }
  return weight * total;
}

/// Mean BCE over eligible rows; 0 with none.
inline Real bce_ref(const Eigen::VectorXd& logits, const std::vector<std::uint8_t>& eligible,
                    const std::vector<std::uint8_t>& target) {
  Real total = 0;
  int n = 0;
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    if (!eligible[i]) continue;
    const Real x = logits[static_cast<nn::Index>(i)];
    total += target[i] ? softplus_ref(-x) : softplus_ref(x);
    ++n;
  }
  return n == 0 ? 0 : total / n;
}

/// Mean over all ordered within-search pairs with grade_i > grade_j.
inline Real pairwise_ref(const Eigen::VectorXd& scores, const std::vector<model::SearchSpan>& spans,
                         const std::vector<int>& grades) {
  Real total = 0;
  long pairs = 0;
  for (const auto& span : spans)
    for (nn::Index a = span.begin; a < span.begin + span.size; ++a)
      for (nn::Index b = span.begin; b < span.begin + span.size; ++b) {
        if (grades[static_cast<std::size_t>(a)] <= grades[static_cast<std::size_t>(b)]) continue;
        total -= log_sigmoid_ref(static_cast<Real>(scores[a]) - scores[b]);
        ++pairs;
      }
  return pairs == 0 ? 0 : total / pairs;
}

inline int grade_ref(const journey::LabelVector& y) {
  const bool negative = y[Milestone::rej] || y[Milestone::cbh] || y[Milestone::cbg];
  if (y[Milestone::unc]) return 3;
  if (negative) return 0;
  return y[Milestone::c] ? 2 : 1;
}

inline std::vector<std::uint8_t> mask_of(const model::Batch& b, Milestone m) {
  std::vector<std::uint8_t> out;
  for (const auto& y : b.labels) out.push_back(y[m] ? 1 : 0);
  return out;
}

/// Plain Eigen MLP evaluation straight from the stored weights.
inline Eigen::MatrixXd mlp_ref(const model::Params& p, const std::string& prefix, const nn::MlpSpec& spec,
                               Eigen::MatrixXd h) {
  for (nn::Index l = 0; l < spec.num_layers(); ++l) {
    const Eigen::MatrixXd& w = p.at(nn::layer_weight_name(prefix, l)).value();
    const Eigen::MatrixXd& b = p.at(nn::layer_bias_name(prefix, l)).value();
    Eigen::MatrixXd next = h * w;
    next.rowwise() += b.row(0);
    if (l + 1 < spec.num_layers()) {
      next = spec.activation == nn::Activation::kRelu ? Eigen::MatrixXd(next.cwiseMax(0.0))
                                                      : Eigen::MatrixXd(next.array().tanh().matrix());
    }
    h = next;
  }
  return h;
}

/// Per-row [listing embedding, context embedding] built without the tape.
inline Eigen::MatrixXd joint_embedding_ref(const model::ModelConfig& c, const model::Params& p, const model::Batch& b) {
  const Eigen::MatrixXd el = mlp_ref(p, model::kListingTowerPrefix, c.listing_tower_spec(), b.listing);
  const Eigen::MatrixXd ec = mlp_ref(p, model::kContextTowerPrefix, c.context_tower_spec(), b.context);
  Eigen::MatrixXd out(b.rows(), el.cols() + ec.cols());
  for (nn::Index r = 0; r < b.rows(); ++r) {
    out.row(r) << el.row(r), ec.row(b.search_of_row[static_cast<std::size_t>(r)]);
  }
  return out;
}

/// Baseline (unc-only) model score straight from the weights:
/// log sigmoid of the unc head on the concatenated embeddings.
inline Eigen::VectorXd baseline_scores_ref(const model::ModelConfig& c, const model::Params& p, const model::Batch& b) {
  const Eigen::MatrixXd logits =
      mlp_ref(p, model::base_head_prefix(Milestone::unc), c.head_spec(Milestone::unc), joint_embedding_ref(c, p, b));
  Eigen::VectorXd out(logits.rows());
  for (nn::Index r = 0; r < logits.rows(); ++r) out[r] = static_cast<double>(log_sigmoid_ref(logits(r, 0)));
  return out;
}

/// A deliberately small model so exhaustive finite differences stay cheap.
inline model::ModelConfig small_config(const std::vector<Milestone>& base, const std::vector<Milestone>& twiddlers,
                                       std::uint64_t seed, nn::Activation act = nn::Activation::kTanh) {
  model::ModelConfig c;
  c.name = "small";
  c.listing_feature_dim = 3;
  c.context_feature_dim = 2;
  c.listing_tower = {{4}, act};
  c.context_tower = {{3}, act};
  c.embedding_dim = 3;
  c.head = {{3}, act};
  c.combination = {{3}, act};
  c.base_tasks = base;
  c.twiddler_tasks = twiddlers;
  c.seed = seed;
  c.validate();
  return c;
}

inline std::vector<Milestone> all_chain() { return {journey::kPositiveChain.begin(), journey::kPositiveChain.end()}; }
inline std::vector<Milestone> all_negatives() {
  return {journey::kNegativeMilestones.begin(), journey::kNegativeMilestones.end()};
}

/// Adds N(0, scale) noise to every parameter so no structure from the
/// initializer (zeros, identity) hides a bug.
inline void perturb(model::Params& p, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  for (auto& [_, t] : p)
    for (nn::Index i = 0; i < t.size(); ++i) t.mutable_value().data()[i] += n(rng);
}

inline model::TaskWeights random_weights(const model::ModelConfig& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  model::TaskWeights w;
  for (Milestone m : c.base_tasks) w[m] = m == Milestone::unc ? 1.0 : u(rng);
  return w;
}

// The combination term sees the head outputs through a stop-gradient, so the
// finite-difference target holds them at their unperturbed values.
inline double frozen_head_objective(const model::ModelConfig& c, const model::Params& p, const model::Batch& b,
                                    const model::TaskWeights& w, const Eigen::VectorXd& y_base,
                                    const std::vector<Eigen::VectorXd>& y_twiddler) {
  model::Params q = p;
  nn::Tape<double> tape;
  const auto pass = model::forward(c, q, tape, b);
  const auto terms = model::total_loss(c, pass, b, w);
  const Eigen::MatrixXd ec = mlp_ref(p, model::kContextTowerPrefix, c.context_tower_spec(), b.context);
  const Eigen::MatrixXd alphas = mlp_ref(p, model::kCombinationPrefix, c.combination_spec(), ec);
  Eigen::VectorXd y(b.rows());
  std::vector<int> grades;
  for (nn::Index r = 0; r < b.rows(); ++r) {
    const nn::Index s = b.search_of_row[static_cast<std::size_t>(r)];
    Real v = softplus_ref(alphas(s, 0)) * y_base[r];
    for (std::size_t t = 0; t < y_twiddler.size(); ++t) v += alphas(s, static_cast<nn::Index>(t) + 1) * y_twiddler[t][r];
    y[r] = static_cast<double>(v);
    grades.push_back(grade_ref(b.labels[static_cast<std::size_t>(r)]));
  }
  return terms.base.value()(0, 0) + terms.twiddler.value()(0, 0) +
         static_cast<double>(pairwise_ref(y, b.spans, grades));
}

/// Worst relative error between the tape gradient of the total loss and
/// five-point differences of the frozen-head objective, over every parameter.
inline double total_loss_gradient_error(const model::ModelConfig& c, model::Params p, const model::Batch& b,
                                        const model::TaskWeights& w, double h = 1e-4) {
  Eigen::VectorXd y_base;
  std::vector<Eigen::VectorXd> y_twiddler;
  {
    nn::Tape<double> tape;
    const auto pass = model::forward(c, p, tape, b);
    y_base = pass.y_base.value().col(0);
    for (const auto& y : pass.y_twiddler) y_twiddler.push_back(y.value().col(0));
    tape.backward(model::total_loss(c, pass, b, w).total);
  }
  double worst = 0.0;
  for (auto& [name, t] : p) {
    const Eigen::MatrixXd analytic = t.grad();
    Eigen::MatrixXd& v = t.mutable_value();
    for (nn::Index i = 0; i < v.size(); ++i) {
      const double orig = v.data()[i];
      auto at = [&](double step) {
        v.data()[i] = orig + step;
        return frozen_head_objective(c, p, b, w, y_base, y_twiddler);
      };
      const double numeric = (8 * (at(h) - at(-h)) - (at(2 * h) - at(-2 * h))) / (12 * h);
      v.data()[i] = orig;
      const double a = analytic.data()[i];
      worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6}));
    }
  }
  return worst;
}

}  // namespace funnelrank::testing
