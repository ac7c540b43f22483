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

#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "funnelrank/model/config.hpp"
#include "funnelrank/model/losses.hpp"
#include "funnelrank/model/manifest.hpp"
#include "funnelrank/model/ranker.hpp"
#include "funnelrank/model/train.hpp"
#include "oracles.hpp"
#include "testing.hpp"

namespace funnelrank::model {
namespace {

using testing::all_chain;
using testing::all_negatives;
using testing::small_config;

const double kLn2 = std::log(2.0);

// Regression pins for the small relu model (seed 7) and the separable run.
constexpr double kGoldenListing[6] = {-0.64026920027530942, -1.1043407731772517, -0.11872731626204736,
                                      0.028532116182413393, -0.2590470476495772, 0.1212986960101789};
constexpr double kGoldenContext[6] = {1.4020205332193276,   -0.35250316299863571, -0.73932069459301608,
                                      0.084445448537633083, 0.067840215339187354, 0.010125726792284462};
constexpr double kSeparableFirstLoss = 5.8593587326806071;
constexpr double kSeparableLastLoss = 0.0047285415463754338;

Batch one_search(const std::vector<LabelVector>& labels, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  Batch b;
  const auto n = static_cast<Index>(labels.size());
  b.listing = testing::random_matrix(rng, n, 3);
  b.context = testing::random_matrix(rng, 1, 2);
  b.spans = {{0, n}};
  b.labels = labels;
  for (Index i = 0; i < n; ++i) {
    b.search_of_row.push_back(0);
    b.listing_ids.push_back(static_cast<ListingId>(i + 1));
  }
  b.search_ids = {1};
  return b;
}

// ---------------------------------------------------------------------------
// Losses in isolation

TEST(ListwiseLoss, SaturatedPositiveIsNearZero) {
  Tape tape;
  Eigen::MatrixXd s(4, 1);
  s << 0.0, -1.0, 20.0, 0.5;
  const auto loss = listwise_softmax_loss(tape.constant(s), {{0, 4}}, {0, 0, 1, 0}, 1.0);
  EXPECT_LT(loss.value()(0, 0), 1e-8);
}

TEST(ListwiseLoss, EqualScoresGiveLogTwo) {
  Tape tape;
  const auto loss = listwise_softmax_loss(tape.constant(Eigen::MatrixXd::Constant(2, 1, -3.5)), {{0, 2}}, {1, 0}, 1.0);
  EXPECT_NEAR(loss.value()(0, 0), kLn2, 1e-15);
}

TEST(ListwiseLoss, OneTermPerPositive) {
  Tape tape;
  const auto loss = listwise_softmax_loss(tape.constant(Eigen::MatrixXd::Zero(4, 1)), {{0, 4}}, {1, 1, 1, 0}, 0.5);
  EXPECT_NEAR(loss.value()(0, 0), 0.5 * 3 * std::log(4.0), 1e-14);
}

TEST(ListwiseLoss, EmptySearchIsAContractError) {
  Tape tape;
  EXPECT_THROW(listwise_softmax_loss(tape.constant(Eigen::MatrixXd::Zero(2, 1)), {{0, 2}, {2, 0}}, {1, 0}, 1.0),
               nn::ContractError);
}

TEST(BceLoss, NoEligibleRowsIsExactlyZero) {
  Tape tape;
  const auto loss = masked_bce_loss(tape.constant(Eigen::MatrixXd::Constant(3, 1, 4.0)), {0, 0, 0}, {1, 0, 1});
  EXPECT_EQ(loss.value()(0, 0), 0.0);
}

TEST(BceLoss, SingleEligibleZeroLogitIsLogTwo) {
  Tape tape;
  const auto loss = masked_bce_loss(tape.constant(Eigen::MatrixXd::Zero(3, 1)), {0, 1, 0}, {0, 1, 0});
  EXPECT_NEAR(loss.value()(0, 0), kLn2, 1e-15);
}

TEST(PairwiseLoss, UniformGradesContributeNothing) {
  Tape tape;
  std::mt19937_64 rng(1);
  const auto loss = pairwise_logistic_loss(tape.constant(testing::random_matrix(rng, 5, 1)), {{0, 5}}, {2, 2, 2, 2, 2});
  EXPECT_EQ(loss.value()(0, 0), 0.0);
}

TEST(PairwiseLoss, OnePairEqualScoresIsLogTwo) {
  Tape tape;
  const auto loss = pairwise_logistic_loss(tape.constant(Eigen::MatrixXd::Constant(2, 1, 1.7)), {{0, 2}}, {3, 0});
  EXPECT_NEAR(loss.value()(0, 0), kLn2, 1e-15);
}

TEST(PairwiseLoss, GradesFollowPreferenceOrder) {
  LabelVector plain;
  LabelVector click;
  click.set(Milestone::c);
  const LabelVector unc = testing::funnel_labels(6, false, 0);
  const LabelVector rej = testing::funnel_labels(4, true, 0);
  const LabelVector cbg = testing::funnel_labels(5, true, 2);
  EXPECT_EQ(relevance_grade(unc), 3);
  EXPECT_EQ(relevance_grade(click), 2);
  EXPECT_EQ(relevance_grade(testing::funnel_labels(3, false, 0)), 2);
  EXPECT_EQ(relevance_grade(plain), 1);
  EXPECT_EQ(relevance_grade(rej), 0);
  EXPECT_EQ(relevance_grade(cbg), 0);
}

TEST(Losses, MatchScriptedOraclesOnRandomBatches) {
  std::mt19937_64 rng(404);
  for (int trial = 0; trial < 300; ++trial) {
    const Batch b = testing::random_batch(rng, 4, 7, 3, 2, 0.6);
    const Eigen::MatrixXd s = testing::random_matrix(rng, b.rows(), 1, 3.0);
    std::vector<int> grades;
    for (const auto& y : b.labels) grades.push_back(testing::grade_ref(y));
    Tape tape;
    const Var v = tape.constant(s);
    for (Milestone m : journey::kPositiveChain) {
      const auto pos = testing::mask_of(b, m);
      EXPECT_NEAR(listwise_softmax_loss(v, b.spans, pos, 0.37).value()(0, 0),
                  static_cast<double>(testing::listwise_ref(s.col(0), b.spans, pos, 0.37L)), 1e-10);
    }
    for (Milestone gate : {Milestone::req, Milestone::book}) {
      const auto eligible = testing::mask_of(b, gate);
      const auto target = testing::mask_of(b, gate == Milestone::req ? Milestone::rej : Milestone::cbg);
      EXPECT_NEAR(masked_bce_loss(v, eligible, target).value()(0, 0),
                  static_cast<double>(testing::bce_ref(s.col(0), eligible, target)), 1e-10);
    }
    EXPECT_NEAR(pairwise_logistic_loss(v, b.spans, grades).value()(0, 0),
                static_cast<double>(testing::pairwise_ref(s.col(0), b.spans, grades)), 1e-10);
  }
}

// Gradient checks: each loss on free scores, then the whole model.
template <typename LossOnScores>
double scores_gradient_error(std::mt19937_64& rng, const Batch& b, LossOnScores loss) {
  Params p;
  p.add("scores", testing::random_matrix(rng, b.rows(), 1, 2.0));
  return testing::max_gradient_error(p, [&](Params& q, Tape& tape) { return loss(tape.parameter(q.at("scores"))); },
                                     1e-5, 1e-6);
}

TEST(GradientCheck, ListwiseOverRandomConfigurations) {
  std::mt19937_64 rng(1);
  double worst = 0.0;
  for (int trial = 0; trial < 120; ++trial) {
    const Batch b = testing::random_batch(rng, 3, 6, 1, 1, 0.7);
    const auto pos = testing::mask_of(b, journey::kPositiveChain[static_cast<std::size_t>(trial % 6)]);
    worst = std::max(worst, scores_gradient_error(rng, b, [&](const Var& s) {
                       return listwise_softmax_loss(s, b.spans, pos, 0.8);
                     }));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(GradientCheck, MaskedBceOverRandomConfigurations) {
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int trial = 0; trial < 120; ++trial) {
    const Batch b = testing::random_batch(rng, 3, 6, 1, 1, 0.8);
    std::vector<std::uint8_t> eligible, target;
    std::bernoulli_distribution coin(0.5);
    for (Index i = 0; i < b.rows(); ++i) {
      eligible.push_back(coin(rng));
      target.push_back(coin(rng));
    }
    worst = std::max(worst, scores_gradient_error(rng, b, [&](const Var& s) {
                       return masked_bce_loss(s, eligible, target);
                     }));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(GradientCheck, PairwiseOverRandomConfigurations) {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  std::uniform_int_distribution<int> g(0, 3);
  for (int trial = 0; trial < 120; ++trial) {
    const Batch b = testing::random_batch(rng, 3, 6, 1, 1);
    std::vector<int> grades;
    for (Index i = 0; i < b.rows(); ++i) grades.push_back(g(rng));
    worst = std::max(worst, scores_gradient_error(rng, b, [&](const Var& s) {
                       return pairwise_logistic_loss(s, b.spans, grades);
                     }));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(GradientCheck, TotalLossThroughWholeModel) {
  std::mt19937_64 rng(4);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ModelConfig c = small_config(all_chain(), all_negatives(), static_cast<std::uint64_t>(trial));
    Params p = init_parameters(c);
    testing::perturb(p, rng, 0.3);
    const Batch b = testing::random_batch(rng, 3, 5, 3, 2, 0.7);
    worst = std::max(worst, testing::total_loss_gradient_error(c, p, b, testing::random_weights(c, rng)));
  }
  EXPECT_LT(worst, 1e-4);
}

// ---------------------------------------------------------------------------
// Forward pass

TEST(SharedForward, ZeroWeightsGiveZeroEmbeddings) {
  const ModelConfig c = small_config({Milestone::unc}, {}, 1, nn::Activation::kRelu);
  Params p = init_parameters(c);
  for (auto& [_, t] : p) t.mutable_value().setZero();
  std::mt19937_64 rng(1);
  Tape tape;
  const auto e = shared_forward(c, p, tape, testing::random_matrix(rng, 5, 3), testing::random_matrix(rng, 5, 2));
  EXPECT_TRUE((e.listing.value().array() == 0.0).all());
  EXPECT_TRUE((e.context.value().array() == 0.0).all());
  EXPECT_EQ(e.listing.cols(), c.embedding_dim);
}

TEST(SharedForward, RowsAreIndependent) {
  const ModelConfig c = small_config({Milestone::unc}, {}, 2);
  Params p = init_parameters(c);
  std::mt19937_64 rng(2);
  const Eigen::MatrixXd x = testing::random_matrix(rng, 8, 3);
  const Eigen::MatrixXd z = testing::random_matrix(rng, 8, 2);
  Tape t8, t1;
  const auto e8 = shared_forward(c, p, t8, x, z);
  const auto e1 = shared_forward(c, p, t1, x.topRows(1), z.topRows(1));
  EXPECT_TRUE((e1.listing.value().row(0).array() == e8.listing.value().row(0).array()).all());
  EXPECT_TRUE((e1.context.value().row(0).array() == e8.context.value().row(0).array()).all());
}

TEST(SharedForward, WidthMismatchIsAShapeError) {
  const ModelConfig c = small_config({Milestone::unc}, {}, 3);
  Params p = init_parameters(c);
  Tape tape;
  EXPECT_THROW(shared_forward(c, p, tape, Eigen::MatrixXd::Zero(2, 4), Eigen::MatrixXd::Zero(2, 2)), nn::ShapeError);
  EXPECT_THROW(shared_forward(c, p, tape, Eigen::MatrixXd::Zero(2, 3), Eigen::MatrixXd::Zero(3, 2)), nn::ShapeError);
}

TEST(SharedForward, GoldenSnapshot) {
  const ModelConfig c = small_config({Milestone::unc}, {}, 7, nn::Activation::kRelu);
  Params p = init_parameters(c);
  Eigen::MatrixXd x(2, 3), z(2, 2);
  x << 0.5, -1.0, 2.0, 1.5, 0.25, -0.75;
  z << 1.0, -2.0, 0.0, 0.5;
  Tape tape;
  const auto e = shared_forward(c, p, tape, x, z);
  const Eigen::Map<const Eigen::Matrix<double, 2, 3, Eigen::RowMajor>> expected_l(kGoldenListing);
  const Eigen::Map<const Eigen::Matrix<double, 2, 3, Eigen::RowMajor>> expected_c(kGoldenContext);
  EXPECT_LT((e.listing.value() - expected_l).cwiseAbs().maxCoeff(), 1e-12) << e.listing.value();
  EXPECT_LT((e.context.value() - expected_c).cwiseAbs().maxCoeff(), 1e-12) << e.context.value();
}

TEST(BaseForward, ZeroLogitsGiveHalvingChain) {
  const ModelConfig c = small_config(all_chain(), {}, 4);
  Params p = init_parameters(c);
  for (Milestone m : c.base_tasks) {
    for (Index l = 0; l < 2; ++l) {
      p.at(nn::layer_weight_name(base_head_prefix(m), l)).mutable_value().setZero();
      p.at(nn::layer_bias_name(base_head_prefix(m), l)).mutable_value().setZero();
    }
  }
  const Batch b = one_search({LabelVector{}, LabelVector{}});
  Tape tape;
  const auto pass = forward(c, p, tape, b);
  for (std::size_t k = 0; k < 6; ++k) {
    EXPECT_NEAR(pass.base.log_joint[k].value()(0, 0), (k + 1.0) * std::log(0.5), 1e-15);
  }
  EXPECT_NEAR(std::exp(pass.y_base.value()(1, 0)), 1.0 / 64.0, 1e-16);
}

TEST(BaseForward, SingleTaskIsLogSigmoidOfHead) {
  const ModelConfig c = small_config({Milestone::unc}, {}, 5);
  Params p = init_parameters(c);
  std::mt19937_64 rng(5);
  testing::perturb(p, rng, 0.5);
  const Batch b = testing::random_batch(rng, 3, 4, 3, 2);
  Tape tape;
  const auto pass = forward(c, p, tape, b);
  const Eigen::VectorXd ref = testing::baseline_scores_ref(c, p, b);
  for (Index r = 0; r < b.rows(); ++r) EXPECT_NEAR(pass.y_base.value()(r, 0), ref[r], 1e-13);
}

// Chain rule, fuzzed: every row of every draw.
TEST(ChainRule, JointMatchesSigmoidProductAndIsMonotone) {
  std::mt19937_64 rng(6);
  std::size_t rows = 0;
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const ModelConfig c = small_config(all_chain(), {}, static_cast<std::uint64_t>(draw));
    Params p = init_parameters(c);
    testing::perturb(p, rng, 0.8);
    const Batch b = testing::random_batch(rng, 10, 10, 3, 2);
    Tape tape;
    const auto pass = forward(c, p, tape, b);
    for (Index r = 0; r < b.rows(); ++r, ++rows) {
      testing::Real product = 1;
      double prev = 0.0;
      for (std::size_t k = 0; k < 6; ++k) {
        const double lj = pass.base.log_joint[k].value()(r, 0);
        const double pj = std::exp(lj);
        product /= 1 + std::exp(-static_cast<testing::Real>(pass.base.cond_logits[k].value()(r, 0)));
        ASSERT_GT(pj, 0.0);
        ASSERT_LT(pj, 1.0);
        ASSERT_LE(lj, prev);
        prev = lj;
        worst = std::max(worst, static_cast<double>(std::abs(pj - product)));
      }
    }
  }
  EXPECT_GE(rows, 5000u);
  EXPECT_LT(worst, 1e-12);
}

TEST(TwiddlerForward, ZeroHeadsGiveZeroLogits) {
  const ModelConfig c = small_config({Milestone::unc}, all_negatives(), 8);
  Params p = init_parameters(c);
  for (Milestone m : c.twiddler_tasks)
    for (Index l = 0; l < 2; ++l) {
      p.at(nn::layer_weight_name(twiddler_head_prefix(m), l)).mutable_value().setZero();
      p.at(nn::layer_bias_name(twiddler_head_prefix(m), l)).mutable_value().setZero();
    }
  std::mt19937_64 rng(8);
  const Batch b = testing::random_batch(rng, 2, 4, 3, 2);
  Tape tape;
  for (const auto& y : forward(c, p, tape, b).y_twiddler) EXPECT_TRUE((y.value().array() == 0.0).all());
}

TEST(TwiddlerForward, HeadsAreIndependent) {
  const ModelConfig c = small_config({Milestone::unc}, all_negatives(), 9);
  Params p = init_parameters(c);
  std::mt19937_64 rng(9);
  const Batch b = testing::random_batch(rng, 2, 4, 3, 2);
  Tape t1;
  const Eigen::MatrixXd before = forward(c, p, t1, b).y_twiddler[2].value();
  p.at(nn::layer_weight_name(twiddler_head_prefix(Milestone::rej), 0)).mutable_value().array() += 1.0;
  Tape t2;
  const auto after = forward(c, p, t2, b);
  EXPECT_TRUE((after.y_twiddler[2].value().array() == before.array()).all());
  ASSERT_EQ(c.twiddler_tasks[2], Milestone::cbg);
}

TEST(TwiddlerLoss, NoRequestsMeansZeroRejectionTerm) {
  const ModelConfig c = small_config({Milestone::unc}, {Milestone::rej}, 10);
  Params p = init_parameters(c);
  const Batch b = one_search({LabelVector{}, testing::funnel_labels(3, false, 0)});
  Tape tape;
  const auto pass = forward(c, p, tape, b);
  EXPECT_EQ(twiddler_loss(c, pass.y_twiddler, b).value()(0, 0), 0.0);
}

TEST(TwiddlerLoss, MatchesMaskedBceOracle) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const ModelConfig c = small_config({Milestone::unc}, all_negatives(), static_cast<std::uint64_t>(trial));
    Params p = init_parameters(c);
    testing::perturb(p, rng, 0.5);
    const Batch b = testing::random_batch(rng, 4, 6, 3, 2, 0.85);
    Tape tape;
    const auto pass = forward(c, p, tape, b);
    testing::Real expected = 0;
    for (std::size_t t = 0; t < 3; ++t) {
      const Milestone m = c.twiddler_tasks[t];
      const Milestone gate = m == Milestone::rej ? Milestone::req : Milestone::book;
      expected += testing::bce_ref(pass.y_twiddler[t].value().col(0), testing::mask_of(b, gate), testing::mask_of(b, m));
    }
    EXPECT_NEAR(twiddler_loss(c, pass.y_twiddler, b).value()(0, 0), static_cast<double>(expected), 1e-10);
  }
}

void set_combination_output(Params& p, const ModelConfig& c, const Eigen::RowVectorXd& bias) {
  const Index last = static_cast<Index>(c.combination.hidden_dims.size());
  p.at(nn::layer_weight_name(kCombinationPrefix, last)).mutable_value().setZero();
  p.at(nn::layer_bias_name(kCombinationPrefix, last)).mutable_value() = bias;
}

TEST(Combination, ZeroOutputsGiveLogTwoTimesBase) {
  const ModelConfig c = small_config(all_chain(), all_negatives(), 12);
  Params p = init_parameters(c);
  set_combination_output(p, c, Eigen::RowVectorXd::Zero(4));
  std::mt19937_64 rng(12);
  const Batch b = testing::random_batch(rng, 3, 5, 3, 2);
  Tape tape;
  const auto pass = forward(c, p, tape, b);
  const auto& comb = *pass.combination;
  for (Index r = 0; r < b.rows(); ++r) {
    EXPECT_NEAR(comb.alpha_base.value()(r, 0), 0.6931471805599453, 1e-15);
    for (const auto& a : comb.alpha_twiddler) EXPECT_EQ(a.value()(r, 0), 0.0);
    EXPECT_NEAR(comb.y_combination.value()(r, 0), kLn2 * pass.y_base.value()(r, 0), 1e-14);
  }
}

TEST(Combination, IdentityCoefficientsReproduceBase) {
  const ModelConfig c = small_config(all_chain(), all_negatives(), 13);
  Params p = init_parameters(c);
  Eigen::RowVectorXd bias = Eigen::RowVectorXd::Zero(4);
  bias[0] = std::log(std::expm1(1.0));
  set_combination_output(p, c, bias);
  std::mt19937_64 rng(13);
  const Batch b = testing::random_batch(rng, 3, 5, 3, 2);
  Tape tape;
  const auto pass = forward(c, p, tape, b);
  for (Index r = 0; r < b.rows(); ++r) {
    EXPECT_NEAR(pass.combination->y_combination.value()(r, 0), pass.y_base.value()(r, 0), 1e-14);
  }
  const Params fresh = init_parameters(c);
  EXPECT_TRUE(fresh.at(nn::layer_bias_name(kCombinationPrefix, 1)).value() == bias);
}

TEST(Combination, EqualsHandComputedLinearCombination) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 50; ++trial) {
    const ModelConfig c = small_config(all_chain(), all_negatives(), static_cast<std::uint64_t>(trial));
    Params p = init_parameters(c);
    testing::perturb(p, rng, 0.7);
    const Batch b = testing::random_batch(rng, 3, 5, 3, 2);
    Tape tape;
    const auto pass = forward(c, p, tape, b);
    const Eigen::MatrixXd ec = testing::mlp_ref(p, kContextTowerPrefix, c.context_tower_spec(), b.context);
    const Eigen::MatrixXd alphas = testing::mlp_ref(p, kCombinationPrefix, c.combination_spec(), ec);
    for (Index r = 0; r < b.rows(); ++r) {
      const Index s = b.search_of_row[static_cast<std::size_t>(r)];
      testing::Real y = testing::softplus_ref(alphas(s, 0)) * pass.y_base.value()(r, 0);
      for (Index t = 0; t < 3; ++t) y += static_cast<testing::Real>(alphas(s, t + 1)) * pass.y_twiddler[static_cast<std::size_t>(t)].value()(r, 0);
      EXPECT_NEAR(pass.combination->y_combination.value()(r, 0), static_cast<double>(y), 1e-12);
      EXPECT_GT(pass.combination->alpha_base.value()(r, 0), 0.0);
    }
  }
}

TEST(Combination, LossMatchesAllPairsOracle) {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    const ModelConfig c = small_config(all_chain(), all_negatives(), static_cast<std::uint64_t>(trial));
    Params p = init_parameters(c);
    testing::perturb(p, rng, 0.7);
    const Batch b = testing::random_batch(rng, 4, 6, 3, 2, 0.6);
    Tape tape;
    const auto pass = forward(c, p, tape, b);
    std::vector<int> grades;
    for (const auto& y : b.labels) grades.push_back(testing::grade_ref(y));
    EXPECT_NEAR(combination_loss(pass.combination->y_combination, b).value()(0, 0),
                static_cast<double>(testing::pairwise_ref(pass.combination->y_combination.value().col(0), b.spans, grades)),
                1e-10);
  }
}

// Only the alpha path may carry gradient out of the combination loss.
TEST(GradientFreeze, CombinationLossLeavesHeadsUntouched) {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 20; ++trial) {
    const ModelConfig c = small_config(all_chain(), all_negatives(), static_cast<std::uint64_t>(trial));
    Params p = init_parameters(c);
    testing::perturb(p, rng, 0.5);
    const Batch b = testing::random_batch(rng, 4, 6, 3, 2, 0.6);
    Tape tape;
    const auto pass = forward(c, p, tape, b);
    const Var loss = combination_loss(pass.combination->y_combination, b);
    ASSERT_GT(loss.value()(0, 0), 0.0);
    tape.backward(loss);
    double comb_norm = 0.0;
    for (const auto& [name, t] : p) {
      const bool head = name.rfind("base/", 0) == 0 || name.rfind("twiddler/", 0) == 0;
      if (head) {
        EXPECT_TRUE((t.grad().array() == 0.0).all()) << name;
      }
      if (name.rfind(kCombinationPrefix, 0) == 0) comb_norm += t.grad().squaredNorm();
      if (name.rfind(kListingTowerPrefix, 0) == 0) {
        EXPECT_TRUE((t.grad().array() == 0.0).all()) << name;
      }
    }
    EXPECT_GT(comb_norm, 0.0);
  }
}

TEST(GradientFreeze, HeadPrefixesAreWhatTheFreezeCheckAssumes) {
  EXPECT_EQ(base_head_prefix(Milestone::lc).rfind("base/", 0), 0u);
  EXPECT_EQ(twiddler_head_prefix(Milestone::rej).rfind("twiddler/", 0), 0u);
}

// ---------------------------------------------------------------------------
// Total loss

TEST(TotalLoss, BaseOnlyTotalIsBaseLossExactly) {
  const ModelConfig c = small_config({Milestone::c, Milestone::unc}, {}, 17);
  Params p = init_parameters(c);
  std::mt19937_64 rng(17);
  const Batch b = testing::random_batch(rng, 4, 6, 3, 2, 0.8);
  Tape tape;
  const auto pass = forward(c, p, tape, b);
  const auto t = total_loss(c, pass, b, testing::random_weights(c, rng));
  EXPECT_EQ(t.total.value()(0, 0), t.base.value()(0, 0));
  EXPECT_EQ(t.twiddler.value()(0, 0), 0.0);
  EXPECT_EQ(t.combination.value()(0, 0), 0.0);
}

TEST(TotalLoss, EqualsIndependentSumOfModules) {
  std::mt19937_64 rng(18);
  for (int trial = 0; trial < 50; ++trial) {
    const ModelConfig c = small_config(all_chain(), all_negatives(), static_cast<std::uint64_t>(trial));
    Params p = init_parameters(c);
    testing::perturb(p, rng, 0.5);
    const Batch b = testing::random_batch(rng, 4, 6, 3, 2, 0.8);
    const TaskWeights w = testing::random_weights(c, rng);
    Tape tape;
    const auto pass = forward(c, p, tape, b);
    testing::Real expected = 0;
    for (std::size_t k = 0; k < 6; ++k) {
      const Milestone m = c.base_tasks[k];
      expected += testing::listwise_ref(pass.base.log_joint[k].value().col(0), b.spans, testing::mask_of(b, m), w.at(m));
    }
    for (std::size_t t = 0; t < 3; ++t) {
      const Milestone m = c.twiddler_tasks[t];
      expected += testing::bce_ref(pass.y_twiddler[t].value().col(0),
                                   testing::mask_of(b, m == Milestone::rej ? Milestone::req : Milestone::book),
                                   testing::mask_of(b, m));
    }
    std::vector<int> grades;
    for (const auto& y : b.labels) grades.push_back(testing::grade_ref(y));
    expected += testing::pairwise_ref(pass.combination->y_combination.value().col(0), b.spans, grades);
    const double total = total_loss(c, pass, b, w).total.value()(0, 0);
    EXPECT_NEAR(total, static_cast<double>(expected), 1e-12 * std::max(1.0, std::abs(total)));
  }
}

TEST(TotalLoss, ZeroParameterModelHasClosedForm) {
  const ModelConfig c = small_config(all_chain(), all_negatives(), 19);
  Params p = init_parameters(c);
  for (auto& [_, t] : p) t.mutable_value().setZero();
  // One search: an unc impression, a rejected one, and two plain ones.
  const Batch b = one_search({testing::funnel_labels(6, false, 0), testing::funnel_labels(4, true, 0), LabelVector{},
                              LabelVector{}});
  TaskWeights w;
  for (Milestone m : c.base_tasks) w[m] = 1.0;
  Tape tape;
  const auto t = total_loss(c, forward(c, p, tape, b), b, w);
  // Base: every log_joint ties, so each positive costs ln 4; c, lc, pp, req
  // have two positives, book and unc one.
  const double base = (4 * 2 + 2 * 1) * std::log(4.0);
  // Twiddler: rej over two req rows, cbh and cbg over one book row, all at logit 0.
  const double twiddler = 3 * kLn2;
  // Combination: every pair ties.
  const double combination = kLn2;
  EXPECT_NEAR(t.base.value()(0, 0), base, 1e-13);
  EXPECT_NEAR(t.twiddler.value()(0, 0), twiddler, 1e-14);
  EXPECT_NEAR(t.combination.value()(0, 0), combination, 1e-15);
  EXPECT_NEAR(t.total.value()(0, 0), base + twiddler + combination, 1e-13);
}

// Baseline equivalence: the unc-only model against a hand-rolled single-task
// listwise loss on hand-rolled scores.
TEST(Baseline, LossEqualsIndependentSingleTaskOracle) {
  std::mt19937_64 rng(20);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const ModelConfig c = small_config({Milestone::unc}, {}, static_cast<std::uint64_t>(trial), nn::Activation::kRelu);
    Params p = init_parameters(c);
    testing::perturb(p, rng, 0.3);
    const Batch b = testing::random_batch(rng, 5, 8, 3, 2, 0.7);
    TaskWeights w{{Milestone::unc, 1.0}};
    Tape tape;
    const double loss = total_loss(c, forward(c, p, tape, b), b, w).total.value()(0, 0);
    const testing::Real oracle = testing::listwise_ref(testing::baseline_scores_ref(c, p, b), b.spans,
                                                       testing::mask_of(b, Milestone::unc), 1.0L);
    worst = std::max(worst, static_cast<double>(std::abs(loss - oracle)));
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(Baseline, DefaultBaselineConfigIsSingleTask) {
  const ModelConfig c = baseline_config();
  EXPECT_EQ(c.base_tasks, std::vector<Milestone>{Milestone::unc});
  EXPECT_TRUE(c.twiddler_tasks.empty());
  EXPECT_FALSE(c.has_combination());
}

// ---------------------------------------------------------------------------
// Scoring

TEST(Score, OrderingAndTieBreak) {
  Eigen::VectorXd s(2);
  s << -1.2, 0.4;
  EXPECT_EQ(rank_order(s, {1, 2}), (std::vector<std::size_t>{1, 0}));
  Eigen::VectorXd tie = Eigen::VectorXd::Constant(3, 0.5);
  EXPECT_EQ(rank_order(tie, {9, 3, 5}), (std::vector<std::size_t>{1, 2, 0}));
}

TEST(Score, ShiftInvariance) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd s = testing::random_matrix(rng, 9, 1).col(0);
    s[3] = s[5];
    std::vector<ListingId> ids(9);
    std::iota(ids.begin(), ids.end(), ListingId{100});
    std::shuffle(ids.begin(), ids.end(), rng);
    EXPECT_EQ(rank_order(s, ids), rank_order((s.array() + 0.75).matrix(), ids));
  }
}

MilestoneRanker tiny_ranker(const ModelConfig& c) {
  return MilestoneRanker(c, Normalizer::identity(3, 2), {}, "schema");
}

TEST(Score, SingleCandidateAndEmptyList) {
  const auto m = tiny_ranker(small_config(all_chain(), all_negatives(), 22));
  const auto out = m.score(Eigen::Vector2d(1.0, 2.0), {{77, Eigen::Vector3d(0.1, 0.2, 0.3)}});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].listing_id, 77u);
  EXPECT_TRUE(out[0].outputs.count("y_combination"));
  EXPECT_TRUE(out[0].outputs.count("alpha_twiddler/rej"));
  EXPECT_THROW(m.score(Eigen::Vector2d(1.0, 2.0), {}), nn::ContractError);
}

TEST(Score, OrderMatchesSortOfExtractedScores) {
  std::mt19937_64 rng(23);
  ModelConfig c = small_config(all_chain(), all_negatives(), 23);
  auto m = tiny_ranker(c);
  testing::perturb(m.mutable_params(), rng, 0.5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::pair<ListingId, Eigen::VectorXd>> cands;
    for (int i = 0; i < 7; ++i) cands.emplace_back(static_cast<ListingId>(i + 1), testing::random_matrix(rng, 3, 1).col(0));
    const Eigen::VectorXd ctx = testing::random_matrix(rng, 2, 1).col(0);
    const auto ranked = m.score(ctx, cands);
    for (std::size_t i = 1; i < ranked.size(); ++i) {
      EXPECT_GE(ranked[i - 1].score, ranked[i].score);
      EXPECT_EQ(ranked[i].score, ranked[i].outputs.at("y_combination"));
    }
  }
}

TEST(Score, DoesNotMutateTheModel) {
  const auto m = tiny_ranker(small_config(all_chain(), all_negatives(), 24));
  const Params before = m.params();
  m.score(Eigen::Vector2d(0.0, 1.0), {{1, Eigen::Vector3d::Ones()}, {2, Eigen::Vector3d::Zero()}});
  EXPECT_TRUE(m.params() == before);
  for (const auto& [_, t] : m.params()) EXPECT_FALSE(t.has_grad());
}

TEST(Alphas, MatchForwardPass) {
  std::mt19937_64 rng(25);
  auto m = tiny_ranker(small_config(all_chain(), all_negatives(), 25));
  testing::perturb(m.mutable_params(), rng, 0.5);
  const Batch b = testing::random_batch(rng, 3, 3, 3, 2);
  const auto out = m.predict(b);
  const Eigen::MatrixXd a = m.alphas(b.context);
  for (Index r = 0; r < b.rows(); ++r) {
    const Index s = b.search_of_row[static_cast<std::size_t>(r)];
    EXPECT_EQ(a(s, 0), out.alpha_base[r]);
    EXPECT_EQ(a(s, 1), out.alpha_twiddler.at(Milestone::rej)[r]);
  }
  EXPECT_THROW(m.alphas(Eigen::MatrixXd::Zero(1, 3)), nn::ShapeError);
  EXPECT_THROW(tiny_ranker(small_config({Milestone::unc}, {}, 1)).alphas(b.context), nn::ContractError);
}

// ---------------------------------------------------------------------------
// Config, accounting, persistence

TEST(Config, ParameterCountDifferenceIsAnalytic) {
  ModelConfig base = baseline_config();
  ModelConfig full = full_config();
  base.listing_feature_dim = full.listing_feature_dim = 40;
  base.context_feature_dim = full.context_feature_dim = 4;
  const Index e = full.embedding_dim;
  const Index h = full.head.hidden_dims.at(0);
  const Index ch = full.combination.hidden_dims.at(0);
  const Index head = (2 * e + 1) * h + (h + 1) * 1;
  const Index combination = (e + 1) * ch + (ch + 1) * 4;
  EXPECT_EQ(parameter_count(full) - parameter_count(base), 8 * head + combination);
  EXPECT_EQ(parameter_count(full), init_parameters(full).parameter_count());
  EXPECT_EQ(parameter_count(base), init_parameters(base).parameter_count());
}

TEST(Config, ValidationNamesKey) {
  auto expect_key = [](const ModelConfig& c, const std::string& key) {
    try {
      c.validate();
      ADD_FAILURE() << "accepted config with bad " << key;
    } catch (const ModelConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(key), std::string::npos) << e.what();
    }
  };
  ModelConfig c = full_config();
  c.base_tasks = {Milestone::lc, Milestone::c, Milestone::unc};
  expect_key(c, "base_tasks");
  c = full_config();
  c.base_tasks = {Milestone::c, Milestone::book};
  expect_key(c, "base_tasks");
  c = full_config();
  c.twiddler_tasks = {Milestone::rej, Milestone::rej};
  expect_key(c, "twiddler_tasks");
  c = full_config();
  c.twiddler_tasks = {Milestone::pp};
  expect_key(c, "twiddler_tasks");
  c = full_config();
  c.embedding_dim = 0;
  expect_key(c, "embedding_dim");
  c = full_config();
  c.training.epochs = -1;
  expect_key(c, "epochs");
}

TEST(Config, JsonRoundTripAndUnknownKeys) {
  ModelConfig c = full_config(3);
  c.head_overrides[Milestone::rej] = {{5, 2}, nn::Activation::kTanh};
  c.loss_weights.twiddler = 0.5;
  c.training.epochs = 2;
  const auto j = config_to_json(c);
  EXPECT_TRUE(config_from_json(j) == c);
  auto bad = j;
  bad["embeding_dim"] = 4;
  EXPECT_THROW(config_from_json(bad), ModelConfigError);
  auto bad_tower = j;
  bad_tower["listing_tower"]["width"] = 3;
  EXPECT_THROW(config_from_json(bad_tower), ModelConfigError);
}

TEST(Config, TaskSetNames) {
  EXPECT_EQ(task_set_name(all_chain()), "all6");
  EXPECT_EQ(parse_task_set("all6"), all_chain());
  EXPECT_EQ(parse_task_set(task_set_name({Milestone::c, Milestone::unc})),
            (std::vector<Milestone>{Milestone::c, Milestone::unc}));
  EXPECT_THROW(parse_task_set("c+booking"), ModelConfigError);
}

// ---------------------------------------------------------------------------
// Training

journey::Dataset separable_dataset() {
  journey::Dataset d;
  d.schema.listing_dim = 3;
  d.schema.context_dim = 2;
  d.schema.context_names = {journey::kDaysAheadFeature, journey::kNumPreviousSearchesFeature};
  std::mt19937_64 rng(31);
  for (int g = 0; g < 4; ++g) {
    journey::JourneyRecord j;
    j.guest_id = static_cast<std::uint64_t>(g + 1);
    journey::SearchRecord s;
    s.search_id = static_cast<std::uint64_t>(g + 1);
    s.context = Eigen::Vector2d(10.0 * g, 0.0);
    for (int i = 0; i < 4; ++i) {
      journey::ImpressionRecord imp;
      imp.listing_id = static_cast<ListingId>(10 * g + i + 1);
      imp.position = i + 1;
      const bool planted = i == g % 4;
      imp.features = Eigen::Vector3d(planted ? 1.0 : 0.0, testing::random_matrix(rng, 1, 1)(0, 0),
                                     testing::random_matrix(rng, 1, 1)(0, 0));
      if (planted) imp.labels = testing::funnel_labels(6, false, 0);
      s.impressions.push_back(imp);
    }
    j.searches.push_back(s);
    j.outcome = journey::JourneyOutcome::kUncancelled;
    d.journeys.push_back(j);
  }
  return d;
}

TEST(Train, ZeroEpochsKeepsInitialization) {
  ModelConfig c = baseline_config(5);
  c.training.epochs = 0;
  const auto d = separable_dataset();
  const auto r = train(c, d);
  EXPECT_TRUE(r.history.empty());
  EXPECT_TRUE(r.model.params() == init_parameters(bind_schema(c, d.schema)));
}

TEST(Train, SeparableBaseLossFallsEveryEpoch) {
  ModelConfig c = baseline_config(6);
  c.training.epochs = 50;
  const auto r = train(c, separable_dataset());
  ASSERT_EQ(r.history.size(), 50u);
  for (std::size_t e = 1; e < r.history.size(); ++e) {
    EXPECT_LT(r.history[e].base, r.history[e - 1].base) << "epoch " << e + 1;
  }
  EXPECT_NEAR(r.history.front().base, kSeparableFirstLoss, 1e-9);
  EXPECT_NEAR(r.history.back().base, kSeparableLastLoss, 1e-9);
}

TEST(Train, SameSeedSameHistoryAndParameters) {
  const auto d = testing::tiny_world(7, 150);
  const auto data = sim::generate(d).dataset;
  ModelConfig c = full_config(9);
  c.training.epochs = 2;
  const auto filtered = prepare_training_data(c, data).dataset;
  const auto a = train(c, filtered);
  const auto b = train(c, filtered);
  EXPECT_EQ(history_csv(a.history), history_csv(b.history));
  EXPECT_TRUE(a.model.params() == b.model.params());
  c.seed = 10;
  EXPECT_NE(history_csv(train(c, filtered).history), history_csv(a.history));
}

TEST(Train, DivergenceReportsEpoch) {
  ModelConfig c = baseline_config(1);
  c.training.epochs = 3;
  c.training.adam.learning_rate = 1e300;
  try {
    train(c, separable_dataset());
    FAIL() << "expected divergence";
  } catch (const TrainingError& e) {
    EXPECT_GE(e.epoch(), 1);
    EXPECT_NE(std::string(e.what()).find("epoch " + std::to_string(e.epoch())), std::string::npos);
  }
}

TEST(Train, TrainingFilterMilestone) {
  EXPECT_EQ(training_filter_milestone(baseline_config()), Milestone::unc);
  EXPECT_EQ(training_filter_milestone(full_config()), Milestone::pp);
  EXPECT_EQ(training_filter_milestone(base_only_config({Milestone::book, Milestone::unc})), Milestone::book);
}

TEST(Manifest, SaveLoadRoundTripAndSchemaCheck) {
  const auto data = sim::generate(testing::tiny_world(3, 120)).dataset;
  ModelConfig c = full_config(2);
  c.training.epochs = 1;
  const auto r = train(c, prepare_training_data(c, data).dataset);
  const auto dir = testing::scratch_dir("model");
  save_model(r.model, dir);
  const MilestoneRanker back = load_model(dir);
  EXPECT_TRUE(back.params() == r.model.params());
  EXPECT_TRUE(back.config() == r.model.config());
  EXPECT_TRUE(back.normalizer() == r.model.normalizer());
  EXPECT_EQ(back.task_weights(), r.model.task_weights());
  EXPECT_EQ(model_manifest(back).dump(), model_manifest(r.model).dump());
  EXPECT_NO_THROW(require_schema(back, data.schema));
  auto other = data.schema;
  other.window_days = 14.0;
  EXPECT_THROW(require_schema(back, other), SchemaMismatchError);
}

}  // namespace
}  // namespace funnelrank::model
