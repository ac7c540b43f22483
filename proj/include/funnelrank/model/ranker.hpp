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

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "funnelrank/model/config.hpp"
#include "funnelrank/model/data.hpp"
#include "funnelrank/nn/mlp.hpp"
#include "funnelrank/nn/ops.hpp"
#include "funnelrank/nn/tape.hpp"
#include "funnelrank/nn/tensor.hpp"

namespace funnelrank::model {

using Params = nn::ParameterStore<double>;
using Var = nn::Var<double>;
using Tape = nn::Tape<double>;
using TaskWeights = std::map<Milestone, double>;

/// Fresh parameters for a schema-bound config.
Params init_parameters(const ModelConfig& config);

/// Listing and context embeddings, one row per impression.
struct Embeddings {
  Var listing;
  Var context;
};

/// `context` holds one row per search (or per impression when
/// `context_of_row` is empty); the context tower runs once per row of it
/// and the result is gathered to impression rows.
Embeddings shared_forward(const ModelConfig& config, Params& params, Tape& tape, const Eigen::MatrixXd& listing,
                          const Eigen::MatrixXd& context, const std::vector<Index>& context_of_row = {});

struct BaseOutputs {
  std::vector<Var> cond_logits;  // per base task, rows x 1
  std::vector<Var> log_joint;    // running sum of log sigmoid(cond_logits)
};
BaseOutputs base_forward(const ModelConfig& config, Params& params, const Embeddings& emb);

/// Sum over base tasks of weight * listwise softmax loss on log_joint.
Var base_loss(const ModelConfig& config, const BaseOutputs& base, const Batch& batch, const TaskWeights& weights);

/// One logit column per twiddler task.
std::vector<Var> twiddler_forward(const ModelConfig& config, Params& params, const Embeddings& emb);

/// Masked BCE per task: rej over requests, cbh and cbg over bookings.
Var twiddler_loss(const ModelConfig& config, const std::vector<Var>& y_twiddler, const Batch& batch);

struct CombinationOutputs {
  Var alpha_base;                   // softplus of the first alpha column, > 0
  std::vector<Var> alpha_twiddler;  // unconstrained
  Var y_combination;
};
/// Alpha MLP on the context embedding; scores enter gradient-stopped.
CombinationOutputs combination_forward(const ModelConfig& config, Params& params, const Embeddings& emb,
                                       const Var& y_base, const std::vector<Var>& y_twiddler);

Var combination_loss(const Var& y_combination, const Batch& batch);

struct ForwardPass {
  Embeddings emb;
  BaseOutputs base;
  Var y_base;
  std::vector<Var> y_twiddler;
  std::optional<CombinationOutputs> combination;

  const Var& final_score() const { return combination ? combination->y_combination : y_base; }
};
ForwardPass forward(const ModelConfig& config, Params& params, Tape& tape, const Batch& batch);

struct LossTerms {
  Var base;
  Var twiddler;
  Var combination;
  Var total;
};
/// total = weighted sum of the module losses (all weights 1 by default).
LossTerms total_loss(const ModelConfig& config, const ForwardPass& pass, const Batch& batch,
                     const TaskWeights& weights);

/// Plain-value copy of every intermediate output, one entry per row.
struct ModelOutputs {
  std::map<Milestone, Eigen::VectorXd> cond_logits;
  std::map<Milestone, Eigen::VectorXd> log_joint;
  Eigen::VectorXd y_base;
  std::map<Milestone, Eigen::VectorXd> y_twiddler;
  Eigen::VectorXd alpha_base;  // empty without a combination module
  std::map<Milestone, Eigen::VectorXd> alpha_twiddler;
  Eigen::VectorXd y_combination;  // empty without a combination module

  const Eigen::VectorXd& final_score() const { return y_combination.size() ? y_combination : y_base; }
};
ModelOutputs extract_outputs(const ModelConfig& config, const ForwardPass& pass);

/// One candidate's result from `score`.
struct ScoredCandidate {
  ListingId listing_id = 0;
  double score = 0.0;
  std::map<std::string, double> outputs;  // every intermediate value by name
};

/// A trained model: schema-bound config, normalization, task weights and
/// parameters. Scoring never mutates it.
class MilestoneRanker {
 public:
  MilestoneRanker() = default;
  MilestoneRanker(ModelConfig config, Normalizer normalizer, TaskWeights task_weights, std::string schema_hash);
  MilestoneRanker(ModelConfig config, Normalizer normalizer, TaskWeights task_weights, std::string schema_hash,
                  Params params);

  const ModelConfig& config() const { return config_; }
  const Normalizer& normalizer() const { return normalizer_; }
  const TaskWeights& task_weights() const { return task_weights_; }
  const std::string& schema_hash() const { return schema_hash_; }
  const Params& params() const { return params_; }
  Params& mutable_params() { return params_; }

  /// Outputs for every row of an already-normalized batch.
  ModelOutputs predict(const Batch& batch) const;

  /// Combination coefficients for normalized context rows: column 0 is
  /// alpha_base, then one column per twiddler task. Needs a combination module.
  Eigen::MatrixXd alphas(const Eigen::MatrixXd& context) const;

  /// Ranks raw candidates for one raw context by final score, descending;
  /// ties by listing id.
  std::vector<ScoredCandidate> score(const Eigen::VectorXd& context,
                                     const std::vector<std::pair<ListingId, Eigen::VectorXd>>& candidates) const;

 private:
  ModelConfig config_;
  Normalizer normalizer_;
  TaskWeights task_weights_;
  std::string schema_hash_;
  Params params_;
};

/// Indices of `scores` sorted descending, ties by ascending id.
std::vector<std::size_t> rank_order(const Eigen::VectorXd& scores, const std::vector<ListingId>& ids);

}  // namespace funnelrank::model
