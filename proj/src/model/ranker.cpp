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

#include "funnelrank/model/ranker.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "funnelrank/model/losses.hpp"

namespace funnelrank::model {

namespace {

std::vector<std::uint8_t> label_mask(const Batch& batch, Milestone m) {
  std::vector<std::uint8_t> out(batch.labels.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = batch.labels[i][m] ? 1 : 0;
  return out;
}

Eigen::VectorXd column(const Var& v) { return v.value().col(0); }

}  // namespace

Params init_parameters(const ModelConfig& config) {
  config.validate();
  if (config.listing_feature_dim <= 0 || config.context_feature_dim <= 0) {
    throw nn::ContractError("init_parameters: config is not bound to a dataset schema");
  }
  Params p;
  nn::init_mlp(config.listing_tower_spec(), kListingTowerPrefix, p);
  nn::init_mlp(config.context_tower_spec(), kContextTowerPrefix, p);
  for (Milestone m : config.base_tasks) nn::init_mlp(config.head_spec(m), base_head_prefix(m), p);
  for (Milestone m : config.twiddler_tasks) nn::init_mlp(config.head_spec(m), twiddler_head_prefix(m), p);
  if (config.has_combination()) {
    const nn::MlpSpec spec = config.combination_spec();
    nn::init_mlp(spec, kCombinationPrefix, p);
    // Output layer starts at alpha_base = 1 and alpha_t = 0, i.e. at the base ranking.
    const Index last = static_cast<Index>(spec.hidden_dims.size());
    p.at(nn::layer_weight_name(kCombinationPrefix, last)).mutable_value().setZero();
    Eigen::MatrixXd& bias = p.at(nn::layer_bias_name(kCombinationPrefix, last)).mutable_value();
    bias.setZero();
    bias(0, 0) = std::log(std::expm1(1.0));
  }
  return p;
}

Embeddings shared_forward(const ModelConfig& config, Params& params, Tape& tape, const Eigen::MatrixXd& listing,
                          const Eigen::MatrixXd& context, const std::vector<Index>& context_of_row) {
  if (context_of_row.empty() ? context.rows() != listing.rows()
                             : static_cast<Index>(context_of_row.size()) != listing.rows()) {
    throw nn::ShapeError("shared_forward: context rows do not line up with impression rows");
  }
  Embeddings e;
  e.listing = nn::forward_mlp(config.listing_tower_spec(), kListingTowerPrefix, params, tape.constant(listing));
  Var per_context = nn::forward_mlp(config.context_tower_spec(), kContextTowerPrefix, params, tape.constant(context));
  e.context = context_of_row.empty() ? per_context : nn::gather_rows(per_context, context_of_row);
  return e;
}

BaseOutputs base_forward(const ModelConfig& config, Params& params, const Embeddings& emb) {
  const Var joint_input = nn::concat_cols(emb.listing, emb.context);
  BaseOutputs out;
  for (Milestone m : config.base_tasks) {
    Var logit = nn::forward_mlp(config.head_spec(m), base_head_prefix(m), params, joint_input);
    Var step = nn::log_sigmoid(logit);
    out.cond_logits.push_back(logit);
    out.log_joint.push_back(out.log_joint.empty() ? step : out.log_joint.back() + step);
  }
  return out;
}

Var base_loss(const ModelConfig& config, const BaseOutputs& base, const Batch& batch, const TaskWeights& weights) {
  if (base.log_joint.size() != config.base_tasks.size()) throw nn::ContractError("base_loss: task count mismatch");
  std::optional<Var> total;
  for (std::size_t k = 0; k < config.base_tasks.size(); ++k) {
    const Milestone m = config.base_tasks[k];
    auto w = weights.find(m);
    if (w == weights.end()) {
      throw nn::ContractError("base_loss: no task weight for " + std::string(journey::to_string(m)));
    }
    Var term = listwise_softmax_loss(base.log_joint[k], batch.spans, label_mask(batch, m), w->second);
    total = total ? *total + term : term;
  }
  return *total;
}

std::vector<Var> twiddler_forward(const ModelConfig& config, Params& params, const Embeddings& emb) {
  std::vector<Var> out;
  if (config.twiddler_tasks.empty()) return out;
  const Var joint_input = nn::concat_cols(emb.listing, emb.context);
  for (Milestone m : config.twiddler_tasks) {
    out.push_back(nn::forward_mlp(config.head_spec(m), twiddler_head_prefix(m), params, joint_input));
  }
  return out;
}

Var twiddler_loss(const ModelConfig& config, const std::vector<Var>& y_twiddler, const Batch& batch) {
  if (y_twiddler.size() != config.twiddler_tasks.size()) {
    throw nn::ContractError("twiddler_loss: task count mismatch");
  }
  if (y_twiddler.empty()) throw nn::ContractError("twiddler_loss: config has no twiddler tasks");
  std::optional<Var> total;
  for (std::size_t k = 0; k < y_twiddler.size(); ++k) {
    const Milestone m = config.twiddler_tasks[k];
    const Milestone gate = m == Milestone::rej ? Milestone::req : Milestone::book;
    Var term = masked_bce_loss(y_twiddler[k], label_mask(batch, gate), label_mask(batch, m));
    total = total ? *total + term : term;
  }
  return *total;
}

CombinationOutputs combination_forward(const ModelConfig& config, Params& params, const Embeddings& emb,
                                       const Var& y_base, const std::vector<Var>& y_twiddler) {
  if (y_twiddler.size() != config.twiddler_tasks.size()) {
    throw nn::ContractError("combination_forward: twiddler count mismatch");
  }
  const Var context = config.alpha_gradient_to_shared ? emb.context : nn::stop_gradient(emb.context);
  const Var alphas = nn::forward_mlp(config.combination_spec(), kCombinationPrefix, params, context);
  CombinationOutputs out;
  out.alpha_base = nn::softplus(nn::col(alphas, 0));
  Var y = nn::cwise_product(out.alpha_base, nn::stop_gradient(y_base));
  for (std::size_t t = 0; t < y_twiddler.size(); ++t) {
    Var a = nn::col(alphas, static_cast<Index>(t) + 1);
    out.alpha_twiddler.push_back(a);
    y = y + nn::cwise_product(a, nn::stop_gradient(y_twiddler[t]));
  }
  out.y_combination = y;
  return out;
}

Var combination_loss(const Var& y_combination, const Batch& batch) {
  std::vector<int> grades(batch.labels.size());
  for (std::size_t i = 0; i < grades.size(); ++i) grades[i] = relevance_grade(batch.labels[i]);
  return pairwise_logistic_loss(y_combination, batch.spans, grades);
}

ForwardPass forward(const ModelConfig& config, Params& params, Tape& tape, const Batch& batch) {
  ForwardPass pass;
  pass.emb = shared_forward(config, params, tape, batch.listing, batch.context, batch.search_of_row);
  pass.base = base_forward(config, params, pass.emb);
  pass.y_base = pass.base.log_joint.back();
  pass.y_twiddler = twiddler_forward(config, params, pass.emb);
  if (config.has_combination()) {
    pass.combination = combination_forward(config, params, pass.emb, pass.y_base, pass.y_twiddler);
  }
  return pass;
}

LossTerms total_loss(const ModelConfig& config, const ForwardPass& pass, const Batch& batch,
                     const TaskWeights& weights) {
  Tape& tape = pass.y_base.tape();
  auto zero = [&tape] { return tape.constant(Eigen::MatrixXd::Zero(1, 1)); };
  auto scaled = [](double w, const Var& v) { return w == 1.0 ? v : w * v; };
  LossTerms t;
  t.base = base_loss(config, pass.base, batch, weights);
  t.twiddler = pass.y_twiddler.empty() ? zero() : twiddler_loss(config, pass.y_twiddler, batch);
  t.combination = pass.combination ? combination_loss(pass.combination->y_combination, batch) : zero();
  t.total = scaled(config.loss_weights.base, t.base);
  if (!pass.y_twiddler.empty()) t.total = t.total + scaled(config.loss_weights.twiddler, t.twiddler);
  if (pass.combination) t.total = t.total + scaled(config.loss_weights.combination, t.combination);
  return t;
}

ModelOutputs extract_outputs(const ModelConfig& config, const ForwardPass& pass) {
  ModelOutputs o;
  for (std::size_t k = 0; k < config.base_tasks.size(); ++k) {
    o.cond_logits[config.base_tasks[k]] = column(pass.base.cond_logits[k]);
    o.log_joint[config.base_tasks[k]] = column(pass.base.log_joint[k]);
  }
  o.y_base = column(pass.y_base);
  for (std::size_t t = 0; t < config.twiddler_tasks.size(); ++t) {
    o.y_twiddler[config.twiddler_tasks[t]] = column(pass.y_twiddler[t]);
  }
  if (pass.combination) {
    o.alpha_base = column(pass.combination->alpha_base);
    for (std::size_t t = 0; t < config.twiddler_tasks.size(); ++t) {
      o.alpha_twiddler[config.twiddler_tasks[t]] = column(pass.combination->alpha_twiddler[t]);
    }
    o.y_combination = column(pass.combination->y_combination);
  }
  return o;
}

MilestoneRanker::MilestoneRanker(ModelConfig config, Normalizer normalizer, TaskWeights task_weights,
                                 std::string schema_hash)
    : config_(std::move(config)),
      normalizer_(std::move(normalizer)),
      task_weights_(std::move(task_weights)),
      schema_hash_(std::move(schema_hash)),
      params_(init_parameters(config_)) {}

MilestoneRanker::MilestoneRanker(ModelConfig config, Normalizer normalizer, TaskWeights task_weights,
                                 std::string schema_hash, Params params)
    : config_(std::move(config)),
      normalizer_(std::move(normalizer)),
      task_weights_(std::move(task_weights)),
      schema_hash_(std::move(schema_hash)),
      params_(std::move(params)) {
  const Params expected = init_parameters(config_);
  for (const auto& [name, t] : expected) {
    if (!params_.contains(name)) throw nn::ContractError("model parameters lack " + name);
    if (params_.at(name).shape() != t.shape()) throw nn::ShapeError("parameter " + name + " has the wrong shape");
  }
  if (params_.size() != expected.size()) throw nn::ContractError("model parameters contain unknown entries");
}

ModelOutputs MilestoneRanker::predict(const Batch& batch) const {
  // Inference runs on a gradient-free copy so the model itself is never touched.
  Params frozen = params_;
  for (auto& [_, t] : frozen) t.set_requires_grad(false);
  Tape tape;
  return extract_outputs(config_, forward(config_, frozen, tape, batch));
}

Eigen::MatrixXd MilestoneRanker::alphas(const Eigen::MatrixXd& context) const {
  if (!config_.has_combination()) throw nn::ContractError("alphas: model has no combination module");
  if (context.cols() != config_.context_feature_dim) {
    throw nn::ShapeError("alphas: context has width " + std::to_string(context.cols()));
  }
  Params frozen = params_;
  for (auto& [_, t] : frozen) t.set_requires_grad(false);
  Tape tape;
  const Var emb = nn::forward_mlp(config_.context_tower_spec(), kContextTowerPrefix, frozen, tape.constant(context));
  const Var raw = nn::forward_mlp(config_.combination_spec(), kCombinationPrefix, frozen, emb);
  Eigen::MatrixXd out = raw.value();
  out.col(0) = nn::softplus(nn::col(raw, 0)).value().col(0);
  return out;
}

std::vector<ScoredCandidate> MilestoneRanker::score(
    const Eigen::VectorXd& context, const std::vector<std::pair<ListingId, Eigen::VectorXd>>& candidates) const {
  if (candidates.empty()) throw nn::ContractError("score: empty candidate list");
  const Index n = static_cast<Index>(candidates.size());
  Eigen::MatrixXd listing(n, config_.listing_feature_dim);
  Batch batch;
  for (Index i = 0; i < n; ++i) {
    const auto& features = candidates[static_cast<std::size_t>(i)].second;
    if (features.size() != config_.listing_feature_dim) {
      throw nn::ShapeError("score: candidate features have width " + std::to_string(features.size()));
    }
    listing.row(i) = features.transpose();
    batch.listing_ids.push_back(candidates[static_cast<std::size_t>(i)].first);
    batch.search_of_row.push_back(0);
  }
  if (context.size() != config_.context_feature_dim) {
    throw nn::ShapeError("score: context has width " + std::to_string(context.size()));
  }
  batch.listing = normalizer_.listing(listing);
  batch.context = normalizer_.context(context.transpose());
  batch.spans.push_back({0, n});
  batch.labels.resize(static_cast<std::size_t>(n));
  const ModelOutputs o = predict(batch);

  std::vector<ScoredCandidate> out(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    auto& c = out[static_cast<std::size_t>(i)];
    c.listing_id = batch.listing_ids[static_cast<std::size_t>(i)];
    c.score = o.final_score()[i];
    for (const auto& [m, v] : o.cond_logits) c.outputs["cond_logit/" + std::string(journey::to_string(m))] = v[i];
    for (const auto& [m, v] : o.log_joint) c.outputs["log_joint/" + std::string(journey::to_string(m))] = v[i];
    c.outputs["y_base"] = o.y_base[i];
    for (const auto& [m, v] : o.y_twiddler) c.outputs["y_twiddler/" + std::string(journey::to_string(m))] = v[i];
    if (o.y_combination.size()) {
      c.outputs["alpha_base"] = o.alpha_base[i];
      for (const auto& [m, v] : o.alpha_twiddler) {
        c.outputs["alpha_twiddler/" + std::string(journey::to_string(m))] = v[i];
      }
      c.outputs["y_combination"] = o.y_combination[i];
    }
  }
  const auto order = rank_order(o.final_score(), batch.listing_ids);
  std::vector<ScoredCandidate> ranked;
  ranked.reserve(out.size());
  for (std::size_t i : order) ranked.push_back(std::move(out[i]));
  return ranked;
}

std::vector<std::size_t> rank_order(const Eigen::VectorXd& scores, const std::vector<ListingId>& ids) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double sa = scores[static_cast<Index>(a)];
    const double sb = scores[static_cast<Index>(b)];
    if (sa != sb) return sa > sb;
    return ids[a] < ids[b];
  });
  return order;
}

}  // namespace funnelrank::model
