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
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "funnelrank/journey/milestone.hpp"
#include "funnelrank/journey/records.hpp"
#include "funnelrank/nn/mlp.hpp"
#include "funnelrank/nn/optimizer.hpp"

namespace funnelrank::model {

using journey::Milestone;
using nn::Index;

class ModelConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Hidden layout of one MLP. Input and output widths follow from the model
/// layout and the dataset schema.
struct TowerSpec {
  std::vector<Index> hidden_dims;
  nn::Activation activation = nn::Activation::kRelu;

  friend bool operator==(const TowerSpec&, const TowerSpec&) = default;
};

struct LossWeights {
  double base = 1.0;
  double twiddler = 1.0;
  double combination = 1.0;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct TrainingOptions {
  int epochs = 8;
  int batch_searches = 32;  // searches per mini-batch; a search is never split
  nn::AdamOptions adam{0.003, 0.9, 0.999, 1e-8};

  friend bool operator==(const TrainingOptions& a, const TrainingOptions& b) {
    return a.epochs == b.epochs && a.batch_searches == b.batch_searches &&
           a.adam.learning_rate == b.adam.learning_rate && a.adam.beta1 == b.adam.beta1 &&
           a.adam.beta2 == b.adam.beta2 && a.adam.epsilon == b.adam.epsilon;
  }
};

struct ModelConfig {
  std::string name = "model";
  // Feature widths; 0 means "take from the dataset schema".
  Index listing_feature_dim = 0;
  Index context_feature_dim = 0;
  TowerSpec listing_tower{{32}, nn::Activation::kRelu};
  TowerSpec context_tower{{16}, nn::Activation::kRelu};
  Index embedding_dim = 16;
  std::vector<Milestone> base_tasks{Milestone::unc};
  std::vector<Milestone> twiddler_tasks;
  TowerSpec head{{16}, nn::Activation::kRelu};   // default for every task head
  std::map<Milestone, TowerSpec> head_overrides;  // per-task replacement
  TowerSpec combination{{16}, nn::Activation::kRelu};
  LossWeights loss_weights;
  // When false the alpha MLP sees a gradient-stopped context embedding.
  bool alpha_gradient_to_shared = true;
  TrainingOptions training;
  std::uint64_t seed = 0;

  /// Combination module is present exactly when twiddlers are.
  bool has_combination() const { return !twiddler_tasks.empty(); }
  Index combination_width() const { return 1 + static_cast<Index>(twiddler_tasks.size()); }

  const TowerSpec& head_for(Milestone task) const;

  // Fully resolved layer specs, seeded from `seed` and the parameter prefix.
  nn::MlpSpec listing_tower_spec() const;
  nn::MlpSpec context_tower_spec() const;
  nn::MlpSpec head_spec(Milestone task) const;
  nn::MlpSpec combination_spec() const;

  /// Throws ModelConfigError naming the offending key.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Parameter prefixes.
inline const std::string kListingTowerPrefix = "shared/listing";
inline const std::string kContextTowerPrefix = "shared/context";
inline const std::string kCombinationPrefix = "combination";
std::string base_head_prefix(Milestone task);
std::string twiddler_head_prefix(Milestone task);

/// Fills zero feature widths from `schema`; throws nn::ShapeError when a
/// width is set and disagrees.
ModelConfig bind_schema(ModelConfig config, const journey::DatasetSchema& schema);

/// Exact trainable parameter count of a schema-bound config.
Index parameter_count(const ModelConfig& config);

/// Milestone whose presence selects training journeys: the later (in funnel
/// order) of pp and the first base task.
Milestone training_filter_milestone(const ModelConfig& config);

nlohmann::json config_to_json(const ModelConfig& config);
/// Missing keys take defaults; unknown keys raise ModelConfigError.
ModelConfig config_from_json(const nlohmann::json& j);

// Presets.
ModelConfig baseline_config(std::uint64_t seed = 0);
ModelConfig base_only_config(const std::vector<Milestone>& tasks, std::uint64_t seed = 0);
ModelConfig full_config(std::uint64_t seed = 0);

/// Ablation cell name: task names joined by '+', "all6" for the whole chain.
std::string task_set_name(const std::vector<Milestone>& tasks);
std::vector<Milestone> parse_task_set(const std::string& name);

}  // namespace funnelrank::model
