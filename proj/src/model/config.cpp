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

#include "funnelrank/model/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "funnelrank/util/hash.hpp"

namespace funnelrank::model {

namespace {

nn::MlpSpec make_spec(const TowerSpec& tower, Index in, Index out, std::uint64_t seed, const std::string& prefix) {
  nn::MlpSpec s;
  s.input_dim = in;
  s.hidden_dims = tower.hidden_dims;
  s.output_dim = out;
  s.activation = tower.activation;
  s.seed = util::derive_seed(seed, prefix);
  return s;
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ModelConfigError(key + ": " + what);
}

void check_tower(const TowerSpec& t, const std::string& key) {
  for (Index h : t.hidden_dims) require(h > 0, key + ".hidden_dims", "entries must be positive");
}

nlohmann::json tower_to_json(const TowerSpec& t) {
  return {{"hidden_dims", t.hidden_dims}, {"activation", std::string(nn::to_string(t.activation))}};
}

TowerSpec tower_from_json(const nlohmann::json& j, const std::string& key) {
  TowerSpec t;
  for (const auto& [k, _] : j.items()) {
    require(k == "hidden_dims" || k == "activation", key + "." + k, "unknown key");
  }
  if (j.contains("hidden_dims")) t.hidden_dims = j.at("hidden_dims").get<std::vector<Index>>();
  if (j.contains("activation")) {
    try {
      t.activation = nn::parse_activation(j.at("activation").get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ModelConfigError(key + ".activation: " + e.what());
    }
  }
  return t;
}

std::vector<std::string> names_of(const std::vector<Milestone>& tasks) {
  std::vector<std::string> out;
  for (Milestone m : tasks) out.emplace_back(journey::to_string(m));
  return out;
}

std::vector<Milestone> tasks_from_json(const nlohmann::json& j, const std::string& key) {
  std::vector<Milestone> out;
  for (const auto& name : j.get<std::vector<std::string>>()) {
    const auto m = journey::parse_milestone(name);
    require(m.has_value(), key, "unknown milestone '" + name + "'");
    out.push_back(*m);
  }
  return out;
}

}  // namespace

std::string base_head_prefix(Milestone task) { return "base/" + std::string(journey::to_string(task)); }
std::string twiddler_head_prefix(Milestone task) { return "twiddler/" + std::string(journey::to_string(task)); }

const TowerSpec& ModelConfig::head_for(Milestone task) const {
  auto it = head_overrides.find(task);
  return it == head_overrides.end() ? head : it->second;
}

nn::MlpSpec ModelConfig::listing_tower_spec() const {
  return make_spec(listing_tower, listing_feature_dim, embedding_dim, seed, kListingTowerPrefix);
}

nn::MlpSpec ModelConfig::context_tower_spec() const {
  return make_spec(context_tower, context_feature_dim, embedding_dim, seed, kContextTowerPrefix);
}

nn::MlpSpec ModelConfig::head_spec(Milestone task) const {
  const std::string prefix = journey::is_negative(task) ? twiddler_head_prefix(task) : base_head_prefix(task);
  return make_spec(head_for(task), 2 * embedding_dim, 1, seed, prefix);
}

nn::MlpSpec ModelConfig::combination_spec() const {
  return make_spec(combination, embedding_dim, combination_width(), seed, kCombinationPrefix);
}

void ModelConfig::validate() const {
  require(embedding_dim > 0, "embedding_dim", "must be positive");
  require(listing_feature_dim >= 0, "listing_feature_dim", "must be non-negative");
  require(context_feature_dim >= 0, "context_feature_dim", "must be non-negative");
  check_tower(listing_tower, "listing_tower");
  check_tower(context_tower, "context_tower");
  check_tower(head, "head");
  check_tower(combination, "combination");
  require(!base_tasks.empty(), "base_tasks", "must not be empty");
  for (std::size_t i = 0; i < base_tasks.size(); ++i) {
    require(journey::is_positive_chain(base_tasks[i]), "base_tasks",
            "'" + std::string(journey::to_string(base_tasks[i])) + "' is not a positive-chain milestone");
    if (i > 0) {
      require(journey::funnel_index(base_tasks[i - 1]) < journey::funnel_index(base_tasks[i]), "base_tasks",
              "must follow funnel order without repeats");
    }
  }
  require(base_tasks.back() == Milestone::unc, "base_tasks", "must end with unc");
  std::set<Milestone> seen;
  for (Milestone m : twiddler_tasks) {
    require(journey::is_negative(m), "twiddler_tasks",
            "'" + std::string(journey::to_string(m)) + "' is not one of rej, cbh, cbg");
    require(seen.insert(m).second, "twiddler_tasks", "duplicate task");
  }
  for (const auto& [m, t] : head_overrides) {
    const bool used = std::count(base_tasks.begin(), base_tasks.end(), m) > 0 ||
                      std::count(twiddler_tasks.begin(), twiddler_tasks.end(), m) > 0;
    require(used, "heads", "override for unused task '" + std::string(journey::to_string(m)) + "'");
    check_tower(t, "heads." + std::string(journey::to_string(m)));
  }
  require(std::isfinite(loss_weights.base) && loss_weights.base >= 0, "loss_weights.base", "must be >= 0");
  require(std::isfinite(loss_weights.twiddler) && loss_weights.twiddler >= 0, "loss_weights.twiddler",
          "must be >= 0");
  require(std::isfinite(loss_weights.combination) && loss_weights.combination >= 0, "loss_weights.combination",
          "must be >= 0");
  require(training.epochs >= 0, "epochs", "must be non-negative");
  require(training.batch_searches > 0, "batch_searches", "must be positive");
  require(training.adam.learning_rate > 0, "learning_rate", "must be positive");
  require(training.adam.beta1 >= 0 && training.adam.beta1 < 1, "beta1", "must be in [0, 1)");
  require(training.adam.beta2 >= 0 && training.adam.beta2 < 1, "beta2", "must be in [0, 1)");
  require(training.adam.epsilon > 0, "epsilon", "must be positive");
}

ModelConfig bind_schema(ModelConfig config, const journey::DatasetSchema& schema) {
  auto bind = [](Index& field, int width, const char* name) {
    if (field != 0 && field != width) {
      throw nn::ShapeError(std::string(name) + ": model expects " + std::to_string(field) + ", dataset has " +
                           std::to_string(width));
    }
    field = width;
  };
  bind(config.listing_feature_dim, schema.listing_dim, "listing_feature_dim");
  bind(config.context_feature_dim, schema.context_dim, "context_feature_dim");
  return config;
}

Index parameter_count(const ModelConfig& config) {
  Index n = config.listing_tower_spec().parameter_count() + config.context_tower_spec().parameter_count();
  for (Milestone m : config.base_tasks) n += config.head_spec(m).parameter_count();
  for (Milestone m : config.twiddler_tasks) n += config.head_spec(m).parameter_count();
  if (config.has_combination()) n += config.combination_spec().parameter_count();
  return n;
}

Milestone training_filter_milestone(const ModelConfig& config) {
  const Milestone first = config.base_tasks.front();
  return journey::funnel_index(first) > journey::funnel_index(Milestone::pp) ? first : Milestone::pp;
}

nlohmann::json config_to_json(const ModelConfig& c) {
  nlohmann::json heads = {{"default", tower_to_json(c.head)}};
  for (const auto& [m, t] : c.head_overrides) heads[std::string(journey::to_string(m))] = tower_to_json(t);
  return {{"name", c.name},
          {"listing_feature_dim", c.listing_feature_dim},
          {"context_feature_dim", c.context_feature_dim},
          {"listing_tower", tower_to_json(c.listing_tower)},
          {"context_tower", tower_to_json(c.context_tower)},
          {"embedding_dim", c.embedding_dim},
          {"base_tasks", names_of(c.base_tasks)},
          {"twiddler_tasks", names_of(c.twiddler_tasks)},
          {"heads", heads},
          {"combination", tower_to_json(c.combination)},
          {"loss_weights",
           {{"base", c.loss_weights.base}, {"twiddler", c.loss_weights.twiddler},
            {"combination", c.loss_weights.combination}}},
          {"alpha_gradient_to_shared", c.alpha_gradient_to_shared},
          {"epochs", c.training.epochs},
          {"batch_searches", c.training.batch_searches},
          {"learning_rate", c.training.adam.learning_rate},
          {"beta1", c.training.adam.beta1},
          {"beta2", c.training.adam.beta2},
          {"epsilon", c.training.adam.epsilon},
          {"seed", c.seed}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  static const std::set<std::string> kKeys = {
      "name",         "listing_feature_dim", "context_feature_dim", "listing_tower", "context_tower",
      "embedding_dim", "base_tasks",         "twiddler_tasks",      "heads",         "combination",
      "loss_weights", "alpha_gradient_to_shared", "epochs",         "batch_searches", "learning_rate",
      "beta1",        "beta2",               "epsilon",             "seed"};
  require(j.is_object(), "config", "must be a JSON object");
  for (const auto& [key, _] : j.items()) require(kKeys.count(key) > 0, key, "unknown key");
  ModelConfig c;
  try {
    if (j.contains("name")) c.name = j.at("name").get<std::string>();
    if (j.contains("listing_feature_dim")) c.listing_feature_dim = j.at("listing_feature_dim").get<Index>();
    if (j.contains("context_feature_dim")) c.context_feature_dim = j.at("context_feature_dim").get<Index>();
    if (j.contains("listing_tower")) c.listing_tower = tower_from_json(j.at("listing_tower"), "listing_tower");
    if (j.contains("context_tower")) c.context_tower = tower_from_json(j.at("context_tower"), "context_tower");
    if (j.contains("embedding_dim")) c.embedding_dim = j.at("embedding_dim").get<Index>();
    if (j.contains("base_tasks")) c.base_tasks = tasks_from_json(j.at("base_tasks"), "base_tasks");
    if (j.contains("twiddler_tasks")) c.twiddler_tasks = tasks_from_json(j.at("twiddler_tasks"), "twiddler_tasks");
    if (j.contains("heads")) {
      for (const auto& [name, spec] : j.at("heads").items()) {
        if (name == "default") {
          c.head = tower_from_json(spec, "heads.default");
          continue;
        }
        const auto m = journey::parse_milestone(name);
        require(m.has_value(), "heads", "unknown milestone '" + name + "'");
        c.head_overrides[*m] = tower_from_json(spec, "heads." + name);
      }
    }
    if (j.contains("combination")) c.combination = tower_from_json(j.at("combination"), "combination");
    if (j.contains("loss_weights")) {
      const auto& w = j.at("loss_weights");
      for (const auto& [k, _] : w.items()) {
        require(k == "base" || k == "twiddler" || k == "combination", "loss_weights." + k, "unknown key");
      }
      c.loss_weights.base = w.value("base", 1.0);
      c.loss_weights.twiddler = w.value("twiddler", 1.0);
      c.loss_weights.combination = w.value("combination", 1.0);
    }
    if (j.contains("alpha_gradient_to_shared")) {
      c.alpha_gradient_to_shared = j.at("alpha_gradient_to_shared").get<bool>();
    }
    if (j.contains("epochs")) c.training.epochs = j.at("epochs").get<int>();
    if (j.contains("batch_searches")) c.training.batch_searches = j.at("batch_searches").get<int>();
    if (j.contains("learning_rate")) c.training.adam.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("beta1")) c.training.adam.beta1 = j.at("beta1").get<double>();
    if (j.contains("beta2")) c.training.adam.beta2 = j.at("beta2").get<double>();
    if (j.contains("epsilon")) c.training.adam.epsilon = j.at("epsilon").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ModelConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ModelConfig baseline_config(std::uint64_t seed) {
  ModelConfig c;
  c.name = "baseline";
  c.seed = seed;
  return c;
}

ModelConfig base_only_config(const std::vector<Milestone>& tasks, std::uint64_t seed) {
  ModelConfig c;
  c.name = task_set_name(tasks);
  c.base_tasks = tasks;
  c.seed = seed;
  c.validate();
  return c;
}

ModelConfig full_config(std::uint64_t seed) {
  ModelConfig c;
  c.name = "full";
  c.base_tasks.assign(journey::kPositiveChain.begin(), journey::kPositiveChain.end());
  c.twiddler_tasks.assign(journey::kNegativeMilestones.begin(), journey::kNegativeMilestones.end());
  c.seed = seed;
  return c;
}

std::string task_set_name(const std::vector<Milestone>& tasks) {
  if (std::equal(tasks.begin(), tasks.end(), journey::kPositiveChain.begin(), journey::kPositiveChain.end())) {
    return "all6";
  }
  std::string out;
  for (Milestone m : tasks) {
    if (!out.empty()) out += '+';
    out += journey::to_string(m);
  }
  return out;
}

std::vector<Milestone> parse_task_set(const std::string& name) {
  if (name == "all6") return {journey::kPositiveChain.begin(), journey::kPositiveChain.end()};
  std::vector<Milestone> out;
  std::stringstream in(name);
  std::string part;
  while (std::getline(in, part, '+')) {
    const auto m = journey::parse_milestone(part);
    if (!m) throw ModelConfigError("task set: unknown milestone '" + part + "'");
    out.push_back(*m);
  }
  ModelConfig probe;
  probe.base_tasks = out;
  probe.validate();
  return out;
}

}  // namespace funnelrank::model
