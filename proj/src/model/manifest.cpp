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

#include "funnelrank/model/manifest.hpp"

#include <fstream>

#include "funnelrank/nn/serialize.hpp"

namespace funnelrank::model {

nlohmann::json model_manifest(const MilestoneRanker& model) {
  nlohmann::json weights = nlohmann::json::object();
  for (const auto& [m, w] : model.task_weights()) weights[std::string(journey::to_string(m))] = w;
  return {{"format", kModelFormat},
          {"config", config_to_json(model.config())},
          {"normalizer", model.normalizer().to_json()},
          {"task_weights", weights},
          {"schema_hash", model.schema_hash()},
          {"parameter_count", parameter_count(model.config())},
          {"parameters", "params.json"}};
}

void save_model(const MilestoneRanker& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nn::save_parameters(model.params(), dir, "params");
  std::ofstream out(dir / "model.json");
  out << model_manifest(model).dump(2) << '\n';
  if (!out) throw std::runtime_error("cannot write " + (dir / "model.json").string());
}

MilestoneRanker load_model(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) throw std::runtime_error("cannot read " + (dir / "model.json").string());
  const auto j = nlohmann::json::parse(in);
  if (j.value("format", "") != kModelFormat) throw std::runtime_error("unsupported model format in " + dir.string());
  ModelConfig config = config_from_json(j.at("config"));
  TaskWeights weights;
  for (const auto& [name, w] : j.at("task_weights").items()) weights[journey::milestone_from_string(name)] = w;
  auto params = nn::load_parameters<double>(dir, "params");
  return MilestoneRanker(std::move(config), Normalizer::from_json(j.at("normalizer")), std::move(weights),
                         j.at("schema_hash").get<std::string>(), std::move(params));
}

void require_schema(const MilestoneRanker& model, const journey::DatasetSchema& schema) {
  const std::string hash = schema.hash();
  if (hash != model.schema_hash()) {
    throw SchemaMismatchError("dataset schema " + hash + " does not match the model's training schema " +
                              model.schema_hash());
  }
}

}  // namespace funnelrank::model
