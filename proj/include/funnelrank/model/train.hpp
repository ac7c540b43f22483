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

#include <stdexcept>
#include <string>
#include <vector>

#include "funnelrank/journey/labels.hpp"
#include "funnelrank/model/config.hpp"
#include "funnelrank/model/ranker.hpp"

namespace funnelrank::model {

/// Non-finite loss during training. `epoch` counts from 1.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(const std::string& what, int epoch) : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double base = 0.0;
  double twiddler = 0.0;
  double combination = 0.0;
  double total = 0.0;
  std::size_t batches = 0;
};

struct TrainResult {
  MilestoneRanker model;
  std::vector<EpochRecord> history;  // mean module losses over each epoch's batches
  std::size_t train_searches = 0;
};

/// empirical_task_weight for every base task of `config`.
TaskWeights compute_task_weights(const ModelConfig& config, const journey::Dataset& dataset);

/// Journeys reaching the config's training filter milestone.
journey::FilterResult prepare_training_data(const ModelConfig& config, const journey::Dataset& dataset);

/// Fits normalization and task weights on `dataset`, then runs Adam over
/// shuffled mini-batches of whole searches for config.training.epochs.
/// Deterministic given config.seed.
TrainResult train(const ModelConfig& config, const journey::Dataset& dataset);

/// epoch,base,twiddler,combination,total
std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace funnelrank::model
