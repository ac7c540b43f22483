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

#include "funnelrank/model/train.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "funnelrank/nn/optimizer.hpp"
#include "funnelrank/util/hash.hpp"

namespace funnelrank::model {

TaskWeights compute_task_weights(const ModelConfig& config, const journey::Dataset& dataset) {
  TaskWeights w;
  for (Milestone m : config.base_tasks) w[m] = journey::empirical_task_weight(dataset, m);
  return w;
}

journey::FilterResult prepare_training_data(const ModelConfig& config, const journey::Dataset& dataset) {
  return journey::filter_training_searches(dataset, training_filter_milestone(config));
}

TrainResult train(const ModelConfig& config_in, const journey::Dataset& dataset) {
  const ModelConfig config = bind_schema(config_in, dataset.schema);
  config.validate();
  TrainResult result;
  result.model = MilestoneRanker(config, Normalizer::fit(dataset), compute_task_weights(config, dataset),
                                 dataset.schema.hash());
  result.train_searches = dataset.search_count();
  if (config.training.epochs == 0) return result;

  const FlatData data = flatten(dataset, result.model.normalizer());
  const TaskWeights& weights = result.model.task_weights();
  Params& params = result.model.mutable_params();
  nn::AdamOptimizer<double> adam(config.training.adam);
  std::mt19937_64 rng(util::derive_seed(config.seed, "batches"));

  std::vector<Index> order(data.all.spans.size());
  std::iota(order.begin(), order.end(), Index{0});
  const std::size_t batch_size = static_cast<std::size_t>(config.training.batch_searches);

  for (int epoch = 1; epoch <= config.training.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t len = std::min(batch_size, order.size() - start);
      const Batch batch = make_batch(data, std::span<const Index>(order.data() + start, len));
      Tape tape;
      const ForwardPass pass = forward(config, params, tape, batch);
      const LossTerms loss = total_loss(config, pass, batch, weights);
      const double total = loss.total.value()(0, 0);
      if (!std::isfinite(total)) {
        throw TrainingError("training diverged: non-finite loss in epoch " + std::to_string(epoch), epoch);
      }
      tape.backward(loss.total);
      adam.step(params);
      rec.base += loss.base.value()(0, 0);
      rec.twiddler += loss.twiddler.value()(0, 0);
      rec.combination += loss.combination.value()(0, 0);
      rec.total += total;
      ++rec.batches;
    }
    if (rec.batches > 0) {
      const double n = static_cast<double>(rec.batches);
      rec.base /= n;
      rec.twiddler /= n;
      rec.combination /= n;
      rec.total /= n;
    }
    result.history.push_back(rec);
  }
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,base,twiddler,combination,total\n" << std::setprecision(17);
  for (const auto& r : history) {
    out << r.epoch << ',' << r.base << ',' << r.twiddler << ',' << r.combination << ',' << r.total << '\n';
  }
  return out.str();
}

}  // namespace funnelrank::model
