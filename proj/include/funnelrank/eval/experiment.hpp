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
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "funnelrank/eval/evaluate.hpp"
#include "funnelrank/model/config.hpp"
#include "funnelrank/model/data.hpp"
#include "funnelrank/model/train.hpp"

namespace funnelrank::eval {

class InsufficientSeedsError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Student-t interval for the mean of `values`.
struct TInterval {
  std::size_t n = 0;
  double mean = 0.0;
  double half_width = 0.0;

  double low() const { return mean - half_width; }
  double high() const { return mean + half_width; }
  bool excludes_zero() const { return low() > 0.0 || high() < 0.0; }
};
/// Throws InsufficientSeedsError for fewer than two values.
TInterval t_interval(const std::vector<double>& values, double level = 0.95);

/// Seeds base_seed, base_seed + 1, ...
std::vector<std::uint64_t> seed_range(std::uint64_t base_seed, int n);

/// One config trained with one seed on the train split, scored on the eval split.
struct RunResult {
  std::string config_name;
  std::uint64_t seed = 0;
  EvalReport report;
  nn::Index parameter_count = 0;
  std::size_t train_searches = 0;
  std::vector<model::EpochRecord> history;

  double ndcg() const { return report.overall.mean; }
};

RunResult run_one(const model::ModelConfig& config, const model::DatasetSplit& data, std::uint64_t seed);

/// results[c][s] for configs[c] and seeds[s]. Independent runs spread over
/// `jobs` threads; the output does not depend on `jobs`.
std::vector<std::vector<RunResult>> run_grid(const std::vector<model::ModelConfig>& configs,
                                             const model::DatasetSplit& data, const std::vector<std::uint64_t>& seeds,
                                             int jobs = 1);

struct NdcgSummary {
  std::vector<double> per_seed;
  double mean = 0.0;
  double ci_half_width = 0.0;
  std::size_t n_searches = 0;

  nlohmann::json to_json() const;
};
NdcgSummary summarize_runs(const std::vector<RunResult>& runs);

struct CompareReport {
  std::string name_a;
  std::string name_b;
  std::vector<std::uint64_t> seeds;
  NdcgSummary a;
  NdcgSummary b;
  std::vector<double> delta;  // per seed, a - b
  TInterval delta_ci;
  double relative_delta_pct = 0.0;  // mean delta over mean of b

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Paired per-seed comparison of completed runs (same seeds, same data).
CompareReport compare_runs(const std::vector<RunResult>& a, const std::vector<RunResult>& b);

/// Trains A and B for seeds base_seed .. base_seed + n_seeds - 1.
CompareReport compare(const model::ModelConfig& a, const model::ModelConfig& b, const model::DatasetSplit& data,
                      int n_seeds = 5, std::uint64_t base_seed = 0, int jobs = 1);

struct AblationCell {
  std::string name;
  std::vector<journey::Milestone> tasks;
  NdcgSummary ndcg;
  std::vector<double> delta;  // per seed vs the unc-only cell
  TInterval delta_ci;
  double relative_delta_pct = 0.0;
  double relative_half_width_pct = 0.0;
  nn::Index parameters = 0;
  nn::Index parameter_delta = 0;
  double parameter_delta_pct = 0.0;
  std::size_t searches = 0;
  long long search_delta = 0;
  double search_delta_pct = 0.0;
};

struct AblationReport {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationCell> cells;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// unc | req+book+unc | c+unc | all6.
std::vector<std::vector<journey::Milestone>> default_ablation_cells();

/// Base-module-only configs built from `base` (its towers, heads and
/// training options) with each task set. The unc-only cell is the reference
/// and is added when absent.
AblationReport run_ablation(const model::DatasetSplit& data, const std::vector<std::vector<journey::Milestone>>& cells,
                            const model::ModelConfig& base, int n_seeds = 5, std::uint64_t base_seed = 0,
                            int jobs = 1);

}  // namespace funnelrank::eval
