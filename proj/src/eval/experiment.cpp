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

#include "funnelrank/eval/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <boost/math/distributions/students_t.hpp>

#include "funnelrank/util/table.hpp"

namespace funnelrank::eval {

namespace {

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double pct(double delta, double reference) { return reference == 0.0 ? 0.0 : 100.0 * delta / reference; }

nlohmann::json interval_json(const TInterval& t) {
  return {{"n", t.n}, {"mean", t.mean}, {"half_width", t.half_width}, {"low", t.low()}, {"high", t.high()}};
}

RunResult run_on(const model::ModelConfig& config, const journey::Dataset& train, const journey::Dataset& eval_set,
                 std::uint64_t seed) {
  model::ModelConfig c = config;
  c.seed = seed;
  model::TrainResult trained = model::train(c, train);
  RunResult r;
  r.config_name = c.name;
  r.seed = seed;
  r.report = evaluate(trained.model, eval_set);
  r.parameter_count = model::parameter_count(trained.model.config());
  r.train_searches = trained.train_searches;
  r.history = std::move(trained.history);
  return r;
}

// Runs fn(0..n-1) on up to `jobs` threads; rethrows the first failure.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

TInterval t_interval(const std::vector<double>& values, double level) {
  if (values.size() < 2) {
    throw InsufficientSeedsError("a confidence interval needs at least 2 seeds, got " + std::to_string(values.size()));
  }
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must be in (0, 1)");
  TInterval t;
  t.n = values.size();
  t.mean = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - t.mean) * (v - t.mean);
  const double n = static_cast<double>(t.n);
  const double sd = std::sqrt(ss / (n - 1.0));
  boost::math::students_t dist(n - 1.0);
  const double q = boost::math::quantile(dist, 0.5 + level / 2.0);
  t.half_width = q * sd / std::sqrt(n);
  return t;
}

std::vector<std::uint64_t> seed_range(std::uint64_t base_seed, int n) {
  if (n < 0) throw std::invalid_argument("seed count must be non-negative");
  std::vector<std::uint64_t> out;
  for (int i = 0; i < n; ++i) out.push_back(base_seed + static_cast<std::uint64_t>(i));
  return out;
}

RunResult run_one(const model::ModelConfig& config, const model::DatasetSplit& data, std::uint64_t seed) {
  const journey::FilterResult filtered = model::prepare_training_data(config, data.train);
  return run_on(config, filtered.dataset, data.eval, seed);
}

std::vector<std::vector<RunResult>> run_grid(const std::vector<model::ModelConfig>& configs,
                                             const model::DatasetSplit& data, const std::vector<std::uint64_t>& seeds,
                                             int jobs) {
  // Configs sharing a filter milestone share one filtered copy of the train split.
  std::map<Milestone, journey::Dataset> filtered;
  for (const auto& c : configs) {
    c.validate();
    const Milestone m = model::training_filter_milestone(c);
    if (!filtered.contains(m)) filtered.emplace(m, model::prepare_training_data(c, data.train).dataset);
  }
  std::vector<std::vector<RunResult>> out(configs.size(), std::vector<RunResult>(seeds.size()));
  parallel_for(configs.size() * seeds.size(), jobs, [&](std::size_t job) {
    const std::size_t c = job / seeds.size();
    const std::size_t s = job % seeds.size();
    const auto& train_set = filtered.at(model::training_filter_milestone(configs[c]));
    out[c][s] = run_on(configs[c], train_set, data.eval, seeds[s]);
  });
  return out;
}

nlohmann::json NdcgSummary::to_json() const {
  return {{"mean", mean}, {"per_seed", per_seed}, {"ci_half_width", ci_half_width}, {"n_searches", n_searches}};
}

NdcgSummary summarize_runs(const std::vector<RunResult>& runs) {
  NdcgSummary s;
  for (const auto& r : runs) s.per_seed.push_back(r.ndcg());
  s.mean = mean_of(s.per_seed);
  s.ci_half_width = s.per_seed.size() >= 2 ? t_interval(s.per_seed).half_width : 0.0;
  s.n_searches = runs.empty() ? 0 : runs.front().report.overall.searches;
  return s;
}

CompareReport compare_runs(const std::vector<RunResult>& a, const std::vector<RunResult>& b) {
  if (a.size() != b.size()) throw std::invalid_argument("compare: run lists differ in length");
  if (a.size() < 2) throw InsufficientSeedsError("compare needs at least 2 seeds, got " + std::to_string(a.size()));
  CompareReport r;
  r.name_a = a.front().config_name;
  r.name_b = b.front().config_name;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].seed != b[i].seed) throw std::invalid_argument("compare: runs are not paired by seed");
    r.seeds.push_back(a[i].seed);
    r.delta.push_back(a[i].ndcg() - b[i].ndcg());
  }
  r.a = summarize_runs(a);
  r.b = summarize_runs(b);
  r.delta_ci = t_interval(r.delta);
  r.relative_delta_pct = pct(r.delta_ci.mean, r.b.mean);
  return r;
}

CompareReport compare(const model::ModelConfig& a, const model::ModelConfig& b, const model::DatasetSplit& data,
                      int n_seeds, std::uint64_t base_seed, int jobs) {
  if (n_seeds < 2) throw InsufficientSeedsError("compare needs at least 2 seeds, got " + std::to_string(n_seeds));
  const auto grid = run_grid({a, b}, data, seed_range(base_seed, n_seeds), jobs);
  return compare_runs(grid[0], grid[1]);
}

nlohmann::json CompareReport::to_json() const {
  nlohmann::json seeds_json = nlohmann::json::array();
  for (auto s : seeds) seeds_json.push_back(s);
  return {{"a", {{"name", name_a}, {"ndcg", a.to_json()}}},
          {"b", {{"name", name_b}, {"ndcg", b.to_json()}}},
          {"seeds", seeds_json},
          {"delta", {{"per_seed", delta}, {"ci", interval_json(delta_ci)}, {"relative_pct", relative_delta_pct}}}};
}

std::string CompareReport::to_text() const {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    rows.push_back({std::to_string(seeds[i]), util::fixed(a.per_seed[i], 6), util::fixed(b.per_seed[i], 6),
                    util::signed_fixed(delta[i], 6)});
  }
  rows.push_back({"mean", util::fixed(a.mean, 6), util::fixed(b.mean, 6), util::signed_fixed(delta_ci.mean, 6)});
  std::ostringstream out;
  out << "A = " << name_a << ", B = " << name_b << "\n";
  out << util::format_table({"seed", "ndcg A", "ndcg B", "delta"}, rows);
  out << "delta 95% CI: " << util::signed_fixed(delta_ci.mean, 6) << " +/- " << util::fixed(delta_ci.half_width, 6)
      << " [" << util::signed_fixed(delta_ci.low(), 6) << ", " << util::signed_fixed(delta_ci.high(), 6) << "]"
      << " (" << util::signed_fixed(relative_delta_pct, 3) << "%)\n";
  return out.str();
}

std::vector<std::vector<journey::Milestone>> default_ablation_cells() {
  using M = journey::Milestone;
  return {{M::unc}, {M::req, M::book, M::unc}, {M::c, M::unc}, {M::c, M::lc, M::pp, M::req, M::book, M::unc}};
}

AblationReport run_ablation(const model::DatasetSplit& data, const std::vector<std::vector<journey::Milestone>>& cells,
                            const model::ModelConfig& base, int n_seeds, std::uint64_t base_seed, int jobs) {
  if (n_seeds < 2) throw InsufficientSeedsError("ablation needs at least 2 seeds, got " + std::to_string(n_seeds));
  std::vector<std::vector<journey::Milestone>> task_sets;
  const std::vector<journey::Milestone> reference = {journey::Milestone::unc};
  if (std::find(cells.begin(), cells.end(), reference) == cells.end()) task_sets.push_back(reference);
  task_sets.insert(task_sets.end(), cells.begin(), cells.end());

  std::vector<model::ModelConfig> configs;
  for (const auto& tasks : task_sets) {
    model::ModelConfig c = base;
    c.name = model::task_set_name(tasks);
    c.base_tasks = tasks;
    c.twiddler_tasks.clear();
    c.head_overrides.clear();
    c.validate();
    configs.push_back(std::move(c));
  }
  const auto seeds = seed_range(base_seed, n_seeds);
  const auto grid = run_grid(configs, data, seeds, jobs);

  const std::size_t ref = static_cast<std::size_t>(
      std::find(task_sets.begin(), task_sets.end(), reference) - task_sets.begin());
  AblationReport report;
  report.seeds = seeds;
  const NdcgSummary ref_ndcg = summarize_runs(grid[ref]);
  const nn::Index ref_params = grid[ref].front().parameter_count;
  const std::size_t ref_searches = grid[ref].front().train_searches;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    AblationCell cell;
    cell.name = configs[c].name;
    cell.tasks = task_sets[c];
    cell.ndcg = summarize_runs(grid[c]);
    for (std::size_t s = 0; s < seeds.size(); ++s) cell.delta.push_back(grid[c][s].ndcg() - grid[ref][s].ndcg());
    cell.delta_ci = t_interval(cell.delta);
    cell.relative_delta_pct = pct(cell.delta_ci.mean, ref_ndcg.mean);
    cell.relative_half_width_pct = pct(cell.delta_ci.half_width, ref_ndcg.mean);
    cell.parameters = grid[c].front().parameter_count;
    cell.parameter_delta = cell.parameters - ref_params;
    cell.parameter_delta_pct = pct(static_cast<double>(cell.parameter_delta), static_cast<double>(ref_params));
    cell.searches = grid[c].front().train_searches;
    cell.search_delta = static_cast<long long>(cell.searches) - static_cast<long long>(ref_searches);
    cell.search_delta_pct = pct(static_cast<double>(cell.search_delta), static_cast<double>(ref_searches));
    report.cells.push_back(std::move(cell));
  }
  return report;
}

nlohmann::json AblationReport::to_json() const {
  nlohmann::json cells_json = nlohmann::json::array();
  for (const auto& c : cells) {
    nlohmann::json tasks = nlohmann::json::array();
    for (auto m : c.tasks) tasks.push_back(std::string(journey::to_string(m)));
    cells_json.push_back({{"name", c.name},
                          {"tasks", tasks},
                          {"ndcg", c.ndcg.to_json()},
                          {"delta", {{"per_seed", c.delta}, {"ci", interval_json(c.delta_ci)}}},
                          {"relative_delta_pct", c.relative_delta_pct},
                          {"relative_half_width_pct", c.relative_half_width_pct},
                          {"parameters", c.parameters},
                          {"parameter_delta", c.parameter_delta},
                          {"parameter_delta_pct", c.parameter_delta_pct},
                          {"train_searches", c.searches},
                          {"search_delta", c.search_delta},
                          {"search_delta_pct", c.search_delta_pct}});
  }
  nlohmann::json seeds_json = nlohmann::json::array();
  for (auto s : seeds) seeds_json.push_back(s);
  return {{"seeds", seeds_json}, {"cells", cells_json}};
}

std::string AblationReport::to_text() const {
  std::vector<std::vector<std::string>> rows;
  for (const auto& c : cells) {
    rows.push_back({c.name, util::fixed(c.ndcg.mean, 6),
                    util::signed_fixed(c.relative_delta_pct, 3) + "% (+/-" + util::fixed(c.relative_half_width_pct, 3) +
                        "%)",
                    std::to_string(c.parameters), util::signed_fixed(c.parameter_delta_pct, 1) + "%",
                    std::to_string(c.searches), util::signed_fixed(c.search_delta_pct, 1) + "%"});
  }
  std::ostringstream out;
  out << util::format_table({"tasks", "ndcg", "delta ndcg", "params", "params delta", "searches", "searches delta"},
                            rows);
  out << "seeds: " << seeds.size() << "\n";
  return out.str();
}

}  // namespace funnelrank::eval
