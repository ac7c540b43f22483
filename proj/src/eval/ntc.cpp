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

#include "funnelrank/eval/ntc.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "funnelrank/model/manifest.hpp"
#include "funnelrank/util/table.hpp"

namespace funnelrank::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

nlohmann::json nullable(const std::vector<double>& v) {
  nlohmann::json out = nlohmann::json::array();
  for (double x : v) out.push_back(std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr));
  return out;
}

std::string csv_number(double v) {
  if (!std::isfinite(v)) return "";
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

}  // namespace

const NtcTaskCurve& NtcCurve::task(journey::Milestone m) const {
  for (const auto& t : tasks)
    if (t.task == m) return t;
  throw NtcError("no NTC curve for " + std::string(journey::to_string(m)));
}

NtcCurve ntc_curves(const model::MilestoneRanker& model, const journey::Dataset& dataset, const std::string& feature,
                    int n_buckets, bool normalize) {
  const auto& config = model.config();
  if (!config.has_combination()) throw NtcError("NTC needs a model with a combination module");
  if (n_buckets < 1) throw NtcError("n_buckets must be at least 1");
  model::require_schema(model, dataset.schema);
  const std::string name = feature == "num_prev_searches" ? journey::kNumPreviousSearchesFeature : feature;
  const int col = dataset.schema.context_index(name);
  if (col < 0) throw NtcError("context feature '" + feature + "' is not in the dataset schema");

  std::vector<double> values;
  std::vector<Eigen::VectorXd> contexts;
  for (const auto& j : dataset.journeys)
    for (const auto& s : j.searches) {
      values.push_back(s.context[col]);
      contexts.push_back(s.context);
    }
  if (values.empty()) throw NtcError("dataset has no searches");

  Eigen::MatrixXd raw(static_cast<Eigen::Index>(contexts.size()), dataset.schema.context_dim);
  for (std::size_t i = 0; i < contexts.size(); ++i) raw.row(static_cast<Eigen::Index>(i)) = contexts[i].transpose();
  const Eigen::MatrixXd alphas = model.alphas(model.normalizer().context(raw));

  NtcCurve curve;
  curve.feature = name;
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (lo == hi) {
    n_buckets = 1;
    curve.edges = {lo - 0.5, lo + 0.5};
    curve.warnings.push_back("feature '" + name + "' is constant; using a single bucket");
  } else {
    const double width = (hi - lo) / n_buckets;
    for (int b = 0; b < n_buckets; ++b) curve.edges.push_back(lo + width * b);
    curve.edges.push_back(hi);
  }
  const auto bucket_of = [&](double x) -> std::size_t {
    if (n_buckets == 1) return 0;
    const double width = (hi - lo) / n_buckets;
    const auto b = static_cast<long long>(std::floor((x - lo) / width));
    return static_cast<std::size_t>(std::clamp<long long>(b, 0, n_buckets - 1));
  };

  const std::size_t nb = static_cast<std::size_t>(n_buckets);
  const std::size_t nt = config.twiddler_tasks.size();
  curve.counts.assign(nb, 0);
  std::vector<std::vector<double>> sums(nt, std::vector<double>(nb, 0.0));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::size_t b = bucket_of(values[i]);
    ++curve.counts[b];
    const auto row = static_cast<Eigen::Index>(i);
    for (std::size_t t = 0; t < nt; ++t) {
      sums[t][b] += alphas(row, static_cast<Eigen::Index>(t) + 1) / alphas(row, 0);
    }
  }

  for (std::size_t b = 0; b < nb; ++b) {
    if (curve.counts[b] == 0) curve.warnings.push_back("bucket " + std::to_string(b) + " is empty");
  }
  for (std::size_t t = 0; t < nt; ++t) {
    NtcTaskCurve tc;
    tc.task = config.twiddler_tasks[t];
    for (std::size_t b = 0; b < nb; ++b) {
      const double mean = curve.counts[b] == 0 ? kNaN : sums[t][b] / static_cast<double>(curve.counts[b]);
      tc.mean_ntc.push_back(mean);
      tc.magnitude.push_back(std::abs(mean));
    }
    if (normalize) {
      const double first = tc.mean_ntc.front();
      if (!std::isfinite(first) || first == 0.0) {
        curve.warnings.push_back("first bucket NTC of " + std::string(journey::to_string(tc.task)) +
                                 " is zero or undefined; normalized values are undefined");
      }
      for (double v : tc.mean_ntc) tc.normalized.push_back(first == 0.0 ? kNaN : v / first);
    }
    curve.tasks.push_back(std::move(tc));
  }
  return curve;
}

nlohmann::json NtcCurve::to_json() const {
  nlohmann::json tasks_json = nlohmann::json::array();
  for (const auto& t : tasks) {
    nlohmann::json j = {{"task", std::string(journey::to_string(t.task))},
                        {"mean_ntc", nullable(t.mean_ntc)},
                        {"magnitude", nullable(t.magnitude)}};
    if (!t.normalized.empty()) j["normalized"] = nullable(t.normalized);
    tasks_json.push_back(std::move(j));
  }
  return {{"feature", feature}, {"edges", edges}, {"counts", counts}, {"tasks", tasks_json}, {"warnings", warnings}};
}

std::string NtcCurve::to_text() const {
  std::vector<std::string> header = {"bucket", "range", "count"};
  for (const auto& t : tasks) {
    const std::string name(journey::to_string(t.task));
    header.push_back("ntc " + name);
    if (!t.normalized.empty()) header.push_back("norm " + name);
  }
  std::vector<std::vector<std::string>> rows;
  for (std::size_t b = 0; b < buckets(); ++b) {
    std::vector<std::string> row = {std::to_string(b),
                                    "[" + util::fixed(edges[b], 2) + ", " + util::fixed(edges[b + 1], 2) + ")",
                                    std::to_string(counts[b])};
    for (const auto& t : tasks) {
      row.push_back(util::signed_fixed(t.mean_ntc[b], 4));
      if (!t.normalized.empty()) row.push_back(util::fixed(t.normalized[b], 4));
    }
    rows.push_back(std::move(row));
  }
  std::ostringstream out;
  out << "NTC by " << feature << "\n" << util::format_table(header, rows);
  for (const auto& w : warnings) out << "warning: " << w << "\n";
  return out.str();
}

std::string NtcCurve::to_csv() const {
  std::ostringstream out;
  out << "feature,bucket,lower,upper,count,task,mean_ntc,magnitude,normalized\n";
  for (const auto& t : tasks) {
    for (std::size_t b = 0; b < buckets(); ++b) {
      out << feature << ',' << b << ',' << csv_number(edges[b]) << ',' << csv_number(edges[b + 1]) << ','
          << counts[b] << ',' << journey::to_string(t.task) << ',' << csv_number(t.mean_ntc[b]) << ','
          << csv_number(t.magnitude[b]) << ',' << (t.normalized.empty() ? "" : csv_number(t.normalized[b])) << '\n';
    }
  }
  return out.str();
}

}  // namespace funnelrank::eval
