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

#include "funnelrank/model/data.hpp"

#include <cmath>

#include "funnelrank/util/hash.hpp"

namespace funnelrank::model {

namespace {

void fit_moments(const Eigen::MatrixXd& rows, Eigen::VectorXd& mean, Eigen::VectorXd& scale) {
  const Index n = rows.rows();
  mean = Eigen::VectorXd::Zero(rows.cols());
  scale = Eigen::VectorXd::Ones(rows.cols());
  if (n == 0) return;
  mean = rows.colwise().mean().transpose();
  for (Index k = 0; k < rows.cols(); ++k) {
    const double var = (rows.col(k).array() - mean[k]).square().mean();
    scale[k] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
}

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Index>(v.size()));
}

}  // namespace

Normalizer Normalizer::fit(const journey::Dataset& dataset) {
  const Index n_imp = static_cast<Index>(dataset.impression_count());
  const Index n_search = static_cast<Index>(dataset.search_count());
  Eigen::MatrixXd listing(n_imp, dataset.schema.listing_dim);
  Eigen::MatrixXd context(n_search, dataset.schema.context_dim);
  Index r = 0;
  Index s = 0;
  for (const auto& j : dataset.journeys)
    for (const auto& search : j.searches) {
      context.row(s++) = search.context.transpose();
      for (const auto& imp : search.impressions) listing.row(r++) = imp.features.transpose();
    }
  Normalizer out;
  fit_moments(listing, out.listing_mean, out.listing_scale);
  fit_moments(context, out.context_mean, out.context_scale);
  return out;
}

Normalizer Normalizer::identity(Index listing_dim, Index context_dim) {
  return {Eigen::VectorXd::Zero(listing_dim), Eigen::VectorXd::Ones(listing_dim), Eigen::VectorXd::Zero(context_dim),
          Eigen::VectorXd::Ones(context_dim)};
}

Eigen::MatrixXd Normalizer::listing(const Eigen::MatrixXd& raw) const {
  if (raw.cols() != listing_mean.size()) {
    throw nn::ShapeError("listing features: expected width " + std::to_string(listing_mean.size()) + ", got " +
                         std::to_string(raw.cols()));
  }
  return ((raw.rowwise() - listing_mean.transpose()).array().rowwise() / listing_scale.transpose().array()).matrix();
}

Eigen::MatrixXd Normalizer::context(const Eigen::MatrixXd& raw) const {
  if (raw.cols() != context_mean.size()) {
    throw nn::ShapeError("context features: expected width " + std::to_string(context_mean.size()) + ", got " +
                         std::to_string(raw.cols()));
  }
  return ((raw.rowwise() - context_mean.transpose()).array().rowwise() / context_scale.transpose().array()).matrix();
}

nlohmann::json Normalizer::to_json() const {
  return {{"listing_mean", to_vec(listing_mean)},
          {"listing_scale", to_vec(listing_scale)},
          {"context_mean", to_vec(context_mean)},
          {"context_scale", to_vec(context_scale)}};
}

Normalizer Normalizer::from_json(const nlohmann::json& j) {
  return {from_vec(j.at("listing_mean")), from_vec(j.at("listing_scale")), from_vec(j.at("context_mean")),
          from_vec(j.at("context_scale"))};
}

FlatData flatten(const journey::Dataset& dataset, const Normalizer& normalizer) {
  const Index n_imp = static_cast<Index>(dataset.impression_count());
  const Index n_search = static_cast<Index>(dataset.search_count());
  Eigen::MatrixXd listing(n_imp, dataset.schema.listing_dim);
  Eigen::MatrixXd context(n_search, dataset.schema.context_dim);
  FlatData out;
  Batch& b = out.all;
  b.search_of_row.reserve(static_cast<std::size_t>(n_imp));
  b.labels.reserve(static_cast<std::size_t>(n_imp));
  b.listing_ids.reserve(static_cast<std::size_t>(n_imp));
  Index r = 0;
  Index s = 0;
  for (const auto& j : dataset.journeys)
    for (const auto& search : j.searches) {
      if (search.impressions.empty()) throw nn::ContractError("search " + std::to_string(search.search_id) +
                                                             " has no impressions");
      context.row(s) = search.context.transpose();
      out.raw_context.push_back(search.context);
      b.spans.push_back({r, static_cast<Index>(search.impressions.size())});
      b.search_ids.push_back(search.search_id);
      for (const auto& imp : search.impressions) {
        listing.row(r++) = imp.features.transpose();
        b.search_of_row.push_back(s);
        b.labels.push_back(imp.labels);
        b.listing_ids.push_back(imp.listing_id);
      }
      ++s;
    }
  b.listing = normalizer.listing(listing);
  b.context = normalizer.context(context);
  return out;
}

Batch make_batch(const FlatData& data, std::span<const Index> searches) {
  const Batch& all = data.all;
  Index n = 0;
  for (Index s : searches) n += all.spans.at(static_cast<std::size_t>(s)).size;
  Batch b;
  b.listing.resize(n, all.listing.cols());
  b.context.resize(static_cast<Index>(searches.size()), all.context.cols());
  b.search_of_row.reserve(static_cast<std::size_t>(n));
  b.labels.reserve(static_cast<std::size_t>(n));
  b.listing_ids.reserve(static_cast<std::size_t>(n));
  Index r = 0;
  for (std::size_t i = 0; i < searches.size(); ++i) {
    const auto src = static_cast<std::size_t>(searches[i]);
    const SearchSpan span = all.spans[src];
    b.context.row(static_cast<Index>(i)) = all.context.row(static_cast<Index>(src));
    b.listing.middleRows(r, span.size) = all.listing.middleRows(span.begin, span.size);
    b.spans.push_back({r, span.size});
    b.search_ids.push_back(all.search_ids[src]);
    for (Index k = 0; k < span.size; ++k) {
      const auto row = static_cast<std::size_t>(span.begin + k);
      b.search_of_row.push_back(static_cast<Index>(i));
      b.labels.push_back(all.labels[row]);
      b.listing_ids.push_back(all.listing_ids[row]);
    }
    r += span.size;
  }
  return b;
}

bool is_eval_guest(std::uint64_t guest_id) { return util::mix64(guest_id ^ 0x5eedf00dull) % 5 == 0; }

DatasetSplit split_by_guest(const journey::Dataset& dataset) {
  DatasetSplit out;
  out.train.schema = dataset.schema;
  out.eval.schema = dataset.schema;
  for (const auto& j : dataset.journeys) (is_eval_guest(j.guest_id) ? out.eval : out.train).journeys.push_back(j);
  return out;
}

}  // namespace funnelrank::model
