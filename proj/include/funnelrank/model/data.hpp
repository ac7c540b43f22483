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
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "funnelrank/journey/labels.hpp"
#include "funnelrank/journey/records.hpp"
#include "funnelrank/nn/tensor.hpp"

namespace funnelrank::model {

using journey::LabelVector;
using journey::Milestone;
using journey::ListingId;
using nn::Index;

/// Per-feature standardization fit on training data. Constant features get
/// scale 1.
struct Normalizer {
  Eigen::VectorXd listing_mean;
  Eigen::VectorXd listing_scale;
  Eigen::VectorXd context_mean;
  Eigen::VectorXd context_scale;

  static Normalizer fit(const journey::Dataset& dataset);
  static Normalizer identity(Index listing_dim, Index context_dim);

  /// Rows are feature vectors.
  Eigen::MatrixXd listing(const Eigen::MatrixXd& raw) const;
  Eigen::MatrixXd context(const Eigen::MatrixXd& raw) const;

  nlohmann::json to_json() const;
  static Normalizer from_json(const nlohmann::json& j);

  friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

/// Contiguous impression rows of one search.
struct SearchSpan {
  Index begin = 0;
  Index size = 0;
};

/// A set of whole searches laid out for the model: impression rows grouped
/// by search, one context row per search.
struct Batch {
  Eigen::MatrixXd listing;           // impressions x listing_dim, normalized
  Eigen::MatrixXd context;           // searches x context_dim, normalized
  std::vector<Index> search_of_row;  // impression row -> context row
  std::vector<SearchSpan> spans;
  std::vector<LabelVector> labels;
  std::vector<ListingId> listing_ids;
  std::vector<std::uint64_t> search_ids;

  Index rows() const { return listing.rows(); }
  Index searches() const { return static_cast<Index>(spans.size()); }
};

/// Every search of a dataset, normalized once; batches are row gathers.
struct FlatData {
  Batch all;
  std::vector<Eigen::VectorXd> raw_context;  // per search, unnormalized
};

FlatData flatten(const journey::Dataset& dataset, const Normalizer& normalizer);

/// Batch holding `searches` (indices into data.all.spans) in the given order.
Batch make_batch(const FlatData& data, std::span<const Index> searches);

/// Guest-level 80/20 split keyed by a hash of the guest id, independent of
/// any seed.
bool is_eval_guest(std::uint64_t guest_id);

struct DatasetSplit {
  journey::Dataset train;
  journey::Dataset eval;
};
DatasetSplit split_by_guest(const journey::Dataset& dataset);

}  // namespace funnelrank::model
