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

#include "funnelrank/eval/ndcg.hpp"

#include <cmath>
#include <string>

#include "funnelrank/nn/tensor.hpp"

namespace funnelrank::eval {

std::optional<double> ndcg_binary(std::span<const ListingId> ranked, const std::unordered_set<ListingId>& positives) {
  if (positives.empty()) return std::nullopt;
  double dcg = 0.0;
  std::size_t found = 0;
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    if (positives.count(ranked[r]) == 0) continue;
    dcg += 1.0 / std::log2(static_cast<double>(r) + 2.0);
    ++found;
  }
  if (found != positives.size()) {
    throw nn::ContractError("ndcg_binary: " + std::to_string(positives.size() - found) +
                            " positive id(s) missing from the ranking");
  }
  double ideal = 0.0;
  for (std::size_t r = 0; r < positives.size(); ++r) ideal += 1.0 / std::log2(static_cast<double>(r) + 2.0);
  return dcg / ideal;
}

}  // namespace funnelrank::eval
