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

#include <optional>
#include <span>
#include <unordered_set>

#include "funnelrank/journey/records.hpp"

namespace funnelrank::eval {

using journey::ListingId;

/// NDCG with gain 1 for ids in `positives`, discount 1/log2(rank + 1),
/// normalized by the ideal ordering. nullopt when `positives` is empty.
/// Throws nn::ContractError when a positive is not ranked.
std::optional<double> ndcg_binary(std::span<const ListingId> ranked, const std::unordered_set<ListingId>& positives);

}  // namespace funnelrank::eval
