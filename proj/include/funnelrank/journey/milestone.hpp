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

#include <array>
#include <bitset>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace funnelrank::journey {

/// Search milestones. `imp` is the impression itself; the positive chain
/// runs c -> lc -> pp -> req -> book -> unc; rej, cbh and cbg are the
/// negative outcomes.
enum class Milestone : std::uint8_t { imp, c, lc, pp, req, book, unc, rej, cbh, cbg };

inline constexpr std::size_t kMilestoneCount = 10;

inline constexpr std::array<Milestone, kMilestoneCount> kAllMilestones = {
    Milestone::imp, Milestone::c,    Milestone::lc,  Milestone::pp,  Milestone::req,
    Milestone::book, Milestone::unc, Milestone::rej, Milestone::cbh, Milestone::cbg};

/// Funnel order.
inline constexpr std::array<Milestone, 6> kPositiveChain = {Milestone::c,   Milestone::lc,   Milestone::pp,
                                                            Milestone::req, Milestone::book, Milestone::unc};

inline constexpr std::array<Milestone, 3> kNegativeMilestones = {Milestone::rej, Milestone::cbh, Milestone::cbg};

constexpr bool is_negative(Milestone m) {
  return m == Milestone::rej || m == Milestone::cbh || m == Milestone::cbg;
}

constexpr bool is_positive_chain(Milestone m) {
  return m != Milestone::imp && !is_negative(m);
}

/// Position in the positive chain (c = 0 ... unc = 5), or -1.
constexpr int funnel_index(Milestone m) {
  return is_positive_chain(m) ? static_cast<int>(m) - static_cast<int>(Milestone::c) : -1;
}

std::string_view to_string(Milestone m);
std::optional<Milestone> parse_milestone(std::string_view name);
/// Like parse_milestone but throws std::invalid_argument.
Milestone milestone_from_string(std::string_view name);

/// Multi-label outcome of one impression, one bit per milestone.
class LabelVector {
 public:
  LabelVector() { set(Milestone::imp); }

  bool operator[](Milestone m) const { return bits_[index(m)]; }
  bool test(Milestone m) const { return bits_[index(m)]; }
  LabelVector& set(Milestone m, bool on = true) {
    bits_.set(index(m), on);
    return *this;
  }

  bool any_negative() const {
    return test(Milestone::rej) || test(Milestone::cbh) || test(Milestone::cbg);
  }

  /// Milestones in the positive chain that are set, as a count from c.
  int funnel_depth() const {
    int d = 0;
    for (Milestone m : kPositiveChain) d += test(m) ? 1 : 0;
    return d;
  }

  LabelVector& merge(const LabelVector& other) {
    bits_ |= other.bits_;
    return *this;
  }

  unsigned long to_ulong() const { return bits_.to_ulong(); }

  friend bool operator==(const LabelVector&, const LabelVector&) = default;

 private:
  static constexpr std::size_t index(Milestone m) { return static_cast<std::size_t>(m); }
  std::bitset<kMilestoneCount> bits_;
};

}  // namespace funnelrank::journey
