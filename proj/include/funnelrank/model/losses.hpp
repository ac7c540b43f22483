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

// Ranking and classification losses as single tape nodes with closed-form
// backward rules. Scores are column vectors; searches are contiguous spans.

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "funnelrank/journey/milestone.hpp"
#include "funnelrank/model/data.hpp"
#include "funnelrank/nn/ops.hpp"

namespace funnelrank::model {

/// Preference grade of an impression for the pairwise loss:
/// 3 unc, 2 clicked without any negative, 1 plain impression, 0 any negative.
inline int relevance_grade(const LabelVector& y) {
  if (y[Milestone::unc]) return 3;
  if (y.any_negative()) return 0;
  if (y[Milestone::c]) return 2;
  return 1;
}

namespace detail {

template <typename Scalar>
void require_column(const nn::Var<Scalar>& v, std::size_t rows, const char* what) {
  if (v.cols() != 1 || v.rows() != static_cast<Index>(rows)) {
    throw nn::ShapeError(std::string(what) + ": expected " + std::to_string(rows) + "x1 scores, got " +
                         nn::detail::shape_str(v.rows(), v.cols()));
  }
}

template <typename Scalar>
nn::Var<Scalar> scalar_constant(nn::Tape<Scalar>& tape, Scalar v) {
  return tape.constant(nn::Matrix<Scalar>::Constant(1, 1, v));
}

}  // namespace detail

/// weight * sum over searches and positives of -log softmax(scores)_i.
/// A search with k positives contributes k softmax terms.
template <typename Scalar>
nn::Var<Scalar> listwise_softmax_loss(const nn::Var<Scalar>& scores, const std::vector<SearchSpan>& spans,
                                      const std::vector<std::uint8_t>& positive, Scalar weight) {
  detail::require_column(scores, positive.size(), "listwise_softmax_loss");
  const auto& s = scores.value();
  Scalar total = 0;
  for (const auto& span : spans) {
    if (span.size <= 0) throw nn::ContractError("listwise_softmax_loss: search with zero impressions");
    const auto block = s.col(0).segment(span.begin, span.size);
    const Scalar m = block.maxCoeff();
    const Scalar lse = m + std::log((block.array() - m).exp().sum());
    for (Index i = 0; i < span.size; ++i) {
      if (positive[static_cast<std::size_t>(span.begin + i)]) total += lse - block[i];
    }
  }
  const auto id = scores.id();
  return scores.tape().record(
      nn::Matrix<Scalar>::Constant(1, 1, weight * total), {id},
      [id, spans, positive, weight](nn::Tape<Scalar>& t, std::size_t self) {
        const Scalar g = t.grad(self)(0, 0) * weight;
        const auto& v = t.value(id);
        nn::Matrix<Scalar> d = nn::Matrix<Scalar>::Zero(v.rows(), 1);
        for (const auto& span : spans) {
          const auto block = v.col(0).segment(span.begin, span.size);
          Scalar k = 0;
          for (Index i = 0; i < span.size; ++i) k += positive[static_cast<std::size_t>(span.begin + i)] ? 1 : 0;
          if (k == 0) continue;
          const Scalar m = block.maxCoeff();
          const auto e = (block.array() - m).exp();
          const Scalar z = e.sum();
          for (Index i = 0; i < span.size; ++i) {
            const Scalar p = e[i] / z;
            d(span.begin + i, 0) = g * (k * p - (positive[static_cast<std::size_t>(span.begin + i)] ? 1 : 0));
          }
        }
        t.accumulate(id, d);
      });
}

/// Mean of softplus(x) - target * x over eligible rows; exactly 0 with no
/// eligible row.
template <typename Scalar>
nn::Var<Scalar> masked_bce_loss(const nn::Var<Scalar>& logits, const std::vector<std::uint8_t>& eligible,
                                const std::vector<std::uint8_t>& target) {
  detail::require_column(logits, eligible.size(), "masked_bce_loss");
  if (target.size() != eligible.size()) throw nn::ShapeError("masked_bce_loss: mask and target sizes differ");
  const auto& x = logits.value();
  Scalar total = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    if (!eligible[i]) continue;
    const Scalar xi = x(static_cast<Index>(i), 0);
    total += nn::detail::softplus_scalar(xi) - (target[i] ? xi : Scalar(0));
    ++count;
  }
  if (count == 0) return detail::scalar_constant(logits.tape(), Scalar(0));
  const Scalar inv = Scalar(1) / static_cast<Scalar>(count);
  const auto id = logits.id();
  return logits.tape().record(nn::Matrix<Scalar>::Constant(1, 1, total * inv), {id},
                              [id, eligible, target, inv](nn::Tape<Scalar>& t, std::size_t self) {
                                const Scalar g = t.grad(self)(0, 0) * inv;
                                const auto& v = t.value(id);
                                nn::Matrix<Scalar> d = nn::Matrix<Scalar>::Zero(v.rows(), 1);
                                for (std::size_t i = 0; i < eligible.size(); ++i) {
                                  if (!eligible[i]) continue;
                                  const auto r = static_cast<Index>(i);
                                  d(r, 0) = g * (nn::detail::sigmoid_scalar(v(r, 0)) - (target[i] ? 1 : 0));
                                }
                                t.accumulate(id, d);
                              });
}

/// -mean over within-search pairs with grade_i > grade_j of
/// log sigmoid(y_i - y_j); exactly 0 when no such pair exists.
template <typename Scalar>
nn::Var<Scalar> pairwise_logistic_loss(const nn::Var<Scalar>& scores, const std::vector<SearchSpan>& spans,
                                       const std::vector<int>& grades) {
  detail::require_column(scores, grades.size(), "pairwise_logistic_loss");
  std::vector<std::pair<Index, Index>> pairs;
  for (const auto& span : spans) {
    for (Index a = 0; a < span.size; ++a)
      for (Index b = 0; b < span.size; ++b) {
        const Index i = span.begin + a;
        const Index j = span.begin + b;
        if (grades[static_cast<std::size_t>(i)] > grades[static_cast<std::size_t>(j)]) pairs.emplace_back(i, j);
      }
  }
  if (pairs.empty()) return detail::scalar_constant(scores.tape(), Scalar(0));
  const auto& y = scores.value();
  Scalar total = 0;
  for (const auto& [i, j] : pairs) total += nn::detail::softplus_scalar(y(j, 0) - y(i, 0));
  const Scalar inv = Scalar(1) / static_cast<Scalar>(pairs.size());
  const auto id = scores.id();
  return scores.tape().record(nn::Matrix<Scalar>::Constant(1, 1, total * inv), {id},
                              [id, pairs = std::move(pairs), inv](nn::Tape<Scalar>& t, std::size_t self) {
                                const Scalar g = t.grad(self)(0, 0) * inv;
                                const auto& v = t.value(id);
                                nn::Matrix<Scalar> d = nn::Matrix<Scalar>::Zero(v.rows(), 1);
                                for (const auto& [i, j] : pairs) {
                                  const Scalar s = nn::detail::sigmoid_scalar(v(j, 0) - v(i, 0));
                                  d(i, 0) -= g * s;
                                  d(j, 0) += g * s;
                                }
                                t.accumulate(id, d);
                              });
}

}  // namespace funnelrank::model
