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

// Differentiable free functions over Var. Everything is rank-2; the only
// broadcast supported is adding a 1 x n row to every row of an m x n value.

#include <cmath>
#include <string>
#include <vector>

#include "funnelrank/nn/tape.hpp"

namespace funnelrank::nn {

namespace detail {

template <typename Scalar>
void require_same_tape(const Var<Scalar>& a, const Var<Scalar>& b) {
  if (&a.tape() != &b.tape()) throw ContractError("operands recorded on different tapes");
}

inline std::string shape_str(Index r, Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

// log(1 + exp(x)) without overflow.
template <typename Scalar>
Scalar softplus_scalar(Scalar x) {
  return x > Scalar(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename Scalar>
Scalar sigmoid_scalar(Scalar x) {
  if (x >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

}  // namespace detail

template <typename Scalar>
Var<Scalar> matmul(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + detail::shape_str(a.rows(), a.cols()) + " * " +
                     detail::shape_str(b.rows(), b.cols()));
  }
  const auto ia = a.id();
  const auto ib = b.id();
  return a.tape().record(a.value() * b.value(), {ia, ib}, [ia, ib](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate(ib, t.value(ia).transpose() * g);
  });
}

/// Elementwise sum. `b` may also be a single row broadcast over `a`'s rows.
template <typename Scalar>
Var<Scalar> operator+(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_tape(a, b);
  const auto ia = a.id();
  const auto ib = b.id();
  if (a.rows() == b.rows() && a.cols() == b.cols()) {
    return a.tape().record(a.value() + b.value(), {ia, ib}, [ia, ib](Tape<Scalar>& t, std::size_t self) {
      const auto& g = t.grad(self);
      t.accumulate(ia, g);
      t.accumulate(ib, g);
    });
  }
  if (b.rows() == 1 && a.cols() == b.cols()) {
    Matrix<Scalar> out = a.value().rowwise() + b.value().row(0);
    return a.tape().record(std::move(out), {ia, ib}, [ia, ib](Tape<Scalar>& t, std::size_t self) {
      const auto& g = t.grad(self);
      t.accumulate(ia, g);
      t.accumulate(ib, g.colwise().sum());
    });
  }
  throw ShapeError("add: " + detail::shape_str(a.rows(), a.cols()) + " + " +
                   detail::shape_str(b.rows(), b.cols()));
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a) {
  const auto ia = a.id();
  return a.tape().record(-a.value(), {ia}, [ia](Tape<Scalar>& t, std::size_t self) {
    t.accumulate(ia, -t.grad(self));
  });
}

template <typename Scalar>
Var<Scalar> operator-(const Var<Scalar>& a, const Var<Scalar>& b) {
  return a + (-b);
}

/// Multiplies by a constant.
template <typename Scalar>
Var<Scalar> operator*(Scalar s, const Var<Scalar>& a) {
  const auto ia = a.id();
  return a.tape().record(s * a.value(), {ia}, [ia, s](Tape<Scalar>& t, std::size_t self) {
    t.accumulate(ia, s * t.grad(self));
  });
}

template <typename Scalar>
Var<Scalar> cwise_product(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_tape(a, b);
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("cwise_product: " + detail::shape_str(a.rows(), a.cols()) + " . " +
                     detail::shape_str(b.rows(), b.cols()));
  }
  const auto ia = a.id();
  const auto ib = b.id();
  Matrix<Scalar> out = a.value().cwiseProduct(b.value());
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g.cwiseProduct(t.value(ib)));
    if (t.requires_grad(ib)) t.accumulate(ib, g.cwiseProduct(t.value(ia)));
  });
}

template <typename Scalar>
Var<Scalar> relu(const Var<Scalar>& a) {
  const auto ia = a.id();
  Matrix<Scalar> out = a.value().cwiseMax(Scalar(0));
  return a.tape().record(std::move(out), {ia}, [ia](Tape<Scalar>& t, std::size_t self) {
    const auto& x = t.value(ia);
    t.accumulate(ia, (x.array() > Scalar(0)).select(t.grad(self), Scalar(0)).matrix());
  });
}

template <typename Scalar>
Var<Scalar> tanh(const Var<Scalar>& a) {
  const auto ia = a.id();
  Matrix<Scalar> out = a.value().array().tanh().matrix();
  return a.tape().record(std::move(out), {ia}, [ia](Tape<Scalar>& t, std::size_t self) {
    const auto& y = t.value(self);
    t.accumulate(ia, t.grad(self).cwiseProduct((Scalar(1) - y.array().square()).matrix()));
  });
}

/// log(sigmoid(x)) = -softplus(-x), evaluated with the branch that never
/// exponentiates a positive argument.
template <typename Scalar>
Var<Scalar> log_sigmoid(const Var<Scalar>& a) {
  const auto ia = a.id();
  Matrix<Scalar> out = a.value().unaryExpr([](Scalar x) { return -detail::softplus_scalar(-x); });
  return a.tape().record(std::move(out), {ia}, [ia](Tape<Scalar>& t, std::size_t self) {
    // d/dx log sigmoid(x) = sigmoid(-x)
    Matrix<Scalar> d = t.value(ia).unaryExpr([](Scalar x) { return detail::sigmoid_scalar(-x); });
    t.accumulate(ia, t.grad(self).cwiseProduct(d));
  });
}

template <typename Scalar>
Var<Scalar> softplus(const Var<Scalar>& a) {
  const auto ia = a.id();
  Matrix<Scalar> out = a.value().unaryExpr([](Scalar x) { return detail::softplus_scalar(x); });
  return a.tape().record(std::move(out), {ia}, [ia](Tape<Scalar>& t, std::size_t self) {
    Matrix<Scalar> d = t.value(ia).unaryExpr([](Scalar x) { return detail::sigmoid_scalar(x); });
    t.accumulate(ia, t.grad(self).cwiseProduct(d));
  });
}

/// Sum of all entries, as a 1x1 value.
template <typename Scalar>
Var<Scalar> sum(const Var<Scalar>& a) {
  const auto ia = a.id();
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record(std::move(out), {ia}, [ia](Tape<Scalar>& t, std::size_t self) {
    const Scalar g = t.grad(self)(0, 0);
    const auto& x = t.value(ia);
    t.accumulate(ia, Matrix<Scalar>::Constant(x.rows(), x.cols(), g));
  });
}

/// Column `j` as an m x 1 value.
template <typename Scalar>
Var<Scalar> col(const Var<Scalar>& a, Index j) {
  if (j < 0 || j >= a.cols()) {
    throw ShapeError("col: index " + std::to_string(j) + " out of " + std::to_string(a.cols()));
  }
  const auto ia = a.id();
  Matrix<Scalar> out = a.value().col(j);
  return a.tape().record(std::move(out), {ia}, [ia, j](Tape<Scalar>& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    t.grad(ia).col(j) += t.grad(self).col(0);
  });
}

/// [a | b] side by side.
template <typename Scalar>
Var<Scalar> concat_cols(const Var<Scalar>& a, const Var<Scalar>& b) {
  detail::require_same_tape(a, b);
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: row counts " + std::to_string(a.rows()) + " vs " +
                     std::to_string(b.rows()));
  }
  const auto ia = a.id();
  const auto ib = b.id();
  const Index ca = a.cols();
  Matrix<Scalar> out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  return a.tape().record(std::move(out), {ia, ib}, [ia, ib, ca](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.grad(self);
    if (t.requires_grad(ia)) t.accumulate(ia, g.leftCols(ca));
    if (t.requires_grad(ib)) t.accumulate(ib, g.rightCols(g.cols() - ca));
  });
}

/// Row i of the result is row index[i] of `a`.
template <typename Scalar>
Var<Scalar> gather_rows(const Var<Scalar>& a, std::vector<Index> index) {
  for (Index r : index) {
    if (r < 0 || r >= a.rows()) throw ShapeError("gather_rows: row " + std::to_string(r) + " out of range");
  }
  const auto ia = a.id();
  Matrix<Scalar> out(static_cast<Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) out.row(static_cast<Index>(i)) = a.value().row(index[i]);
  return a.tape().record(std::move(out), {ia}, [ia, index = std::move(index)](Tape<Scalar>& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const auto& g = t.grad(self);
    auto& ga = t.grad(ia);
    for (std::size_t i = 0; i < index.size(); ++i) ga.row(index[i]) += g.row(static_cast<Index>(i));
  });
}

/// Identity on values; blocks every gradient path through it.
template <typename Scalar>
Var<Scalar> stop_gradient(const Var<Scalar>& a) {
  return a.tape().constant(a.value());
}

}  // namespace funnelrank::nn
