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
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace funnelrank::nn {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

/// Raised when operand dimensions do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a caller breaks an operation's precondition.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Dense rank-2 array with an optional gradient buffer of identical shape.
///
/// Scalars are 1x1 and vectors are columns. Values handed to the constructor
/// must be finite.
template <typename Scalar>
class Tensor {
 public:
  using MatrixType = Matrix<Scalar>;

  Tensor() = default;

  explicit Tensor(MatrixType values, bool requires_grad = false)
      : values_(std::move(values)), requires_grad_(requires_grad) {
    if (!values_.allFinite()) {
      throw std::invalid_argument("tensor values must be finite");
    }
  }

  const MatrixType& value() const { return values_; }
  MatrixType& mutable_value() { return values_; }

  std::array<Index, 2> shape() const { return {values_.rows(), values_.cols()}; }
  Index size() const { return values_.size(); }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) { requires_grad_ = on; }

  bool has_grad() const { return grad_.has_value(); }
  const MatrixType& grad() const {
    if (!grad_) throw ContractError("tensor has no gradient");
    return *grad_;
  }
  MatrixType& grad() {
    if (!grad_) throw ContractError("tensor has no gradient");
    return *grad_;
  }

  void zero_grad() { grad_ = MatrixType::Zero(values_.rows(), values_.cols()); }
  void clear_grad() { grad_.reset(); }

  /// Adds `g` into the gradient buffer, allocating it on first use.
  template <typename Derived>
  void accumulate_grad(const Eigen::MatrixBase<Derived>& g) {
    if (!grad_) zero_grad();
    *grad_ += g;
  }

 private:
  MatrixType values_;
  bool requires_grad_ = false;
  std::optional<MatrixType> grad_;
};

/// Named registry of learnable tensors. Iteration is ordered by name so that
/// every traversal (initialization, optimizer updates, serialization) is
/// deterministic.
template <typename Scalar>
class ParameterStore {
 public:
  using TensorType = Tensor<Scalar>;
  using MatrixType = Matrix<Scalar>;
  using Map = std::map<std::string, TensorType>;

  TensorType& add(const std::string& name, MatrixType init, bool requires_grad = true) {
    auto [it, inserted] = params_.try_emplace(name, std::move(init), requires_grad);
    if (!inserted) throw ContractError("duplicate parameter: " + name);
    return it->second;
  }

  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  TensorType& at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
  }
  const TensorType& at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw ContractError("unknown parameter: " + name);
    return it->second;
  }

  std::size_t size() const { return params_.size(); }

  /// Total number of scalars across all parameters.
  Index parameter_count() const {
    Index n = 0;
    for (const auto& [_, t] : params_) n += t.size();
    return n;
  }

  void zero_grad() {
    for (auto& [_, t] : params_) t.zero_grad();
  }
  void clear_grad() {
    for (auto& [_, t] : params_) t.clear_grad();
  }

  typename Map::iterator begin() { return params_.begin(); }
  typename Map::iterator end() { return params_.end(); }
  typename Map::const_iterator begin() const { return params_.begin(); }
  typename Map::const_iterator end() const { return params_.end(); }

  /// Value equality, bit for bit.
  friend bool operator==(const ParameterStore& a, const ParameterStore& b) {
    if (a.params_.size() != b.params_.size()) return false;
    auto ia = a.params_.begin();
    auto ib = b.params_.begin();
    for (; ia != a.params_.end(); ++ia, ++ib) {
      if (ia->first != ib->first) return false;
      const auto& va = ia->second.value();
      const auto& vb = ib->second.value();
      if (va.rows() != vb.rows() || va.cols() != vb.cols()) return false;
      if (!(va.array() == vb.array()).all()) return false;
    }
    return true;
  }

 private:
  Map params_;
};

}  // namespace funnelrank::nn
