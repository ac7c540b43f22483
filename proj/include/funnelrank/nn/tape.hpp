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

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "funnelrank/nn/tensor.hpp"

namespace funnelrank::nn {

template <typename Scalar>
class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid for the
/// lifetime of the tape that produced it.
template <typename Scalar>
class Var {
 public:
  using MatrixType = Matrix<Scalar>;
  using NodeId = std::size_t;

  Var() = default;
  Var(Tape<Scalar>* tape, NodeId id) : tape_(tape), id_(id) {}

  Tape<Scalar>& tape() const { return *tape_; }
  NodeId id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const MatrixType& value() const { return tape_->value(id_); }
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }

  /// Gradient of the last backward pass with respect to this value. Nodes
  /// that received no gradient report zeros.
  MatrixType grad() const { return tape_->grad_or_zero(id_); }

 private:
  Tape<Scalar>* tape_ = nullptr;
  NodeId id_ = 0;
};

/// Linear record of a computation for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so every node's inputs precede it
/// and a single reverse sweep visits each node at most once. A tape belongs
/// to one thread and one forward/backward cycle.
template <typename Scalar>
class Tape {
 public:
  using MatrixType = Matrix<Scalar>;
  using NodeId = std::size_t;
  /// Propagates the gradient of node `self` into its inputs.
  using BackwardFn = std::function<void(Tape&, NodeId self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Records a value that never receives gradient.
  Var<Scalar> constant(MatrixType value) {
    nodes_.push_back(Node{std::move(value), {}, false, {}, nullptr, {}});
    return {this, nodes_.size() - 1};
  }

  /// Records a leaf bound to a stored parameter. Gradient flows into it only
  /// when the tensor requires grad.
  Var<Scalar> parameter(Tensor<Scalar>& t) {
    nodes_.push_back(Node{t.value(), {}, t.requires_grad(), {}, &t, {}});
    return {this, nodes_.size() - 1};
  }

  /// Records the result of an operation. The node requires grad when any
  /// input does; otherwise the backward rule is dropped.
  Var<Scalar> record(MatrixType value, std::vector<NodeId> inputs, BackwardFn backward) {
    bool live = false;
    for (NodeId in : inputs) live = live || nodes_.at(in).requires_grad;
    Node node{std::move(value), {}, live, {}, nullptr, {}};
    if (live) {
      node.inputs = std::move(inputs);
      node.backward = std::move(backward);
    }
    nodes_.push_back(std::move(node));
    return {this, nodes_.size() - 1};
  }

  const MatrixType& value(NodeId id) const { return nodes_.at(id).value; }
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  /// Gradient buffer of a node, zero-allocated on first access.
  MatrixType& grad(NodeId id) {
    Node& n = nodes_.at(id);
    if (n.grad.size() == 0 && n.value.size() != 0) {
      n.grad = MatrixType::Zero(n.value.rows(), n.value.cols());
    }
    return n.grad;
  }

  MatrixType grad_or_zero(NodeId id) const {
    const Node& n = nodes_.at(id);
    if (n.grad.size() == 0) return MatrixType::Zero(n.value.rows(), n.value.cols());
    return n.grad;
  }

  /// Adds `g` into the gradient of `id` when that node is live.
  template <typename Derived>
  void accumulate(NodeId id, const Eigen::MatrixBase<Derived>& g) {
    if (!nodes_[id].requires_grad) return;
    grad(id) += g;
  }

  /// Reverse sweep from a scalar loss. Every parameter leaf on the tape ends
  /// up with a gradient buffer, exactly zero when the loss does not depend
  /// on it. Gradients accumulate into the bound tensors.
  void backward(const Var<Scalar>& loss) {
    const NodeId root = loss.id();
    if (value(root).rows() != 1 || value(root).cols() != 1) {
      throw ContractError("backward requires a scalar loss");
    }
    for (Node& n : nodes_) n.grad.resize(0, 0);
    if (nodes_[root].requires_grad) grad(root)(0, 0) = Scalar(1);
    for (NodeId id = root + 1; id-- > 0;) {
      Node& n = nodes_[id];
      if (!n.requires_grad || n.grad.size() == 0 || !n.backward) continue;
      n.backward(*this, id);
    }
    for (NodeId id = 0; id < nodes_.size(); ++id) {
      Node& n = nodes_[id];
      if (n.param == nullptr || !n.requires_grad) continue;
      if (!n.param->has_grad()) n.param->zero_grad();
      if (n.grad.size() != 0) n.param->grad() += n.grad;
    }
  }

 private:
  struct Node {
    MatrixType value;
    MatrixType grad;
    bool requires_grad;
    std::vector<NodeId> inputs;
    Tensor<Scalar>* param;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

}  // namespace funnelrank::nn
