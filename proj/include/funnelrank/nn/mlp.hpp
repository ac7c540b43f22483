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

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "funnelrank/nn/ops.hpp"

namespace funnelrank::nn {

enum class Activation { kRelu, kTanh };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// Fully connected stack: hidden layers use `activation`, the output layer
/// is linear.
struct MlpSpec {
  Index input_dim = 1;
  std::vector<Index> hidden_dims;
  Index output_dim = 1;
  Activation activation = Activation::kRelu;
  std::uint64_t seed = 0;

  std::vector<Index> layer_dims() const {
    std::vector<Index> dims{input_dim};
    dims.insert(dims.end(), hidden_dims.begin(), hidden_dims.end());
    dims.push_back(output_dim);
    return dims;
  }

  Index num_layers() const { return static_cast<Index>(hidden_dims.size()) + 1; }

  /// Sum over layers of (fan_in + 1) * fan_out.
  Index parameter_count() const {
    const auto dims = layer_dims();
    Index n = 0;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) n += (dims[i] + 1) * dims[i + 1];
    return n;
  }

  void validate() const {
    if (input_dim <= 0 || output_dim <= 0) throw ShapeError("mlp: dimensions must be positive");
    for (Index h : hidden_dims) {
      if (h <= 0) throw ShapeError("mlp: hidden dimensions must be positive");
    }
  }

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

inline std::string layer_weight_name(const std::string& prefix, Index layer) {
  return prefix + "/layer" + std::to_string(layer) + "/weight";
}
inline std::string layer_bias_name(const std::string& prefix, Index layer) {
  return prefix + "/layer" + std::to_string(layer) + "/bias";
}

/// Adds the layers of `spec` to `store` under `prefix`. Weights are uniform
/// in +-sqrt(6 / (fan_in + fan_out)) drawn from a stream seeded by
/// spec.seed; biases start at zero.
template <typename Scalar>
void init_mlp(const MlpSpec& spec, const std::string& prefix, ParameterStore<Scalar>& store) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const auto dims = spec.layer_dims();
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const Index fan_in = dims[l];
    const Index fan_out = dims[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix<Scalar> w(fan_in, fan_out);
    // Row-major fill order keeps the draw sequence independent of Eigen's storage order.
    for (Index i = 0; i < fan_in; ++i)
      for (Index j = 0; j < fan_out; ++j) w(i, j) = static_cast<Scalar>(dist(rng));
    store.add(layer_weight_name(prefix, static_cast<Index>(l)), std::move(w));
    store.add(layer_bias_name(prefix, static_cast<Index>(l)), Matrix<Scalar>::Zero(1, fan_out));
  }
}

/// Runs `input` (batch x input_dim) through the network stored under
/// `prefix`. Throws ShapeError naming the first layer whose weight does not
/// accept the incoming width.
template <typename Scalar>
Var<Scalar> forward_mlp(const MlpSpec& spec, const std::string& prefix, ParameterStore<Scalar>& store,
                        const Var<Scalar>& input) {
  Tape<Scalar>& tape = input.tape();
  Var<Scalar> h = input;
  const Index layers = spec.num_layers();
  for (Index l = 0; l < layers; ++l) {
    auto& w = store.at(layer_weight_name(prefix, l));
    auto& b = store.at(layer_bias_name(prefix, l));
    if (w.value().rows() != h.cols()) {
      throw ShapeError(prefix + ": layer " + std::to_string(l) + " expects width " +
                       std::to_string(w.value().rows()) + ", got " + std::to_string(h.cols()));
    }
    h = matmul(h, tape.parameter(w)) + tape.parameter(b);
    if (l + 1 < layers) h = spec.activation == Activation::kRelu ? relu(h) : tanh(h);
  }
  return h;
}

inline std::string_view to_string(Activation a) { return a == Activation::kRelu ? "relu" : "tanh"; }

inline Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw std::invalid_argument("unknown activation: " + std::string(name));
}

}  // namespace funnelrank::nn
