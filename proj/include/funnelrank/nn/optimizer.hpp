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
#include <map>
#include <string>

#include "funnelrank/nn/tensor.hpp"

namespace funnelrank::nn {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer with bias-corrected first and second moments.
template <typename Scalar>
class AdamOptimizer {
 public:
  explicit AdamOptimizer(AdamOptions options = {}) : options_(options) {
    if (!(options_.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  }

  const AdamOptions& options() const { return options_; }
  std::uint64_t step_count() const { return step_; }

  /// Applies one update to every trainable parameter and clears gradients.
  /// Every trainable parameter must carry a gradient.
  void step(ParameterStore<Scalar>& params) {
    for (auto& [name, t] : params) {
      if (t.requires_grad() && !t.has_grad()) {
        throw ContractError("optimizer_step: missing gradient for parameter " + name);
      }
    }
    ++step_;
    const Scalar lr = static_cast<Scalar>(options_.learning_rate);
    const Scalar b1 = static_cast<Scalar>(options_.beta1);
    const Scalar b2 = static_cast<Scalar>(options_.beta2);
    const Scalar eps = static_cast<Scalar>(options_.epsilon);
    const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(step_));
    const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(step_));
    for (auto& [name, t] : params) {
      if (!t.requires_grad()) continue;
      auto& m = moments_[name];
      const auto& g = t.grad();
      if (m.first.size() == 0) {
        m.first = Matrix<Scalar>::Zero(g.rows(), g.cols());
        m.second = Matrix<Scalar>::Zero(g.rows(), g.cols());
      }
      m.first = b1 * m.first + (Scalar(1) - b1) * g;
      m.second = b2 * m.second + (Scalar(1) - b2) * g.cwiseAbs2();
      t.mutable_value().array() -=
          lr * (m.first.array() / c1) / ((m.second.array() / c2).sqrt() + eps);
      t.clear_grad();
    }
  }

  /// First/second moment accumulators, keyed like the parameter store.
  struct Moments {
    Matrix<Scalar> first;
    Matrix<Scalar> second;
  };
  const std::map<std::string, Moments>& moments() const { return moments_; }

 private:
  AdamOptions options_;
  std::uint64_t step_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace funnelrank::nn
