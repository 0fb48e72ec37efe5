// src/optim.cc

// Copyright 2026  The clepdg Authors

// See ../COPYING for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "clepdg/optim.h"

#include <cmath>

#include "clepdg/error.h"

namespace clepdg {

Optimizer::Optimizer(OptimizerConfig config, std::vector<Tensor> params)
    : config_(config), params_(std::move(params)) {
  if (!(config_.learning_rate >= 0.0))
    throw ConfigError("optimizer: learning rate must be non-negative");
  if (config_.kind == OptimizerKind::kSgd && !(config_.momentum >= 0.0 && config_.momentum < 1.0))
    throw ConfigError("optimizer: momentum must lie in [0, 1)");
  for (const auto &p : params_) {
    m_.emplace_back(p.numel(), 0.0);
    if (config_.kind == OptimizerKind::kAdam) v_.emplace_back(p.numel(), 0.0);
  }
}

void Optimizer::step() {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (!params_[i].has_grad())
      throw ContractError("optimizer step: parameter " + std::to_string(i) + " of shape " +
                          shape_to_string(params_[i].shape()) + " has no gradient");
  ++steps_;
  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::kSgd) {
    const double mu = config_.momentum;
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto theta = params_[i].mutable_data();
      auto g = params_[i].grad();
      auto &vel = m_[i];
      for (std::size_t j = 0; j < theta.size(); ++j) {
        vel[j] = mu * vel[j] + g[j];
        theta[j] -= lr * vel[j];
      }
    }
  } else {
    const double b1 = config_.beta1, b2 = config_.beta2, eps = config_.epsilon;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto theta = params_[i].mutable_data();
      auto g = params_[i].grad();
      auto &m = m_[i];
      auto &v = v_[i];
      for (std::size_t j = 0; j < theta.size(); ++j) {
        m[j] = b1 * m[j] + (1.0 - b1) * g[j];
        v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
        theta[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
      }
    }
  }
  zero_grad();
}

void Optimizer::zero_grad() {
  for (auto &p : params_) p.clear_grad();
}

}  // namespace clepdg
