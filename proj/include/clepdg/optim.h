// include/clepdg/optim.h

// Copyright 2026  The clepdg Authors

// See ../../COPYING for clarification regarding multiple authors
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

#pragma once

#include <vector>

#include "clepdg/tensor.h"

namespace clepdg {

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kSgd;
  double learning_rate = 1e-3;
  double momentum = 0.0;  // SGD only, in [0, 1)
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static OptimizerConfig sgd(double lr, double momentum = 0.0) {
    return {OptimizerKind::kSgd, lr, momentum};
  }
  static OptimizerConfig adam(double lr) { return {OptimizerKind::kAdam, lr}; }
};

// First-order optimizer bound to a fixed parameter list. Buffers are shaped
// like the parameters.
//
// SGD:  v <- mu * v + g;  theta <- theta - lr * v
// Adam: standard bias-corrected moments.
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::vector<Tensor> params);

  // Every parameter must hold a gradient (ContractError otherwise). Gradients
  // are cleared after the update.
  void step();
  void zero_grad();

  const OptimizerConfig &config() const { return config_; }
  const std::vector<Tensor> &params() const { return params_; }
  const std::vector<std::vector<double>> &first_moment() const { return m_; }
  const std::vector<std::vector<double>> &second_moment() const { return v_; }

 private:
  OptimizerConfig config_;
  std::vector<Tensor> params_;
  std::vector<std::vector<double>> m_;  // SGD velocity / Adam first moment
  std::vector<std::vector<double>> v_;  // Adam second moment
  long steps_ = 0;
};

}  // namespace clepdg
