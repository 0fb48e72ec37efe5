// include/clepdg/gradcheck.h

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

#include <functional>
#include <string>
#include <vector>

#include "clepdg/tensor.h"

namespace clepdg {

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool passed = true;
};

using ScalarFn = std::function<Tensor(const std::vector<Tensor> &)>;

// Compares the reverse-mode gradient of f at `inputs` with central
// differences. The relative error of one component is
// |analytic - numeric| / max(|analytic|, |numeric|, floor).
// Never throws on a mismatch; the report carries the outcome.
GradCheckReport finite_diff_check(const ScalarFn &f, const std::vector<Tensor> &inputs,
                                  double h = 1e-5, double rel_tol = 1e-4,
                                  double floor = 1e-6);

GradCheckReport finite_diff_check(const std::function<Tensor(const Tensor &)> &f,
                                  const Tensor &x, double h = 1e-5, double rel_tol = 1e-4,
                                  double floor = 1e-6);

struct GradCheckCase {
  std::string name;
  GradCheckReport report;
};

// The full suite behind the `gradcheck` subcommand: every tensor op, every
// loss, and the encoders on tiny instances. Deterministic in `seed`.
std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed = 0);

}  // namespace clepdg
