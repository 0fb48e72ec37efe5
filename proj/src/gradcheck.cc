// src/gradcheck.cc

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

#include "clepdg/gradcheck.h"

#include <algorithm>
#include <cmath>

namespace clepdg {

GradCheckReport finite_diff_check(const ScalarFn &f, const std::vector<Tensor> &inputs,
                                  double h, double rel_tol, double floor) {
  std::vector<Tensor> probe;
  for (const auto &in : inputs)
    probe.push_back(Tensor(in.shape(), {in.data().begin(), in.data().end()}, true));

  std::vector<std::vector<double>> analytic(probe.size());
  {
    Tensor y = f(probe);
    if (y.requires_grad()) backward(y);
    Graph::current().clear();
  }
  for (std::size_t k = 0; k < probe.size(); ++k) {
    if (probe[k].has_grad())
      analytic[k].assign(probe[k].grad().begin(), probe[k].grad().end());
    else
      analytic[k].assign(probe[k].numel(), 0.0);
  }

  GradCheckReport report;
  NoGradGuard no_grad;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    auto x = probe[k].mutable_data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double orig = x[i];
      x[i] = orig + h;
      const double fp = f(probe).item();
      x[i] = orig - h;
      const double fm = f(probe).item();
      x[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[k][i];
      const double abs_err = std::abs(a - numeric);
      const double rel = abs_err / std::max({std::abs(a), std::abs(numeric), floor});
      ++report.checked;
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_input = k;
        report.worst_index = i;
      }
    }
  }
  report.passed = report.max_rel_error < rel_tol;
  return report;
}

GradCheckReport finite_diff_check(const std::function<Tensor(const Tensor &)> &f,
                                  const Tensor &x, double h, double rel_tol, double floor) {
  return finite_diff_check([&f](const std::vector<Tensor> &xs) { return f(xs[0]); },
                           std::vector<Tensor>{x}, h, rel_tol, floor);
}

}  // namespace clepdg
