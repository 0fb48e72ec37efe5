// tests/oracles.h

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

#pragma once

// Reference implementations of the losses written as explicit loops over
// plain arrays. They share no code with the library.

#include <algorithm>
#include <cmath>
#include <vector>

namespace clepdg::oracle {

using Matrix = std::vector<std::vector<double>>;

inline double dot(const std::vector<double> &a, const std::vector<double> &b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline std::vector<double> unit(const std::vector<double> &a) {
  const double n = std::sqrt(dot(a, a));
  std::vector<double> out(a);
  for (double &v : out) v /= n;
  return out;
}

// -log(exp(z[k]) / sum_j exp(z[j])), computed with the max shift.
inline double neg_log_softmax(const std::vector<double> &z, std::size_t k) {
  double m = z[0];
  for (double v : z) m = std::max(m, v);
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return -(z[k] - m - std::log(s));
}

inline double contrastive(const Matrix &a, const Matrix &t, double tau) {
  const std::size_t n = a.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(n), col(n);
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = dot(a[i], t[j]) / tau;
      col[j] = dot(t[i], a[j]) / tau;
    }
    total += neg_log_softmax(row, i) + neg_log_softmax(col, i);
  }
  return total / (2.0 * static_cast<double>(n));
}

inline double acpt_cls(const Matrix &text, const Matrix &prompts, const std::vector<int> &labels,
                       double omega) {
  double total = 0.0;
  for (std::size_t m = 0; m < text.size(); ++m) {
    std::vector<double> z(prompts.size());
    for (std::size_t c = 0; c < prompts.size(); ++c) z[c] = dot(text[m], prompts[c]) / omega;
    total += neg_log_softmax(z, static_cast<std::size_t>(labels[m]));
  }
  return total / static_cast<double>(text.size());
}

inline double acpt_rank(const Matrix &text, const Matrix &prompts, const std::vector<int> &labels) {
  double total = 0.0;
  for (std::size_t m = 0; m < text.size(); ++m)
    for (std::size_t i = 0; i < prompts.size(); ++i) {
      if (static_cast<int>(i) != labels[m]) continue;
      for (std::size_t j = 0; j < prompts.size(); ++j) {
        if (static_cast<int>(j) == labels[m]) continue;
        total += std::max(0.0, 1.0 - dot(text[m], prompts[i]) + dot(text[m], prompts[j]));
      }
    }
  return total;
}

inline double arcface(const Matrix &features, const Matrix &weights, const std::vector<int> &labels,
                      double s, double margin) {
  double total = 0.0;
  for (std::size_t b = 0; b < features.size(); ++b) {
    const std::vector<double> f = unit(features[b]);
    std::vector<double> z(weights.size());
    for (std::size_t c = 0; c < weights.size(); ++c) {
      const double cosine = dot(f, unit(weights[c]));
      if (static_cast<int>(c) == labels[b]) {
        const double clamped = std::min(std::max(cosine, -1.0 + 1e-7), 1.0 - 1e-7);
        z[c] = s * std::cos(std::acos(clamped) + margin);
      } else {
        z[c] = s * cosine;
      }
    }
    total += neg_log_softmax(z, static_cast<std::size_t>(labels[b]));
  }
  return total / static_cast<double>(features.size());
}

}  // namespace clepdg::oracle
