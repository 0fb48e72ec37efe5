// include/clepdg/objectives.h

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

#include <span>
#include <vector>

#include "clepdg/tensor.h"

namespace clepdg {

inline constexpr double kTauMin = 1e-3;
inline constexpr double kTauMax = 100.0;

struct AcptConfig {
  double omega = 0.07;
  int iterations = 120;
  double learning_rate = 2e-3;
  double momentum = 0.9;

  void validate() const;
};

struct ArcFaceConfig {
  double scale = 16.0;
  double margin = 0.2;

  void validate() const;
};

// Throws DomainError when either vector is zero.
double cosine_sim(std::span<const double> a, std::span<const double> b);

// Symmetric InfoNCE over the N x N similarity matrix of unit-norm rows.
// log_tau is a one-element tensor; tau = exp(log_tau) clamped to
// [kTauMin, kTauMax].
Tensor contrastive_loss(const Tensor &audio, const Tensor &text, const Tensor &log_tau);
Tensor contrastive_loss(const Tensor &audio, const Tensor &text, double tau);

// Mean cross-entropy of softmax(sim(t_m, u_c) / omega) against labels.
Tensor acpt_cls_loss(const Tensor &text, const Tensor &class_prompts, std::span<const int> labels,
                     double omega);
// Sum over samples and negative classes of max(0, 1 - s_pos + s_neg).
Tensor acpt_rank_loss(const Tensor &text, const Tensor &class_prompts,
                      std::span<const int> labels);
Tensor acpt_loss(const Tensor &text, const Tensor &class_prompts, std::span<const int> labels,
                 double omega);

// Additive angular margin softmax. Features and class rows are normalized
// internally; the result is the mean cross-entropy.
Tensor arcface_logits(const Tensor &features, const Tensor &class_weights,
                      std::span<const int> labels, const ArcFaceConfig &config);
Tensor arcface_loss(const Tensor &features, const Tensor &class_weights,
                    std::span<const int> labels, const ArcFaceConfig &config);

// Linear classifier without bias: logits = x W^T, mean cross-entropy.
Tensor softmax_classifier_loss(const Tensor &features, const Tensor &class_weights,
                               std::span<const int> labels);

// Mean of -log_softmax(logits)[label] over rows.
Tensor cross_entropy(const Tensor &logits, std::span<const int> labels);

// argmax_c cos(x, w_c); ties go to the lowest id. Throws DomainError for a
// zero embedding.
int predict_zero_shot(std::span<const double> audio_emb, const Tensor &class_embs);
std::vector<int> predict_zero_shot(const Tensor &audio_embs, const Tensor &class_embs);

// argmax_c <x, w_c> with the same tie rule (softmax-classifier inference).
int predict_linear(std::span<const double> x, const Tensor &class_weights);

}  // namespace clepdg
