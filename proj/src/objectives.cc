// src/objectives.cc

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

#include "clepdg/objectives.h"

#include <cmath>
#include <numbers>
#include <string>

#include "clepdg/error.h"

namespace clepdg {

namespace {

constexpr double kAcosEdge = 1e-7;

void require_pair(const char *op, const Tensor &a, const Tensor &b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1))
    throw ContractError(std::string(op) + ": incompatible shapes " + shape_to_string(a.shape()) +
                        " and " + shape_to_string(b.shape()));
}

std::vector<std::size_t> checked_labels(const char *op, std::span<const int> labels,
                                        std::size_t rows, std::size_t classes) {
  if (labels.size() != rows)
    throw ContractError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(rows) + " rows");
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
      throw ContractError(std::string(op) + ": label " + std::to_string(labels[i]) +
                          " out of range for " + std::to_string(classes) + " classes");
    out[i] = static_cast<std::size_t>(labels[i]);
  }
  return out;
}

Tensor one_hot(std::span<const std::size_t> labels, std::size_t classes) {
  std::vector<double> v(labels.size() * classes, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) v[i * classes + labels[i]] = 1.0;
  return Tensor({labels.size(), classes}, std::move(v));
}

int argmax_lowest(std::span<const double> scores) {
  int best = 0;
  for (std::size_t c = 1; c < scores.size(); ++c)
    if (scores[c] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

}  // namespace

void AcptConfig::validate() const {
  if (!(omega > 0.0)) throw ConfigError("acpt omega must be positive");
  if (iterations < 1) throw ConfigError("acpt iterations must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("acpt learning rate must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("acpt momentum must lie in [0, 1)");
}

void ArcFaceConfig::validate() const {
  if (!(scale > 0.0)) throw ConfigError("arcface scale must be positive");
  if (!(margin >= 0.0 && margin < std::numbers::pi / 2))
    throw ConfigError("arcface margin must lie in [0, pi/2)");
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("cosine_sim: length mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw DomainError("cosine_sim: zero vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

Tensor cross_entropy(const Tensor &logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ContractError("cross_entropy: logits must be a matrix");
  const auto idx = checked_labels("cross_entropy", labels, logits.dim(0), logits.dim(1));
  return neg(mean(pick(log_softmax(logits), idx)));
}

Tensor contrastive_loss(const Tensor &audio, const Tensor &text, const Tensor &log_tau) {
  require_pair("contrastive_loss", audio, text);
  if (audio.dim(0) != text.dim(0) || audio.dim(0) == 0)
    throw ContractError("contrastive_loss: batches differ in size");
  if (log_tau.numel() != 1) throw ContractError("contrastive_loss: log_tau must be a scalar");
  const std::size_t n = audio.dim(0);
  const Tensor inv_tau = exp(neg(clamp(log_tau, std::log(kTauMin), std::log(kTauMax))));
  const Tensor logits = mul(matmul(audio, transpose(text)), inv_tau);
  std::vector<std::size_t> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = i;
  const Tensor a2t = sum(pick(log_softmax(logits), diag));
  const Tensor t2a = sum(pick(log_softmax(transpose(logits)), diag));
  return scale(add(a2t, t2a), -0.5 / static_cast<double>(n));
}

Tensor contrastive_loss(const Tensor &audio, const Tensor &text, double tau) {
  if (!(tau > 0.0)) throw DomainError("contrastive_loss: tau must be positive");
  return contrastive_loss(audio, text, Tensor::scalar(std::log(tau)));
}

Tensor acpt_cls_loss(const Tensor &text, const Tensor &class_prompts, std::span<const int> labels,
                     double omega) {
  require_pair("acpt_cls_loss", text, class_prompts);
  if (!(omega > 0.0)) throw DomainError("acpt_cls_loss: omega must be positive");
  const auto idx = checked_labels("acpt_cls_loss", labels, text.dim(0), class_prompts.dim(0));
  const Tensor logits = scale(matmul(text, transpose(class_prompts)), 1.0 / omega);
  return neg(mean(pick(log_softmax(logits), idx)));
}

Tensor acpt_rank_loss(const Tensor &text, const Tensor &class_prompts,
                      std::span<const int> labels) {
  require_pair("acpt_rank_loss", text, class_prompts);
  const std::size_t m = text.dim(0), c = class_prompts.dim(0);
  const auto idx = checked_labels("acpt_rank_loss", labels, m, c);
  const Tensor sims = matmul(text, transpose(class_prompts));
  // positive similarity repeated across each row
  const Tensor pos = matmul(reshape(pick(sims, idx), {m, 1}), Tensor::full({1, c}, 1.0));
  const Tensor hinge = relu(add(sub(sims, pos), Tensor::scalar(1.0)));
  Tensor negatives = one_hot(idx, c);
  for (double &v : negatives.mutable_data()) v = 1.0 - v;
  return sum(mul(hinge, negatives));
}

Tensor acpt_loss(const Tensor &text, const Tensor &class_prompts, std::span<const int> labels,
                 double omega) {
  return add(acpt_cls_loss(text, class_prompts, labels, omega),
             acpt_rank_loss(text, class_prompts, labels));
}

Tensor arcface_logits(const Tensor &features, const Tensor &class_weights,
                      std::span<const int> labels, const ArcFaceConfig &config) {
  require_pair("arcface", features, class_weights);
  config.validate();
  const auto idx = checked_labels("arcface", labels, features.dim(0), class_weights.dim(0));
  const Tensor cosines = matmul(l2_normalize(features), transpose(l2_normalize(class_weights)));
  const Tensor target = cos_add_angle(cosines, config.margin, kAcosEdge);
  const Tensor mask = one_hot(idx, class_weights.dim(0));
  return scale(add(cosines, mul(mask, sub(target, cosines))), config.scale);
}

Tensor arcface_loss(const Tensor &features, const Tensor &class_weights,
                    std::span<const int> labels, const ArcFaceConfig &config) {
  return cross_entropy(arcface_logits(features, class_weights, labels, config), labels);
}

Tensor softmax_classifier_loss(const Tensor &features, const Tensor &class_weights,
                               std::span<const int> labels) {
  require_pair("softmax_classifier_loss", features, class_weights);
  return cross_entropy(matmul(features, transpose(class_weights)), labels);
}

int predict_zero_shot(std::span<const double> audio_emb, const Tensor &class_embs) {
  if (class_embs.rank() != 2 || class_embs.dim(0) == 0 || class_embs.dim(1) != audio_emb.size())
    throw ContractError("predict_zero_shot: class matrix " +
                        shape_to_string(class_embs.shape()) + " does not match embedding");
  const std::size_t d = class_embs.dim(1);
  std::vector<double> sims(class_embs.dim(0));
  for (std::size_t c = 0; c < sims.size(); ++c)
    sims[c] = cosine_sim(audio_emb, class_embs.data().subspan(c * d, d));
  return argmax_lowest(sims);
}

std::vector<int> predict_zero_shot(const Tensor &audio_embs, const Tensor &class_embs) {
  if (audio_embs.rank() != 2) throw ContractError("predict_zero_shot: expected a matrix");
  const std::size_t d = audio_embs.dim(1);
  std::vector<int> out(audio_embs.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = predict_zero_shot(audio_embs.data().subspan(i * d, d), class_embs);
  return out;
}

int predict_linear(std::span<const double> x, const Tensor &class_weights) {
  if (class_weights.rank() != 2 || class_weights.dim(0) == 0 ||
      class_weights.dim(1) != x.size())
    throw ContractError("predict_linear: weight matrix " +
                        shape_to_string(class_weights.shape()) + " does not match input");
  const std::size_t d = x.size();
  std::vector<double> scores(class_weights.dim(0), 0.0);
  for (std::size_t c = 0; c < scores.size(); ++c)
    for (std::size_t j = 0; j < d; ++j) scores[c] += class_weights.data()[c * d + j] * x[j];
  return argmax_lowest(scores);
}

}  // namespace clepdg
