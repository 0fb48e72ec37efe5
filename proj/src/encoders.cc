// src/encoders.cc

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

#include "clepdg/encoders.h"

#include <cmath>

#include "clepdg/checkpoint.h"
#include "clepdg/error.h"

namespace clepdg {

namespace {

Tensor uniform_tensor(Shape shape, double bound, Rng &rng) {
  std::vector<double> v(shape_numel(shape));
  for (double &x : v) x = rng.uniform(-bound, bound);
  return Tensor(std::move(shape), std::move(v));
}

Tensor normal_tensor(Shape shape, double stddev, Rng &rng) {
  std::vector<double> v(shape_numel(shape));
  for (double &x : v) x = rng.normal(0.0, stddev);
  return Tensor(std::move(shape), std::move(v));
}

constexpr double kMaskValue = -1e9;

Shape bank_shape(std::size_t num_soundscapes, std::size_t num_tokens) {
  if (num_soundscapes == 0 || num_tokens == 0)
    throw ConfigError("prompt bank needs at least one soundscape and one token");
  return {num_soundscapes, num_tokens, kTokenDim};
}

}  // namespace

Linear Linear::init(std::size_t in, std::size_t out, Rng &rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  return {uniform_tensor({in, out}, bound, rng), Tensor::zeros({out})};
}

void Linear::collect(const std::string &prefix, NamedTensors &out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

Conv3x3 Conv3x3::init(std::size_t cin, std::size_t cout, Rng &rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(cin * 9));
  return {uniform_tensor({cout, cin, 3, 3}, bound, rng), Tensor::zeros({cout})};
}

void Conv3x3::collect(const std::string &prefix, NamedTensors &out) const {
  out.emplace_back(prefix + ".weight", weight);
  out.emplace_back(prefix + ".bias", bias);
}

// ---------------------------------------------------------------------------

AudioEncoder::AudioEncoder(Rng &rng)
    : conv1_(Conv3x3::init(1, 8, rng)),
      conv2_(Conv3x3::init(8, 16, rng)),
      conv3_(Conv3x3::init(16, 32, rng)),
      head_(Linear::init(32, kHiddenDim, rng)) {}

Tensor AudioEncoder::operator()(const Tensor &mel) const {
  if (mel.rank() != 3 || mel.dim(2) != kNumMelBands || mel.dim(1) < 8)
    throw ContractError("audio encoder expects [B, T>=8, 40], got " + shape_to_string(mel.shape()));
  const std::size_t b = mel.dim(0), t = mel.dim(1);
  Tensor x = layer_norm(reshape(mel, {b, t * kNumMelBands}));
  x = reshape(x, {b, 1, t, kNumMelBands});
  x = avg_pool2x2(relu(conv1_(x)));
  x = avg_pool2x2(relu(conv2_(x)));
  x = avg_pool2x2(relu(conv3_(x)));
  return head_(spatial_mean(x));
}

void AudioEncoder::collect(const std::string &prefix, NamedTensors &out) const {
  conv1_.collect(prefix + ".conv1", out);
  conv2_.collect(prefix + ".conv2", out);
  conv3_.collect(prefix + ".conv3", out);
  head_.collect(prefix + ".head", out);
}

// ---------------------------------------------------------------------------

TextEncoder::TextEncoder(Rng &rng)
    : embedding_(normal_tensor({vocab_size(), kTokenDim}, kTokenInitStd, rng)),
      query_(Linear::init(kTokenDim, kTokenDim, rng)),
      key_(Linear::init(kTokenDim, kTokenDim, rng)),
      value_(Linear::init(kTokenDim, kTokenDim, rng)),
      out_(Linear::init(kTokenDim, kTokenDim, rng)),
      norm1_gain_(Tensor::full({kTokenDim}, 1.0)),
      norm1_bias_(Tensor::zeros({kTokenDim})),
      ff1_(Linear::init(kTokenDim, kFeedForwardDim, rng)),
      ff2_(Linear::init(kFeedForwardDim, kTokenDim, rng)),
      norm2_gain_(Tensor::full({kTokenDim}, 1.0)),
      norm2_bias_(Tensor::zeros({kTokenDim})),
      readout_(Linear::init(kTokenDim, kHiddenDim, rng)) {}

Tensor TextEncoder::embed(std::span<const int> ids) const {
  for (int id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= embedding_.dim(0))
      throw ContractError("text encoder: token id " + std::to_string(id) + " outside vocabulary");
  return embedding(embedding_, ids);
}

Tensor TextEncoder::forward_embedded(const Tensor &embedded,
                                     const std::vector<bool> &attend) const {
  if (embedded.rank() != 2 || embedded.dim(1) != kTokenDim)
    throw ContractError("text encoder expects [L, 32], got " + shape_to_string(embedded.shape()));
  const std::size_t len = embedded.dim(0);
  if (attend.size() != len) throw ContractError("text encoder: mask length differs from sequence");

  std::vector<double> mask(len * len, 0.0);
  for (std::size_t i = 0; i < len; ++i)
    for (std::size_t j = 0; j < len; ++j)
      if (!attend[j]) mask[i * len + j] = kMaskValue;

  const Tensor q = query_(embedded);
  const Tensor k = key_(embedded);
  const Tensor v = value_(embedded);
  Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(kTokenDim)));
  scores = add(scores, Tensor({len, len}, std::move(mask)));
  const Tensor attn = out_(matmul(softmax(scores), v));

  Tensor h = add(embedded, attn);
  h = add_row(mul_row(layer_norm(h), norm1_gain_), norm1_bias_);
  const Tensor ff = ff2_(relu(ff1_(h)));
  h = add(h, ff);
  h = add_row(mul_row(layer_norm(h), norm2_gain_), norm2_bias_);
  return readout_(slice(h, 0, 0, 1));
}

Tensor TextEncoder::operator()(const std::vector<TextSequence> &batch) const {
  if (batch.empty()) throw ContractError("text encoder: empty batch");
  std::vector<Tensor> rows;
  rows.reserve(batch.size());
  for (const auto &seq : batch) {
    std::vector<bool> attend(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) attend[i] = seq[i] != kPadToken;
    rows.push_back(forward_embedded(embed(seq), attend));
  }
  return rows.size() == 1 ? rows.front() : concat(rows, 0);
}

void TextEncoder::collect(const std::string &prefix, NamedTensors &out) const {
  out.emplace_back(prefix + ".embedding", embedding_);
  query_.collect(prefix + ".attn.query", out);
  key_.collect(prefix + ".attn.key", out);
  value_.collect(prefix + ".attn.value", out);
  out_.collect(prefix + ".attn.out", out);
  out.emplace_back(prefix + ".norm1.gain", norm1_gain_);
  out.emplace_back(prefix + ".norm1.bias", norm1_bias_);
  ff1_.collect(prefix + ".ff1", out);
  ff2_.collect(prefix + ".ff2", out);
  out.emplace_back(prefix + ".norm2.gain", norm2_gain_);
  out.emplace_back(prefix + ".norm2.bias", norm2_bias_);
  readout_.collect(prefix + ".readout", out);
}

// ---------------------------------------------------------------------------

ProjectionHead::ProjectionHead(Rng &rng)
    : fc1_(Linear::init(kHiddenDim, kHiddenDim, rng)),
      fc2_(Linear::init(kHiddenDim, kJointDim, rng)) {}

void ProjectionHead::collect(const std::string &prefix, NamedTensors &out) const {
  fc1_.collect(prefix + ".fc1", out);
  fc2_.collect(prefix + ".fc2", out);
}

// ---------------------------------------------------------------------------

PromptBank::PromptBank(std::size_t num_soundscapes, std::size_t num_tokens, Rng &rng,
                       double stddev)
    : vectors_(normal_tensor(bank_shape(num_soundscapes, num_tokens), stddev, rng)) {}

PromptBank::PromptBank(Tensor vectors) : vectors_(std::move(vectors)) {
  if (vectors_.rank() != 3 || vectors_.dim(2) != kTokenDim || vectors_.dim(0) == 0 ||
      vectors_.dim(1) == 0)
    throw ShapeError("prompt bank must be [S, N_p, 32], got " +
                     shape_to_string(vectors_.shape()));
}

Tensor PromptBank::tokens_for(int soundscape) const {
  if (soundscape < 0 || static_cast<std::size_t>(soundscape) >= num_soundscapes())
    throw LookupError("no prompts for soundscape " + std::to_string(soundscape));
  const auto s = static_cast<std::size_t>(soundscape);
  return reshape(slice(vectors_, 0, s, s + 1), {num_tokens(), kTokenDim});
}

// ---------------------------------------------------------------------------

ClepModel::ClepModel(Rng &rng)
    : audio(rng),
      text(rng),
      audio_proj(rng),
      text_proj(rng),
      log_tau(Tensor::scalar(std::log(kInitialTau))) {}

ClepModel ClepModel::init(std::uint64_t seed) {
  Rng rng(seed);
  ClepModel model(rng);
  // Start on the f32 grid so a checkpoint of an untouched tensor is exact.
  for (Tensor t : model.all_params()) snap_to_f32(t);
  return model;
}

NamedTensors ClepModel::named_tensors() const {
  NamedTensors out;
  audio.collect("audio", out);
  text.collect("text", out);
  audio_proj.collect("audio_proj", out);
  text_proj.collect("text_proj", out);
  out.emplace_back("log_tau", log_tau);
  if (prompts) out.emplace_back("prompts", prompts->vectors());
  return out;
}

namespace {
std::vector<Tensor> values_of(const NamedTensors &named) {
  std::vector<Tensor> out;
  out.reserve(named.size());
  for (const auto &[name, t] : named) out.push_back(t);
  return out;
}
}  // namespace

std::vector<Tensor> ClepModel::audio_encoder_params() const {
  NamedTensors n;
  audio.collect("audio", n);
  return values_of(n);
}

std::vector<Tensor> ClepModel::text_encoder_params() const {
  NamedTensors n;
  text.collect("text", n);
  return values_of(n);
}

std::vector<Tensor> ClepModel::audio_projection_params() const {
  NamedTensors n;
  audio_proj.collect("audio_proj", n);
  return values_of(n);
}

std::vector<Tensor> ClepModel::text_projection_params() const {
  NamedTensors n;
  text_proj.collect("text_proj", n);
  return values_of(n);
}

std::vector<Tensor> ClepModel::all_params() const {
  NamedTensors n;
  audio.collect("audio", n);
  text.collect("text", n);
  audio_proj.collect("audio_proj", n);
  text_proj.collect("text_proj", n);
  n.emplace_back("log_tau", log_tau);
  return values_of(n);
}

void ClepModel::assign(const std::map<std::string, Tensor> &tensors) {
  NamedTensors own;
  audio.collect("audio", own);
  text.collect("text", own);
  audio_proj.collect("audio_proj", own);
  text_proj.collect("text_proj", own);
  own.emplace_back("log_tau", log_tau);
  for (auto &[name, dst] : own) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw CorruptionError("checkpoint is missing tensor " + name);
    if (it->second.shape() != dst.shape())
      throw CorruptionError("tensor " + name + " has shape " +
                            shape_to_string(it->second.shape()) + ", expected " +
                            shape_to_string(dst.shape()));
    auto src = it->second.data();
    std::copy(src.begin(), src.end(), dst.mutable_data().begin());
  }
  auto it = tensors.find("prompts");
  if (it != tensors.end())
    prompts.emplace(it->second.detach());
  else
    prompts.reset();
}

void set_requires_grad(const std::vector<Tensor> &params, bool value) {
  for (Tensor t : params) {
    t.set_requires_grad(value);
    t.clear_grad();
  }
}

// ---------------------------------------------------------------------------

Tensor stack_mels(std::span<const MelSpectrogram *const> mels) {
  if (mels.empty()) throw ShapeError("stack_mels: no spectrograms");
  const std::size_t t = mels.front()->num_frames, f = mels.front()->num_bands;
  std::vector<double> data;
  data.reserve(mels.size() * t * f);
  for (const MelSpectrogram *m : mels) {
    if (m->num_frames != t || m->num_bands != f)
      throw ShapeError("stack_mels: spectrograms differ in size");
    data.insert(data.end(), m->values.begin(), m->values.end());
  }
  return Tensor({mels.size(), t, f}, std::move(data));
}

Tensor encode_audio(const ClepModel &model, const Tensor &mel_batch) {
  return l2_normalize(model.audio_proj(model.audio(mel_batch)));
}

Tensor encode_text(const ClepModel &model, const std::vector<TextSequence> &batch) {
  return l2_normalize(model.text_proj(model.text(batch)));
}

std::size_t prompted_length(std::size_t num_prompt_tokens, std::size_t num_class_tokens) {
  return 1 + num_prompt_tokens + num_class_tokens;
}

Tensor encode_prompted_class(const ClepModel &model, const PromptBank &bank, int soundscape,
                             std::span<const int> class_tokens, std::size_t length) {
  if (class_tokens.empty()) throw ContractError("encode_prompted_class: no class tokens");
  const std::size_t used = prompted_length(bank.num_tokens(), class_tokens.size());
  if (used > length)
    throw ConfigError("prompt of " + std::to_string(bank.num_tokens()) + " tokens plus " +
                      std::to_string(class_tokens.size()) +
                      " class tokens exceeds the sequence length " + std::to_string(length) +
                      "; use fewer prompt tokens");
  const Tensor prompts = bank.tokens_for(soundscape);
  const int cls = kClsToken;
  std::vector<int> tail(class_tokens.begin(), class_tokens.end());
  tail.resize(length - 1 - bank.num_tokens(), kPadToken);

  const Tensor seq =
      concat({model.text.embed(std::span<const int>(&cls, 1)), prompts, model.text.embed(tail)}, 0);
  std::vector<bool> attend(length, false);
  for (std::size_t i = 0; i < used; ++i) attend[i] = true;
  return l2_normalize(model.text_proj(model.text.forward_embedded(seq, attend)));
}

std::string fill_template(const std::string &templ, const std::string &class_name) {
  static const std::string kSlot = "[CLASS]";
  const auto pos = templ.find(kSlot);
  if (pos == std::string::npos) throw ConfigError("template has no [CLASS] slot: " + templ);
  std::string out = templ;
  out.replace(pos, kSlot.size(), class_name);
  return out;
}

Tensor class_text_embeddings(const ClepModel &model, const std::vector<std::string> &class_names,
                             const std::string &templ) {
  std::vector<TextSequence> batch;
  batch.reserve(class_names.size());
  for (const auto &name : class_names) batch.push_back(tokenize(fill_template(templ, name)));
  return encode_text(model, batch);
}

}  // namespace clepdg
