// include/clepdg/encoders.h

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

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "clepdg/audio.h"
#include "clepdg/rng.h"
#include "clepdg/tensor.h"
#include "clepdg/tokenizer.h"

namespace clepdg {

inline constexpr std::size_t kJointDim = 32;   // D
inline constexpr std::size_t kHiddenDim = 64;  // encoder output before projection
inline constexpr std::size_t kTokenDim = 32;
inline constexpr std::size_t kFeedForwardDim = 64;
inline constexpr std::size_t kDefaultPromptTokens = 8;
inline constexpr double kPromptInitStd = 0.02;
inline constexpr double kTokenInitStd = 1.0;
inline constexpr double kInitialTau = 0.07;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// y = x W + b with W [in, out].
struct Linear {
  Tensor weight;
  Tensor bias;

  static Linear init(std::size_t in, std::size_t out, Rng &rng);
  Tensor operator()(const Tensor &x) const { return add_row(matmul(x, weight), bias); }
  void collect(const std::string &prefix, NamedTensors &out) const;
};

struct Conv3x3 {
  Tensor weight;  // [cout, cin, 3, 3]
  Tensor bias;

  static Conv3x3 init(std::size_t cin, std::size_t cout, Rng &rng);
  Tensor operator()(const Tensor &x) const { return conv2d(x, weight, bias); }
  void collect(const std::string &prefix, NamedTensors &out) const;
};

// Per-clip standardization, three conv/relu/pool blocks (1->8->16->32
// channels), global mean pool, affine to kHiddenDim.
class AudioEncoder {
 public:
  explicit AudioEncoder(Rng &rng);
  // mel [B, T, 40] with T >= 8 -> [B, kHiddenDim]
  Tensor operator()(const Tensor &mel) const;
  void collect(const std::string &prefix, NamedTensors &out) const;

 private:
  Conv3x3 conv1_, conv2_, conv3_;
  Linear head_;
};

// One post-norm transformer block over token embeddings with a PAD key mask;
// the CLS position is read out through an affine map to kHiddenDim.
class TextEncoder {
 public:
  explicit TextEncoder(Rng &rng);

  const Tensor &token_table() const { return embedding_; }
  // [L, kTokenDim] rows of the token table.
  Tensor embed(std::span<const int> ids) const;
  // embedded [L, kTokenDim]; attend[i] false masks position i as a key.
  Tensor forward_embedded(const Tensor &embedded, const std::vector<bool> &attend) const;
  // [B, kHiddenDim]
  Tensor operator()(const std::vector<TextSequence> &batch) const;
  void collect(const std::string &prefix, NamedTensors &out) const;

 private:
  Tensor embedding_;  // [vocab, kTokenDim]
  Linear query_, key_, value_, out_;
  Tensor norm1_gain_, norm1_bias_;
  Linear ff1_, ff2_;
  Tensor norm2_gain_, norm2_bias_;
  Linear readout_;
};

// affine -> relu -> affine into the joint space (unnormalized).
class ProjectionHead {
 public:
  explicit ProjectionHead(Rng &rng);
  Tensor operator()(const Tensor &x) const { return fc2_(relu(fc1_(x))); }
  void collect(const std::string &prefix, NamedTensors &out) const;

 private:
  Linear fc1_, fc2_;
};

// Learnable prompt tokens, one row of num_tokens vectors per soundscape.
class PromptBank {
 public:
  PromptBank(std::size_t num_soundscapes, std::size_t num_tokens, Rng &rng,
             double stddev = kPromptInitStd);
  explicit PromptBank(Tensor vectors);

  std::size_t num_soundscapes() const { return vectors_.dim(0); }
  std::size_t num_tokens() const { return vectors_.dim(1); }
  const Tensor &vectors() const { return vectors_; }
  Tensor &vectors() { return vectors_; }
  // [num_tokens, kTokenDim] view (graph-connected) of one soundscape's prompts.
  Tensor tokens_for(int soundscape) const;

 private:
  Tensor vectors_;  // [S, N_p, kTokenDim]
};

struct ClepModel {
  AudioEncoder audio;
  TextEncoder text;
  ProjectionHead audio_proj;
  ProjectionHead text_proj;
  Tensor log_tau;
  std::optional<PromptBank> prompts;

  // Fresh weights, rounded to f32; all parameters start with requires_grad
  // == false.
  static ClepModel init(std::uint64_t seed);

  NamedTensors named_tensors() const;
  std::vector<Tensor> audio_encoder_params() const;
  std::vector<Tensor> text_encoder_params() const;
  std::vector<Tensor> audio_projection_params() const;
  std::vector<Tensor> text_projection_params() const;
  std::vector<Tensor> all_params() const;  // everything except the prompt bank

  // Copies values by name from `tensors`; throws CorruptionError on a missing
  // name or a shape mismatch. A "prompts" entry becomes the prompt bank.
  void assign(const std::map<std::string, Tensor> &tensors);

 private:
  ClepModel(Rng &rng);
};

void set_requires_grad(const std::vector<Tensor> &params, bool value);

// [B, T, 40] tensor from mel spectrograms of equal length.
Tensor stack_mels(std::span<const MelSpectrogram *const> mels);

// Unit-norm joint-space embeddings.
Tensor encode_audio(const ClepModel &model, const Tensor &mel_batch);
Tensor encode_text(const ClepModel &model, const std::vector<TextSequence> &batch);

// u = T([CLS, v_1..v_Np, class tokens, PAD...]) for one soundscape's
// prompts; `length` bounds the sequence. Throws ConfigError when the prompt
// and class tokens do not fit.
Tensor encode_prompted_class(const ClepModel &model, const PromptBank &bank, int soundscape,
                             std::span<const int> class_tokens,
                             std::size_t length = kTextLength);

// Positions used by a prompted sequence: 1 + N_p + class tokens.
std::size_t prompted_length(std::size_t num_prompt_tokens, std::size_t num_class_tokens);

inline constexpr const char *kDefaultTemplate = "This is a [CLASS] sound";

std::string fill_template(const std::string &templ, const std::string &class_name);
// [C, D] matrix of w_c from template-instantiated captions.
Tensor class_text_embeddings(const ClepModel &model, const std::vector<std::string> &class_names,
                             const std::string &templ = kDefaultTemplate);

}  // namespace clepdg
