// include/clepdg/pipeline.h

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
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clepdg/checkpoint.h"
#include "clepdg/encoders.h"
#include "clepdg/objectives.h"
#include "clepdg/synth.h"

namespace clepdg {

enum class Profile { kDesk, kPaper };

struct PretrainConfig {
  int epochs = 30;
  std::size_t batch_size = 64;
  double audio_lr = 1e-3;
  double projection_lr = 1e-3;
};

enum class ClassifierLoss { kArcFace, kSoftmax };
std::string classifier_loss_name(ClassifierLoss loss);
ClassifierLoss parse_classifier_loss(const std::string &name);

struct ClassifierConfig {
  ClassifierLoss loss = ClassifierLoss::kArcFace;
  int epochs = 50;
  double learning_rate = 2e-3;
  double momentum = 0.9;
  std::size_t batch_size = 16;
  ArcFaceConfig arcface;
};

struct TrainConfig {
  PretrainConfig pretrain;
  AcptConfig acpt{.learning_rate = 1e-2};
  std::size_t prompt_tokens = kDefaultPromptTokens;
  std::size_t max_length = kTextLength;
  ClassifierConfig classifier;
  std::uint64_t seed = 0;

  static TrainConfig for_profile(Profile profile);
  // ConfigError on non-positive rates, sizes or epoch counts.
  void validate() const;
};

// Settings of the multi-seed studies (ablation, loss comparison, sweep).
struct StudyConfig {
  std::vector<std::uint64_t> seeds = {0, 1, 2};
  std::vector<std::size_t> prompt_lengths = {2, 4, 8, 16, 32};
  std::size_t sweep_max_length = 40;
};

// Tab-separated `stage, epoch_or_iter, loss, seed` lines, flushed per line.
class RunLog {
 public:
  RunLog() = default;
  explicit RunLog(std::ostream &os) : os_(&os) {}
  void record(std::string_view stage, int step, double loss, std::uint64_t seed);
  // "# text" comment line (config echo, table headers).
  void note(std::string_view text);

 private:
  std::ostream *os_ = nullptr;
};

// ---------------------------------------------------------------------------
// Data

struct AudioSet {
  std::vector<MelSpectrogram> mels;
  std::vector<int> emotions;
  std::vector<int> soundscapes;
  std::vector<std::string> captions;

  std::size_t size() const { return mels.size(); }
};

AudioSet load_audio_set(const Manifest &manifest, Split split);

struct LoadedCorpus {
  Manifest manifest;
  AudioSet train;
  AudioSet test_in;
  AudioSet test_dg;

  const AudioSet &split(Split s) const;
  std::vector<std::string> emotion_names() const;
};

LoadedCorpus load_corpus(const Manifest &manifest);

// ---------------------------------------------------------------------------
// Stages

struct PretrainResult {
  ClepModel model;
  std::vector<double> epoch_losses;  // mean batch loss per epoch
};

// Contrastive fine-tuning of the audio encoder, both projection heads and
// log tau; the text encoder body stays frozen. Weights are rounded to f32 at
// the end so the in-memory model equals its saved checkpoint.
PretrainResult pretrain(const AudioSet &train, const TrainConfig &config, RunLog &log);

struct AcptResult {
  PromptBank bank;
  std::vector<double> losses;  // one per iteration, before its update
};

// Caption-style text samples used by prompt tuning, one per soundscape and
// emotion.
struct AcptSample {
  TextSequence tokens;
  int emotion = 0;
  int soundscape = 0;
};
std::vector<AcptSample> acpt_samples(const std::vector<std::string> &emotion_names,
                                     const std::vector<int> &soundscapes);

// Optimizes a fresh prompt bank with every model parameter frozen. Bank rows
// of soundscapes not listed keep their initial values.
AcptResult run_acpt(const ClepModel &model, const std::vector<std::string> &emotion_names,
                    const std::vector<int> &soundscapes, const TrainConfig &config,
                    RunLog &log);

struct LabeledEmbeddings {
  Tensor features;  // [N, D], unit rows
  std::vector<int> labels;
  std::vector<int> soundscapes;  // -1 for plain-template rows
};

// Prompted class embeddings for every (soundscape, emotion) of the bank plus
// one plain-template embedding per emotion; only the latter without a bank.
LabeledEmbeddings build_text_training_set(const ClepModel &model, const PromptBank *bank,
                                          const std::vector<std::string> &emotion_names,
                                          std::size_t max_length = kTextLength);

struct Classifier {
  Tensor weights;  // [C, D]
  ClassifierLoss loss = ClassifierLoss::kArcFace;
  ArcFaceConfig arcface;

  std::size_t num_classes() const { return weights.dim(0); }
  int predict(std::span<const double> embedding) const;
  TensorMap to_tensors() const;
  static Classifier from_tensors(const TensorMap &tensors);
};

struct ClassifierResult {
  Classifier classifier;
  std::vector<double> epoch_losses;
  double train_accuracy = 0.0;
};

// Trains class weights on text-derived embeddings only. Throws DataError when
// a class has no examples.
ClassifierResult train_classifier(const LabeledEmbeddings &data, std::size_t num_classes,
                                  const ClassifierConfig &config, std::uint64_t seed,
                                  RunLog &log);

Tensor embed_audio_set(const ClepModel &model, const AudioSet &set);
int infer(const ClepModel &model, const Classifier &classifier, const AudioClip &clip);

struct EvalResult {
  double wa = 0.0;
  double ua = 0.0;
  std::vector<std::vector<long>> confusion;  // [true][predicted]
  std::vector<int> predictions;
};

// WA = trace / total; UA = mean recall over classes with support.
EvalResult score_predictions(std::span<const int> labels, std::span<const int> predictions,
                             std::size_t num_classes);

EvalResult evaluate(const ClepModel &model, const Classifier &classifier, const AudioSet &set);
EvalResult evaluate_zero_shot(const ClepModel &model, const AudioSet &set,
                              const std::vector<std::string> &emotion_names);

// ---------------------------------------------------------------------------
// Studies

struct SeedModel {
  std::uint64_t seed = 0;
  ClepModel fine_tuned;
};

// Pretrains one model per seed (config.seed is replaced by each seed).
std::vector<SeedModel> pretrain_seeds(const LoadedCorpus &corpus, const TrainConfig &config,
                                      const std::vector<std::uint64_t> &seeds, RunLog &log);

// Prompt tuning (optional) + classifier + evaluation on one model.
struct CellOutcome {
  EvalResult test_in;
  EvalResult test_dg;
};
CellOutcome run_cell(const ClepModel &model, const LoadedCorpus &corpus, bool use_acpt,
                     const TrainConfig &config, RunLog &log);

struct AblationRun {
  bool fine_tune = false;
  bool acpt = false;
  Split split = Split::kTestIn;
  std::uint64_t seed = 0;
  EvalResult result;
};

struct AblationReport {
  std::vector<AblationRun> runs;

  double mean_wa(bool fine_tune, bool acpt, Split split) const;
  double mean_ua(bool fine_tune, bool acpt, Split split) const;
  // Header row plus one row per cell, columns: fine_tune, acpt, then mean WA
  // and UA per split.
  std::string table() const;
  // One row per run: fine_tune, acpt, split, seed, wa, ua.
  std::string runs_table() const;
};

// The "no fine-tune" cells use the randomly initialized model of each seed.
AblationReport ablate(const LoadedCorpus &corpus, const TrainConfig &config,
                      const std::vector<SeedModel> &models, RunLog &log);

struct LossComparisonRow {
  ClassifierLoss loss = ClassifierLoss::kArcFace;
  std::uint64_t seed = 0;
  CellOutcome outcome;
};
std::vector<LossComparisonRow> compare_classifier_losses(const LoadedCorpus &corpus,
                                                         const TrainConfig &config,
                                                         const std::vector<SeedModel> &models,
                                                         RunLog &log);
std::string loss_comparison_table(const std::vector<LossComparisonRow> &rows);

struct SweepRow {
  std::size_t prompt_tokens = 0;
  std::uint64_t seed = 0;
  double wa = 0.0;
  double ua = 0.0;
};

// ACPT + classifier + test_dg evaluation for every prompt length and seed.
std::vector<SweepRow> prompt_length_sweep(const LoadedCorpus &corpus, const TrainConfig &config,
                                          const StudyConfig &study,
                                          const std::vector<SeedModel> &models, RunLog &log);
std::string sweep_table(const std::vector<SweepRow> &rows);

// ---------------------------------------------------------------------------
// Persistence

TensorMap model_tensors(const ClepModel &model);
ClepModel model_from_tensors(const TensorMap &tensors);
// FNV-1a over the bit patterns of every model parameter except the prompts.
std::uint64_t parameter_checksum(const ClepModel &model);

}  // namespace clepdg
