// src/pipeline.cc

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

#include "clepdg/pipeline.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>

#include "clepdg/error.h"
#include "clepdg/optim.h"

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace clepdg {

namespace {

// Independent random streams derived from the run seed.
constexpr std::uint64_t kModelStream = 1;
constexpr std::uint64_t kShuffleStream = 2;
constexpr std::uint64_t kPromptStream = 3;
constexpr std::uint64_t kClassifierShuffleStream = 5;

constexpr std::size_t kEvalBatch = 32;

const char *const kAcptTemplates[] = {"This is a [S] [E] sound"};

// Training allocates and frees the same large activation buffers every step;
// keeping them in the heap avoids a page-fault storm on each allocation.
void retain_heap() {
#ifdef __GLIBC__
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    return true;
  }();
  (void)once;
#endif
}

std::vector<std::size_t> shuffled(std::size_t n, Rng &rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.below(i)]);
  return p;
}

// Constant (non-differentiable) copy of the selected rows.
Tensor gather_rows(const Tensor &m, std::span<const std::size_t> rows) {
  const std::size_t w = m.dim(1);
  std::vector<double> out(rows.size() * w);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(m.data().begin() + rows[i] * w, w, out.begin() + i * w);
  return Tensor({rows.size(), w}, std::move(out));
}

std::string replace_all(std::string s, const std::string &from, const std::string &to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size()))
    s.replace(pos, from.size(), to);
  return s;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void require_positive(double v, const char *what) {
  if (!(v > 0.0)) throw ConfigError(std::string(what) + " must be positive");
}

void require_at_least(long long v, long long lo, const char *what) {
  if (v < lo) throw ConfigError(std::string(what) + " must be at least " + std::to_string(lo));
}

}  // namespace

std::string classifier_loss_name(ClassifierLoss loss) {
  return loss == ClassifierLoss::kArcFace ? "arcface" : "softmax";
}

ClassifierLoss parse_classifier_loss(const std::string &name) {
  if (name == "arcface") return ClassifierLoss::kArcFace;
  if (name == "softmax") return ClassifierLoss::kSoftmax;
  throw ConfigError("unknown classifier loss '" + name + "' (expected arcface or softmax)");
}

TrainConfig TrainConfig::for_profile(Profile profile) {
  TrainConfig c;
  if (profile == Profile::kPaper) {
    c.pretrain.epochs = 80;
    c.pretrain.audio_lr = 1e-5;
    c.acpt.learning_rate = 2e-3;
  }
  return c;
}

void TrainConfig::validate() const {
  require_at_least(pretrain.epochs, 1, "pretrain.epochs");
  require_at_least(static_cast<long long>(pretrain.batch_size), 1, "pretrain.batch_size");
  require_positive(pretrain.audio_lr, "pretrain.audio_lr");
  require_positive(pretrain.projection_lr, "pretrain.projection_lr");
  acpt.validate();
  require_at_least(static_cast<long long>(prompt_tokens), 1, "acpt.prompt_tokens");
  require_at_least(static_cast<long long>(max_length), 3, "acpt.max_length");
  require_at_least(classifier.epochs, 1, "classifier.epochs");
  require_at_least(static_cast<long long>(classifier.batch_size), 1, "classifier.batch_size");
  require_positive(classifier.learning_rate, "classifier.learning_rate");
  if (!(classifier.momentum >= 0.0 && classifier.momentum < 1.0))
    throw ConfigError("classifier.momentum must lie in [0, 1)");
  classifier.arcface.validate();
}

void RunLog::record(std::string_view stage, int step, double loss, std::uint64_t seed) {
  if (!os_) return;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", loss);
  *os_ << stage << '\t' << step << '\t' << buf << '\t' << seed << '\n';
  os_->flush();
}

void RunLog::note(std::string_view text) {
  if (!os_) return;
  *os_ << "# " << text << '\n';
  os_->flush();
}

// ---------------------------------------------------------------------------
// Data

AudioSet load_audio_set(const Manifest &manifest, Split split) {
  AudioSet set;
  for (const Record *r : manifest.split(split)) {
    set.mels.push_back(log_mel(load_clip(manifest.clip_file(*r))));
    set.emotions.push_back(r->emotion);
    set.soundscapes.push_back(r->soundscape);
    set.captions.push_back(r->caption);
  }
  return set;
}

const AudioSet &LoadedCorpus::split(Split s) const {
  switch (s) {
    case Split::kTrain: return train;
    case Split::kTestIn: return test_in;
    case Split::kTestDg: return test_dg;
  }
  return train;
}

std::vector<std::string> LoadedCorpus::emotion_names() const {
  std::vector<std::string> names;
  for (const auto &e : manifest.emotions) names.push_back(e.name);
  return names;
}

LoadedCorpus load_corpus(const Manifest &manifest) {
  LoadedCorpus c;
  c.manifest = manifest;
  c.train = load_audio_set(manifest, Split::kTrain);
  c.test_in = load_audio_set(manifest, Split::kTestIn);
  c.test_dg = load_audio_set(manifest, Split::kTestDg);
  return c;
}

// ---------------------------------------------------------------------------
// Pretraining

PretrainResult pretrain(const AudioSet &train, const TrainConfig &config, RunLog &log) {
  config.validate();
  const std::size_t n = train.size();
  if (n == 0) throw DataError("pretrain: the training split is empty");
  retain_heap();

  PretrainResult result{ClepModel::init(derive_seed(config.seed, kModelStream)), {}};
  ClepModel &model = result.model;

  // The text encoder body is frozen, so its features are computed once.
  std::map<std::string, std::size_t> caption_row;
  std::vector<TextSequence> captions;
  std::vector<std::size_t> clip_row(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, fresh] = caption_row.emplace(train.captions[i], captions.size());
    if (fresh) captions.push_back(tokenize(train.captions[i]));
    clip_row[i] = it->second;
  }
  Tensor text_hidden;
  {
    NoGradGuard no_grad;
    text_hidden = model.text(captions).detach();
  }

  const auto audio_params = model.audio_encoder_params();
  auto head_params = model.audio_projection_params();
  for (const Tensor &t : model.text_projection_params()) head_params.push_back(t);
  head_params.push_back(model.log_tau);
  const auto frozen = model.text_encoder_params();
  set_requires_grad(audio_params, true);
  set_requires_grad(head_params, true);
  set_requires_grad(frozen, false);
  Optimizer audio_opt(OptimizerConfig::adam(config.pretrain.audio_lr), audio_params);
  Optimizer head_opt(OptimizerConfig::adam(config.pretrain.projection_lr), head_params);

  Rng rng(derive_seed(config.seed, kShuffleStream));
  const std::size_t batch = std::min(config.pretrain.batch_size, n);
  const std::size_t num_batches = n / batch;  // trailing partial batch dropped
  for (int epoch = 1; epoch <= config.pretrain.epochs; ++epoch) {
    const auto order = shuffled(n, rng);
    double total = 0.0;
    for (std::size_t b = 0; b < num_batches; ++b) {
      std::span<const std::size_t> idx(order.data() + b * batch, batch);
      std::vector<const MelSpectrogram *> mels;
      std::vector<std::size_t> rows;
      for (std::size_t i : idx) {
        mels.push_back(&train.mels[i]);
        rows.push_back(clip_row[i]);
      }
      const Tensor audio = encode_audio(model, stack_mels(mels));
      const Tensor text = l2_normalize(model.text_proj(gather_rows(text_hidden, rows)));
      const Tensor loss = contrastive_loss(audio, text, model.log_tau);
      total += loss.item();
      backward(loss);
      for (const Tensor &t : frozen)
        if (t.has_grad()) throw ContractError("pretrain: frozen text encoder received a gradient");
      audio_opt.step();
      head_opt.step();
    }
    const double mean_loss = total / static_cast<double>(num_batches);
    result.epoch_losses.push_back(mean_loss);
    log.record("pretrain", epoch, mean_loss, config.seed);
  }

  set_requires_grad(model.all_params(), false);
  for (Tensor t : model.all_params()) snap_to_f32(t);
  return result;
}

// ---------------------------------------------------------------------------
// Prompt tuning

std::vector<AcptSample> acpt_samples(const std::vector<std::string> &emotion_names,
                                     const std::vector<int> &soundscapes) {
  std::vector<AcptSample> out;
  for (int s : soundscapes)
    for (std::size_t e = 0; e < emotion_names.size(); ++e)
      for (const char *templ : kAcptTemplates) {
        std::string text = replace_all(templ, "[E]", emotion_names[e]);
        text = replace_all(text, "[S]", soundscape_by_id(s).name);
        out.push_back({tokenize(text), static_cast<int>(e), s});
      }
  return out;
}

AcptResult run_acpt(const ClepModel &model, const std::vector<std::string> &emotion_names,
                    const std::vector<int> &soundscapes, const TrainConfig &config,
                    RunLog &log) {
  config.validate();
  if (emotion_names.empty() || soundscapes.empty())
    throw DataError("acpt: needs at least one emotion and one soundscape");
  std::vector<std::vector<int>> class_tokens;
  for (const auto &name : emotion_names) {
    class_tokens.push_back(word_ids(name));
    if (prompted_length(config.prompt_tokens, class_tokens.back().size()) > config.max_length)
      throw ConfigError("acpt: " + std::to_string(config.prompt_tokens) +
                        " prompt tokens do not fit a sequence of " +
                        std::to_string(config.max_length) + " with class '" + name +
                        "'; use fewer prompt tokens");
  }

  const auto samples = acpt_samples(emotion_names, soundscapes);
  std::vector<TextSequence> tokens;
  for (const auto &s : samples) tokens.push_back(s.tokens);
  Tensor text;
  {
    NoGradGuard no_grad;
    text = encode_text(model, tokens).detach();
  }

  struct Group {
    int soundscape;
    Tensor text;
    std::vector<int> labels;
  };
  std::vector<Group> groups;
  for (int s : soundscapes) {
    std::vector<std::size_t> rows;
    std::vector<int> labels;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (samples[i].soundscape == s) {
        rows.push_back(i);
        labels.push_back(samples[i].emotion);
      }
    groups.push_back({s, gather_rows(text, rows), std::move(labels)});
  }

  Rng rng(derive_seed(config.seed, kPromptStream));
  AcptResult result{PromptBank(kNumSoundscapes, config.prompt_tokens, rng), {}};
  Tensor prompts = result.bank.vectors();
  prompts.set_requires_grad(true);
  Optimizer opt(OptimizerConfig::sgd(config.acpt.learning_rate, config.acpt.momentum), {prompts});

  const auto params = model.all_params();
  const std::uint64_t before = parameter_checksum(model);
  for (int it = 1; it <= config.acpt.iterations; ++it) {
    Tensor total;
    for (const Group &g : groups) {
      std::vector<Tensor> rows;
      for (const auto &ct : class_tokens)
        rows.push_back(
            encode_prompted_class(model, result.bank, g.soundscape, ct, config.max_length));
      const Tensor loss = acpt_loss(g.text, concat(rows, 0), g.labels, config.acpt.omega);
      total = total.impl() ? add(total, loss) : loss;
    }
    result.losses.push_back(total.item());
    log.record("acpt", it, total.item(), config.seed);
    backward(total);
    for (const Tensor &t : params)
      if (t.has_grad()) throw ContractError("acpt: a frozen model parameter received a gradient");
    opt.step();
  }
  prompts.set_requires_grad(false);
  if (parameter_checksum(model) != before)
    throw ContractError("acpt: model parameters changed during prompt tuning");
  return result;
}

LabeledEmbeddings build_text_training_set(const ClepModel &model, const PromptBank *bank,
                                          const std::vector<std::string> &emotion_names,
                                          std::size_t max_length) {
  NoGradGuard no_grad;
  std::vector<Tensor> rows;
  LabeledEmbeddings out;
  if (bank) {
    for (std::size_t s = 0; s < bank->num_soundscapes(); ++s)
      for (std::size_t e = 0; e < emotion_names.size(); ++e) {
        const auto ids = word_ids(emotion_names[e]);
        rows.push_back(
            encode_prompted_class(model, *bank, static_cast<int>(s), ids, max_length));
        out.labels.push_back(static_cast<int>(e));
        out.soundscapes.push_back(static_cast<int>(s));
      }
  }
  rows.push_back(class_text_embeddings(model, emotion_names));
  for (std::size_t e = 0; e < emotion_names.size(); ++e) {
    out.labels.push_back(static_cast<int>(e));
    out.soundscapes.push_back(-1);
  }
  out.features = (rows.size() == 1 ? rows.front() : concat(rows, 0)).detach();
  return out;
}

// ---------------------------------------------------------------------------
// Classifier

int Classifier::predict(std::span<const double> embedding) const {
  return loss == ClassifierLoss::kArcFace ? predict_zero_shot(embedding, weights)
                                          : predict_linear(embedding, weights);
}

TensorMap Classifier::to_tensors() const {
  TensorMap m;
  m.emplace("classifier.weights", weights.detach());
  m.emplace("classifier.loss_kind", Tensor::scalar(loss == ClassifierLoss::kArcFace ? 0.0 : 1.0));
  m.emplace("classifier.scale", Tensor::scalar(arcface.scale));
  m.emplace("classifier.margin", Tensor::scalar(arcface.margin));
  return m;
}

Classifier Classifier::from_tensors(const TensorMap &tensors) {
  auto get = [&](const std::string &name) -> const Tensor & {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw CorruptionError("classifier checkpoint lacks " + name);
    return it->second;
  };
  Classifier c;
  c.weights = get("classifier.weights").detach();
  if (c.weights.rank() != 2 || c.weights.dim(1) != kJointDim || c.weights.dim(0) == 0)
    throw CorruptionError("classifier weights have shape " + shape_to_string(c.weights.shape()));
  const double kind = get("classifier.loss_kind").item();
  if (kind != 0.0 && kind != 1.0) throw CorruptionError("classifier loss kind is invalid");
  c.loss = kind == 0.0 ? ClassifierLoss::kArcFace : ClassifierLoss::kSoftmax;
  c.arcface.scale = get("classifier.scale").item();
  c.arcface.margin = get("classifier.margin").item();
  return c;
}

ClassifierResult train_classifier(const LabeledEmbeddings &data, std::size_t num_classes,
                                  const ClassifierConfig &config, std::uint64_t seed,
                                  RunLog &log) {
  config.arcface.validate();
  const std::size_t n = data.labels.size();
  if (data.features.rank() != 2 || data.features.dim(0) != n)
    throw ContractError("train_classifier: features and labels disagree");
  std::vector<std::size_t> support(num_classes, 0);
  for (int y : data.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes)
      throw ContractError("train_classifier: label " + std::to_string(y) + " out of range");
    ++support[static_cast<std::size_t>(y)];
  }
  for (std::size_t c = 0; c < num_classes; ++c)
    if (support[c] == 0)
      throw DataError("train_classifier: class " + std::to_string(c) + " has no features");

  // Each class row starts at the unit mean of its features.
  const std::size_t d = data.features.dim(1);
  std::vector<double> w(num_classes * d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j)
      w[static_cast<std::size_t>(data.labels[i]) * d + j] += data.features.at(i, j);
  for (std::size_t c = 0; c < num_classes; ++c) {
    double norm = 0.0;
    for (std::size_t j = 0; j < d; ++j) norm += w[c * d + j] * w[c * d + j];
    norm = std::sqrt(norm);
    if (norm == 0.0) throw DomainError("train_classifier: class " + std::to_string(c) + " features sum to zero");
    for (std::size_t j = 0; j < d; ++j) w[c * d + j] /= norm;
  }
  Tensor weights({num_classes, d}, std::move(w), true);
  Optimizer opt(OptimizerConfig::sgd(config.learning_rate, config.momentum), {weights});

  ClassifierResult result;
  Rng rng(derive_seed(seed, kClassifierShuffleStream));
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = shuffled(n, rng);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, n - start);
      std::span<const std::size_t> idx(order.data() + start, len);
      std::vector<int> labels;
      for (std::size_t i : idx) labels.push_back(data.labels[i]);
      const Tensor x = gather_rows(data.features, idx);
      const Tensor loss = config.loss == ClassifierLoss::kArcFace
                              ? arcface_loss(x, weights, labels, config.arcface)
                              : softmax_classifier_loss(x, weights, labels);
      total += loss.item() * static_cast<double>(len);
      backward(loss);
      opt.step();
    }
    const double mean_loss = total / static_cast<double>(n);
    result.epoch_losses.push_back(mean_loss);
    log.record("classifier", epoch, mean_loss, seed);
  }
  weights.set_requires_grad(false);
  result.classifier = {weights.detach(), config.loss, config.arcface};

  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i)
    if (result.classifier.predict(data.features.data().subspan(i * d, d)) == data.labels[i])
      ++correct;
  result.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
  return result;
}

// ---------------------------------------------------------------------------
// Inference and evaluation

Tensor embed_audio_set(const ClepModel &model, const AudioSet &set) {
  NoGradGuard no_grad;
  std::vector<double> out;
  out.reserve(set.size() * kJointDim);
  for (std::size_t start = 0; start < set.size(); start += kEvalBatch) {
    std::vector<const MelSpectrogram *> mels;
    for (std::size_t i = start; i < std::min(set.size(), start + kEvalBatch); ++i)
      mels.push_back(&set.mels[i]);
    const Tensor emb = encode_audio(model, stack_mels(mels));
    out.insert(out.end(), emb.data().begin(), emb.data().end());
  }
  return Tensor({set.size(), kJointDim}, std::move(out));
}

int infer(const ClepModel &model, const Classifier &classifier, const AudioClip &clip) {
  NoGradGuard no_grad;
  const MelSpectrogram mel = log_mel(clip);
  const MelSpectrogram *one[] = {&mel};
  const Tensor emb = encode_audio(model, stack_mels(one));
  return classifier.predict(emb.data());
}

EvalResult score_predictions(std::span<const int> labels, std::span<const int> predictions,
                             std::size_t num_classes) {
  if (labels.size() != predictions.size())
    throw ContractError("score_predictions: label and prediction counts differ");
  if (labels.empty()) throw DataError("score_predictions: no samples");
  EvalResult r;
  r.confusion.assign(num_classes, std::vector<long>(num_classes, 0));
  long correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || predictions[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes ||
        static_cast<std::size_t>(predictions[i]) >= num_classes)
      throw ContractError("score_predictions: class id out of range");
    ++r.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])];
    if (labels[i] == predictions[i]) ++correct;
  }
  r.wa = static_cast<double>(correct) / static_cast<double>(labels.size());
  double recall_sum = 0.0;
  std::size_t supported = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    long row = 0;
    for (long v : r.confusion[c]) row += v;
    if (row == 0) continue;
    recall_sum += static_cast<double>(r.confusion[c][c]) / static_cast<double>(row);
    ++supported;
  }
  r.ua = recall_sum / static_cast<double>(supported);
  r.predictions.assign(predictions.begin(), predictions.end());
  return r;
}

EvalResult evaluate(const ClepModel &model, const Classifier &classifier, const AudioSet &set) {
  if (set.size() == 0) throw DataError("evaluate: the split is empty");
  const Tensor emb = embed_audio_set(model, set);
  std::vector<int> pred(set.size());
  for (std::size_t i = 0; i < set.size(); ++i)
    pred[i] = classifier.predict(emb.data().subspan(i * kJointDim, kJointDim));
  return score_predictions(set.emotions, pred, classifier.num_classes());
}

EvalResult evaluate_zero_shot(const ClepModel &model, const AudioSet &set,
                              const std::vector<std::string> &emotion_names) {
  if (set.size() == 0) throw DataError("evaluate: the split is empty");
  Tensor classes;
  {
    NoGradGuard no_grad;
    classes = class_text_embeddings(model, emotion_names);
  }
  const auto pred = predict_zero_shot(embed_audio_set(model, set), classes);
  return score_predictions(set.emotions, pred, emotion_names.size());
}

// ---------------------------------------------------------------------------
// Studies

std::vector<SeedModel> pretrain_seeds(const LoadedCorpus &corpus, const TrainConfig &config,
                                      const std::vector<std::uint64_t> &seeds, RunLog &log) {
  std::vector<SeedModel> out;
  for (std::uint64_t seed : seeds) {
    TrainConfig c = config;
    c.seed = seed;
    out.push_back({seed, pretrain(corpus.train, c, log).model});
  }
  return out;
}

CellOutcome run_cell(const ClepModel &model, const LoadedCorpus &corpus, bool use_acpt,
                     const TrainConfig &config, RunLog &log) {
  const auto names = corpus.emotion_names();
  std::optional<AcptResult> acpt;
  if (use_acpt) acpt = run_acpt(model, names, corpus.manifest.soundscape_ids(), config, log);
  const auto data =
      build_text_training_set(model, acpt ? &acpt->bank : nullptr, names, config.max_length);
  const auto cls = train_classifier(data, names.size(), config.classifier, config.seed, log);
  return {evaluate(model, cls.classifier, corpus.test_in),
          evaluate(model, cls.classifier, corpus.test_dg)};
}

AblationReport ablate(const LoadedCorpus &corpus, const TrainConfig &config,
                      const std::vector<SeedModel> &models, RunLog &log) {
  AblationReport report;
  for (const SeedModel &m : models) {
    TrainConfig c = config;
    c.seed = m.seed;
    const ClepModel untrained = ClepModel::init(derive_seed(m.seed, kModelStream));
    for (bool acpt : {false, true})
      for (bool ft : {false, true}) {
        const CellOutcome o = run_cell(ft ? m.fine_tuned : untrained, corpus, acpt, c, log);
        report.runs.push_back({ft, acpt, Split::kTestIn, m.seed, o.test_in});
        report.runs.push_back({ft, acpt, Split::kTestDg, m.seed, o.test_dg});
      }
  }
  return report;
}

double AblationReport::mean_wa(bool fine_tune, bool acpt, Split split) const {
  double s = 0.0;
  int k = 0;
  for (const auto &r : runs)
    if (r.fine_tune == fine_tune && r.acpt == acpt && r.split == split) {
      s += r.result.wa;
      ++k;
    }
  return k ? s / k : 0.0;
}

double AblationReport::mean_ua(bool fine_tune, bool acpt, Split split) const {
  double s = 0.0;
  int k = 0;
  for (const auto &r : runs)
    if (r.fine_tune == fine_tune && r.acpt == acpt && r.split == split) {
      s += r.result.ua;
      ++k;
    }
  return k ? s / k : 0.0;
}

std::string AblationReport::table() const {
  std::ostringstream os;
  os << "# reference average accuracy (%) by row: 23.89, 49.74, 25.04, 52.39 "
        "(last row also reported as 52.59)\n";
  os << "fine_tune\tacpt\ttest_in_wa\ttest_in_ua\ttest_dg_wa\ttest_dg_ua\n";
  const std::pair<bool, bool> rows[] = {{false, false}, {true, false}, {false, true}, {true, true}};
  for (auto [ft, acpt] : rows)
    os << (ft ? "yes" : "no") << '\t' << (acpt ? "yes" : "no") << '\t'
       << fmt(mean_wa(ft, acpt, Split::kTestIn)) << '\t' << fmt(mean_ua(ft, acpt, Split::kTestIn))
       << '\t' << fmt(mean_wa(ft, acpt, Split::kTestDg)) << '\t'
       << fmt(mean_ua(ft, acpt, Split::kTestDg)) << '\n';
  return os.str();
}

std::string AblationReport::runs_table() const {
  std::ostringstream os;
  os << "fine_tune\tacpt\tsplit\tseed\twa\tua\n";
  for (const auto &r : runs)
    os << (r.fine_tune ? "yes" : "no") << '\t' << (r.acpt ? "yes" : "no") << '\t'
       << split_name(r.split) << '\t' << r.seed << '\t' << fmt(r.result.wa) << '\t'
       << fmt(r.result.ua) << '\n';
  return os.str();
}

std::vector<LossComparisonRow> compare_classifier_losses(const LoadedCorpus &corpus,
                                                         const TrainConfig &config,
                                                         const std::vector<SeedModel> &models,
                                                         RunLog &log) {
  std::vector<LossComparisonRow> rows;
  for (ClassifierLoss loss : {ClassifierLoss::kSoftmax, ClassifierLoss::kArcFace})
    for (const SeedModel &m : models) {
      TrainConfig c = config;
      c.seed = m.seed;
      c.classifier.loss = loss;
      rows.push_back({loss, m.seed, run_cell(m.fine_tuned, corpus, true, c, log)});
    }
  return rows;
}

std::string loss_comparison_table(const std::vector<LossComparisonRow> &rows) {
  std::ostringstream os;
  os << "loss\tseed\ttest_in_wa\ttest_in_ua\ttest_dg_wa\ttest_dg_ua\n";
  for (ClassifierLoss loss : {ClassifierLoss::kSoftmax, ClassifierLoss::kArcFace}) {
    double sums[4] = {0, 0, 0, 0};
    int k = 0;
    for (const auto &r : rows) {
      if (r.loss != loss) continue;
      const double v[4] = {r.outcome.test_in.wa, r.outcome.test_in.ua, r.outcome.test_dg.wa,
                           r.outcome.test_dg.ua};
      os << classifier_loss_name(loss) << '\t' << r.seed;
      for (int i = 0; i < 4; ++i) {
        os << '\t' << fmt(v[i]);
        sums[i] += v[i];
      }
      os << '\n';
      ++k;
    }
    if (k == 0) continue;
    os << classifier_loss_name(loss) << "\tmean";
    for (double s : sums) os << '\t' << fmt(s / k);
    os << '\n';
  }
  return os.str();
}

std::vector<SweepRow> prompt_length_sweep(const LoadedCorpus &corpus, const TrainConfig &config,
                                          const StudyConfig &study,
                                          const std::vector<SeedModel> &models, RunLog &log) {
  const auto names = corpus.emotion_names();
  std::vector<SweepRow> rows;
  for (std::size_t np : study.prompt_lengths)
    for (const SeedModel &m : models) {
      TrainConfig c = config;
      c.seed = m.seed;
      c.prompt_tokens = np;
      c.max_length = study.sweep_max_length;
      const auto acpt =
          run_acpt(m.fine_tuned, names, corpus.manifest.soundscape_ids(), c, log);
      const auto data = build_text_training_set(m.fine_tuned, &acpt.bank, names, c.max_length);
      const auto cls = train_classifier(data, names.size(), c.classifier, c.seed, log);
      const EvalResult r = evaluate(m.fine_tuned, cls.classifier, corpus.test_dg);
      rows.push_back({np, m.seed, r.wa, r.ua});
    }
  return rows;
}

std::string sweep_table(const std::vector<SweepRow> &rows) {
  std::ostringstream os;
  os << "prompt_tokens\tseed\twa\tua\n";
  for (const auto &r : rows)
    os << r.prompt_tokens << '\t' << r.seed << '\t' << fmt(r.wa) << '\t' << fmt(r.ua) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Persistence

TensorMap model_tensors(const ClepModel &model) {
  TensorMap m;
  for (const auto &[name, t] : model.named_tensors()) m.emplace(name, t.detach());
  return m;
}

ClepModel model_from_tensors(const TensorMap &tensors) {
  ClepModel model = ClepModel::init(0);
  model.assign(tensors);
  return model;
}

std::uint64_t parameter_checksum(const ClepModel &model) {
  std::vector<unsigned char> bytes;
  for (const auto &[name, t] : model.named_tensors()) {
    if (name == "prompts") continue;
    bytes.insert(bytes.end(), name.begin(), name.end());
    for (double v : t.data()) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<unsigned char>(bits >> (8 * i)));
    }
  }
  return fnv1a64(bytes);
}

}  // namespace clepdg
