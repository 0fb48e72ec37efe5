// tests/pipeline_test.cc

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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "clepdg/error.h"
#include "clepdg/optim.h"
#include "clepdg/rng.h"

namespace clepdg {
namespace {

// ---------------------------------------------------------------------------
// Metrics

EvalResult score(const std::vector<int> &labels, const std::vector<int> &pred, std::size_t c) {
  return score_predictions(labels, pred, c);
}

TEST(Metrics, UnbalancedExample) {
  // Class 0: 3 samples, all right. Class 1: 1 sample, wrong.
  const EvalResult r = score({0, 0, 0, 1}, {0, 0, 0, 0}, 2);
  EXPECT_EQ(r.wa, 0.75);
  EXPECT_EQ(r.ua, 0.5);
  EXPECT_EQ(r.confusion, (std::vector<std::vector<long>>{{3, 0}, {1, 0}}));
  EXPECT_EQ(r.predictions, (std::vector<int>{0, 0, 0, 0}));
}

TEST(Metrics, AllCorrect) {
  const EvalResult r = score({2, 0, 1, 2, 3}, {2, 0, 1, 2, 3}, 4);
  EXPECT_EQ(r.wa, 1.0);
  EXPECT_EQ(r.ua, 1.0);
}

TEST(Metrics, HandComputedThreeClass) {
  // Recalls 1/2, 2/3, 0/1 -> UA = (1/2 + 2/3 + 0) / 3; WA = 3/6.
  const EvalResult r = score({0, 0, 1, 1, 1, 2}, {0, 1, 1, 1, 0, 0}, 3);
  EXPECT_EQ(r.wa, 0.5);
  EXPECT_NEAR(r.ua, (0.5 + 2.0 / 3.0) / 3.0, 1e-15);
}

TEST(Metrics, ClassesWithoutSupportAreExcludedFromUa) {
  const EvalResult r = score({0, 0, 2, 2}, {0, 1, 2, 2}, 4);
  EXPECT_EQ(r.ua, (0.5 + 1.0) / 2.0);
  EXPECT_EQ(r.wa, 0.75);
}

TEST(Metrics, BalancedEqualRecallGivesWaEqualUa) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t classes = 2 + rng.below(4), per = 1 + rng.below(10);
    const std::size_t right = rng.below(per + 1);
    std::vector<int> labels, pred;
    for (std::size_t c = 0; c < classes; ++c)
      for (std::size_t i = 0; i < per; ++i) {
        labels.push_back(static_cast<int>(c));
        pred.push_back(i < right ? static_cast<int>(c) : static_cast<int>((c + 1) % classes));
      }
    const EvalResult r = score(labels, pred, classes);
    EXPECT_NEAR(r.wa, r.ua, 1e-12);
  }
}

TEST(Metrics, DefinitionsHoldOnRandomInputs) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t classes = 2 + rng.below(5), n = 1 + rng.below(60);
    std::vector<int> labels(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng.below(classes));
      pred[i] = static_cast<int>(rng.below(classes));
    }
    const EvalResult r = score(labels, pred, classes);
    long total = 0, trace = 0;
    double recall = 0.0;
    int supported = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      long row = 0;
      for (long v : r.confusion[c]) row += v;
      total += row;
      trace += r.confusion[c][c];
      if (row) {
        recall += static_cast<double>(r.confusion[c][c]) / static_cast<double>(row);
        ++supported;
      }
    }
    EXPECT_EQ(total, static_cast<long>(n));
    EXPECT_EQ(r.wa, static_cast<double>(trace) / static_cast<double>(total));
    EXPECT_NEAR(r.ua, recall / supported, 1e-15);
    EXPECT_GE(r.wa, 0.0);
    EXPECT_LE(r.ua, 1.0);
  }
}

TEST(Metrics, DuplicatingEverySampleChangesNothing) {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t classes = 2 + rng.below(4), n = 1 + rng.below(40), k = 2 + rng.below(4);
    std::vector<int> labels(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng.below(classes));
      pred[i] = static_cast<int>(rng.below(classes));
    }
    std::vector<int> dl, dp;
    for (std::size_t rep = 0; rep < k; ++rep) {
      dl.insert(dl.end(), labels.begin(), labels.end());
      dp.insert(dp.end(), pred.begin(), pred.end());
    }
    const EvalResult a = score(labels, pred, classes), b = score(dl, dp, classes);
    EXPECT_EQ(a.wa, b.wa);
    EXPECT_EQ(a.ua, b.ua);
  }
}

TEST(Metrics, DuplicatingOneClassKeepsUaAndPullsWaToItsRecall) {
  Rng rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t classes = 2 + rng.below(4), n = 4 + rng.below(40), k = 2 + rng.below(4);
    std::vector<int> labels(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(i < classes ? i : rng.below(classes));
      pred[i] = static_cast<int>(rng.below(classes));
    }
    const int target = static_cast<int>(rng.below(classes));
    std::vector<int> dl(labels), dp(pred);
    for (std::size_t rep = 1; rep < k; ++rep)
      for (std::size_t i = 0; i < n; ++i)
        if (labels[i] == target) {
          dl.push_back(labels[i]);
          dp.push_back(pred[i]);
        }
    const EvalResult a = score(labels, pred, classes), b = score(dl, dp, classes);
    const auto &row = a.confusion[static_cast<std::size_t>(target)];
    long support = 0;
    for (long v : row) support += v;
    const double recall = static_cast<double>(row[static_cast<std::size_t>(target)]) / support;
    EXPECT_EQ(a.ua, b.ua);
    EXPECT_LE(std::abs(b.wa - recall), std::abs(a.wa - recall) + 1e-15);
  }
}

TEST(Metrics, Errors) {
  EXPECT_THROW(score({}, {}, 2), DataError);
  EXPECT_THROW(score({0, 1}, {0}, 2), ContractError);
  EXPECT_THROW(score({0, 2}, {0, 1}, 2), ContractError);
  EXPECT_THROW(score({0, 1}, {0, -1}, 2), ContractError);
}

// ---------------------------------------------------------------------------
// Configuration

TEST(TrainConfigTest, Defaults) {
  const TrainConfig c;
  EXPECT_EQ(c.prompt_tokens, 8u);
  EXPECT_EQ(c.acpt.iterations, 120);
  EXPECT_EQ(c.pretrain.batch_size, 64u);
  EXPECT_NO_THROW(c.validate());
  EXPECT_NO_THROW(TrainConfig::for_profile(Profile::kPaper).validate());
}

TEST(TrainConfigTest, RejectsZeroEpochsAndRates) {
  TrainConfig c;
  c.pretrain.epochs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.classifier.learning_rate = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.acpt.iterations = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.pretrain.projection_lr = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(RunLogTest, DelimitedLines) {
  std::ostringstream os;
  RunLog log(os);
  log.record("pretrain", 3, 0.25, 7);
  log.note("hello");
  EXPECT_EQ(os.str(), "pretrain\t3\t0.25\t7\n# hello\n");
  RunLog silent;
  silent.record("x", 1, 1.0, 0);
}

// ---------------------------------------------------------------------------
// Stages on a tiny in-memory corpus

AudioSet synth_set(const Manifest &m, Split split) {
  AudioSet set;
  for (const Record *r : m.split(split)) {
    set.mels.push_back(log_mel(synth_clip(r->emotion, r->soundscape, r->seed)));
    set.emotions.push_back(r->emotion);
    set.soundscapes.push_back(r->soundscape);
    set.captions.push_back(r->caption);
  }
  return set;
}

const LoadedCorpus &tiny_corpus() {
  static const LoadedCorpus c = [] {
    CorpusConfig cc;
    cc.train_per_pair = 2;
    cc.test_in_per_pair = 1;
    cc.test_dg_per_pair = 1;
    LoadedCorpus out;
    out.manifest = plan_corpus(cc);
    out.train = synth_set(out.manifest, Split::kTrain);
    out.test_in = synth_set(out.manifest, Split::kTestIn);
    out.test_dg = synth_set(out.manifest, Split::kTestDg);
    return out;
  }();
  return c;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.pretrain.epochs = 1;
  c.acpt.iterations = 3;
  c.classifier.epochs = 2;
  return c;
}

std::vector<double> flat(const ClepModel &m, bool text_body_only) {
  std::vector<double> out;
  const auto params = text_body_only ? m.text_encoder_params() : m.all_params();
  for (const Tensor &t : params) out.insert(out.end(), t.data().begin(), t.data().end());
  return out;
}

TEST(Pretrain, EmptySplitIsDataError) {
  RunLog log;
  EXPECT_THROW(pretrain(AudioSet{}, tiny_config(), log), DataError);
}

TEST(Pretrain, ZeroEpochsRejected) {
  TrainConfig c = tiny_config();
  c.pretrain.epochs = 0;
  RunLog log;
  EXPECT_THROW(pretrain(tiny_corpus().train, c, log), ConfigError);
}

TEST(Pretrain, FirstLossNearLogBatchFreezesTextAndIsDeterministic) {
  const LoadedCorpus &corpus = tiny_corpus();
  ASSERT_EQ(corpus.train.size(), 64u);
  TrainConfig c = tiny_config();
  c.pretrain.epochs = 2;
  std::ostringstream os;
  RunLog log(os);
  const PretrainResult a = pretrain(corpus.train, c, log);
  RunLog quiet;
  const PretrainResult b = pretrain(corpus.train, c, quiet);

  ASSERT_EQ(a.epoch_losses.size(), 2u);
  const double log_n = std::log(64.0);
  EXPECT_GE(a.epoch_losses[0], 0.5 * log_n);
  EXPECT_LE(a.epoch_losses[0], 1.5 * log_n);

  const ClepModel fresh = ClepModel::init(derive_seed(c.seed, 1));
  EXPECT_EQ(flat(a.model, true), flat(fresh, true));
  EXPECT_NE(flat(a.model, false), flat(fresh, false));

  EXPECT_EQ(a.epoch_losses, b.epoch_losses);
  EXPECT_EQ(serialize_checkpoint(model_tensors(a.model)), serialize_checkpoint(model_tensors(b.model)));
  // The saved checkpoint holds exactly the in-memory weights.
  EXPECT_EQ(flat(model_from_tensors(deserialize_checkpoint(serialize_checkpoint(model_tensors(a.model)))), false),
            flat(a.model, false));
  for (const Tensor &t : a.model.all_params()) EXPECT_FALSE(t.requires_grad());

  std::istringstream lines(os.str());
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    EXPECT_EQ(line.rfind("pretrain\t", 0), 0u) << line;
    ++count;
  }
  EXPECT_EQ(count, 2);
}

class Stages : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { model_ = new ClepModel(ClepModel::init(123)); }
  static void TearDownTestSuite() { delete model_; }
  static const ClepModel &model() { return *model_; }
  static inline ClepModel *model_ = nullptr;
};

TEST_F(Stages, AcptTouchesOnlyThePromptBank) {
  const auto &corpus = tiny_corpus();
  const std::uint64_t before = parameter_checksum(model());
  const auto params_before = flat(model(), false);
  RunLog log;
  const AcptResult r =
      run_acpt(model(), corpus.emotion_names(), corpus.manifest.train_soundscapes(), tiny_config(), log);
  EXPECT_EQ(parameter_checksum(model()), before);
  EXPECT_EQ(flat(model(), false), params_before);
  EXPECT_EQ(r.bank.vectors().shape(), (Shape{12, 8, 32}));
  EXPECT_EQ(r.losses.size(), 3u);
  for (const Tensor &t : model().all_params()) EXPECT_FALSE(t.has_grad());
}

TEST_F(Stages, AcptMovesTrainingRowsOnly) {
  const auto &corpus = tiny_corpus();
  TrainConfig c = tiny_config();
  c.acpt.iterations = 1;
  RunLog log;
  const AcptResult one = run_acpt(model(), corpus.emotion_names(),
                                  corpus.manifest.train_soundscapes(), c, log);
  c.acpt.iterations = 2;
  const AcptResult two = run_acpt(model(), corpus.emotion_names(),
                                  corpus.manifest.train_soundscapes(), c, log);
  const auto train = corpus.manifest.train_soundscapes();
  for (int s = 0; s < kNumSoundscapes; ++s) {
    const Tensor a = one.bank.tokens_for(s), b = two.bank.tokens_for(s);
    const bool trained = std::find(train.begin(), train.end(), s) != train.end();
    if (trained)
      EXPECT_NE(std::vector<double>(a.data().begin(), a.data().end()),
                std::vector<double>(b.data().begin(), b.data().end())) << s;
    else
      EXPECT_EQ(std::vector<double>(a.data().begin(), a.data().end()),
                std::vector<double>(b.data().begin(), b.data().end())) << s;
  }
  EXPECT_EQ(one.losses[0], two.losses[0]);
}

TEST_F(Stages, AcptIsDeterministic) {
  const auto &corpus = tiny_corpus();
  RunLog log;
  const auto a = run_acpt(model(), corpus.emotion_names(), corpus.manifest.train_soundscapes(),
                          tiny_config(), log);
  const auto b = run_acpt(model(), corpus.emotion_names(), corpus.manifest.train_soundscapes(),
                          tiny_config(), log);
  EXPECT_EQ(a.losses, b.losses);
  EXPECT_EQ(std::vector<double>(a.bank.vectors().data().begin(), a.bank.vectors().data().end()),
            std::vector<double>(b.bank.vectors().data().begin(), b.bank.vectors().data().end()));
}

TEST_F(Stages, AcptRejectsTooManyPromptTokens) {
  const auto &corpus = tiny_corpus();
  TrainConfig c = tiny_config();
  c.prompt_tokens = 15;
  RunLog log;
  try {
    run_acpt(model(), corpus.emotion_names(), corpus.manifest.train_soundscapes(), c, log);
    FAIL();
  } catch (const ConfigError &e) {
    EXPECT_NE(std::string(e.what()).find("fewer prompt tokens"), std::string::npos);
  }
  EXPECT_THROW(run_acpt(model(), corpus.emotion_names(), {}, tiny_config(), log), DataError);
}

TEST_F(Stages, AcptSamplesCrossSoundscapesAndEmotions) {
  const auto names = tiny_corpus().emotion_names();
  const auto samples = acpt_samples(names, {0, 3});
  EXPECT_EQ(samples.size(), 2u * names.size());
  std::set<std::pair<int, int>> seen;
  for (const auto &s : samples) seen.insert({s.soundscape, s.emotion});
  EXPECT_EQ(seen.size(), 2u * names.size());
}

TEST_F(Stages, TextTrainingSetCounts) {
  const auto names = tiny_corpus().emotion_names();
  Rng rng(9);
  const PromptBank bank(kNumSoundscapes, 8, rng);
  const LabeledEmbeddings data = build_text_training_set(model(), &bank, names);
  ASSERT_EQ(data.features.shape(), (Shape{52, kJointDim}));
  ASSERT_EQ(data.labels.size(), 52u);
  std::vector<int> per_class(4, 0);
  for (int y : data.labels) ++per_class[static_cast<std::size_t>(y)];
  EXPECT_EQ(per_class, (std::vector<int>{13, 13, 13, 13}));
  EXPECT_EQ(std::count(data.soundscapes.begin(), data.soundscapes.end(), -1), 4);
  for (std::size_t i = 0; i < 52; ++i) {
    double n = 0.0;
    for (std::size_t j = 0; j < kJointDim; ++j) n += std::pow(data.features.at(i, j), 2);
    EXPECT_NEAR(n, 1.0, 1e-12);
  }
  const LabeledEmbeddings plain = build_text_training_set(model(), nullptr, names);
  EXPECT_EQ(plain.features.shape(), (Shape{4, kJointDim}));
  EXPECT_EQ(plain.labels, (std::vector<int>{0, 1, 2, 3}));
}

LabeledEmbeddings random_features(std::size_t n, std::size_t classes, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(n * kJointDim);
  for (double &v : x) v = rng.normal(0.0, 1.0);
  LabeledEmbeddings d;
  d.features = l2_normalize(Tensor({n, kJointDim}, std::move(x)));
  for (std::size_t i = 0; i < n; ++i) d.labels.push_back(static_cast<int>(i % classes));
  d.soundscapes.assign(n, -1);
  return d;
}

TEST(Classifier, Errors) {
  RunLog log;
  LabeledEmbeddings d = random_features(6, 3, 1);
  EXPECT_THROW(train_classifier(d, 4, ClassifierConfig{}, 0, log), DataError);
  d.labels[0] = 5;
  EXPECT_THROW(train_classifier(d, 3, ClassifierConfig{}, 0, log), ContractError);
}

TEST(Classifier, SeparableSetIsLearned) {
  // One tight cluster per class.
  Rng rng(2);
  std::vector<double> x;
  LabeledEmbeddings d;
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < 13; ++i) {
      for (std::size_t j = 0; j < kJointDim; ++j)
        x.push_back((j == static_cast<std::size_t>(c) ? 1.0 : 0.0) + rng.normal(0.0, 0.05));
      d.labels.push_back(c);
    }
  d.features = l2_normalize(Tensor({52, kJointDim}, std::move(x)));
  RunLog log;
  for (ClassifierLoss loss : {ClassifierLoss::kArcFace, ClassifierLoss::kSoftmax}) {
    ClassifierConfig c;
    c.loss = loss;
    const ClassifierResult r = train_classifier(d, 4, c, 0, log);
    EXPECT_EQ(r.train_accuracy, 1.0) << classifier_loss_name(loss);
    EXPECT_EQ(r.epoch_losses.size(), 50u);
    EXPECT_LT(r.epoch_losses.back(), r.epoch_losses.front());
  }
}

TEST(Classifier, ZeroMarginUnitScaleMatchesCosineCrossEntropyRun) {
  const LabeledEmbeddings d = random_features(20, 4, 3);
  ClassifierConfig c;
  c.arcface.margin = 0.0;
  c.arcface.scale = 1.0;
  c.batch_size = 20;  // one full batch per epoch
  c.epochs = 10;
  RunLog log;
  const ClassifierResult arc = train_classifier(d, 4, c, 11, log);

  // The run's starting weights, recovered with a step too small to move them.
  ClassifierConfig still = c;
  still.learning_rate = 1e-300;
  Tensor w = train_classifier(d, 4, still, 11, log).classifier.weights.detach();
  w.set_requires_grad(true);
  Optimizer opt(OptimizerConfig::sgd(c.learning_rate, c.momentum), {w});
  for (int epoch = 0; epoch < c.epochs; ++epoch) {
    const Tensor logits = matmul(l2_normalize(d.features), transpose(l2_normalize(w)));
    const Tensor loss = cross_entropy(logits, d.labels);
    EXPECT_NEAR(arc.epoch_losses[static_cast<std::size_t>(epoch)], loss.item(), 1e-6) << epoch;
    backward(loss);
    opt.step();
  }
}

TEST(Classifier, StartsAtUnitClassMeans) {
  const LabeledEmbeddings d = random_features(12, 3, 5);
  ClassifierConfig still;
  still.learning_rate = 1e-300;
  RunLog log;
  const Tensor w = train_classifier(d, 3, still, 0, log).classifier.weights;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> mean(d.features.dim(1), 0.0);
    for (std::size_t i = 0; i < d.labels.size(); ++i)
      if (d.labels[i] == static_cast<int>(c))
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += d.features.at(i, j);
    double norm = 0.0;
    for (double v : mean) norm += v * v;
    for (std::size_t j = 0; j < mean.size(); ++j)
      EXPECT_NEAR(w.at(c, j), mean[j] / std::sqrt(norm), 1e-12) << c << "," << j;
  }
}

TEST(Classifier, PersistenceRoundTrip) {
  RunLog log;
  ClassifierConfig c;
  c.loss = ClassifierLoss::kSoftmax;
  c.epochs = 2;
  const Classifier k = train_classifier(random_features(8, 4, 4), 4, c, 0, log).classifier;
  const Classifier back = Classifier::from_tensors(deserialize_checkpoint(serialize_checkpoint(k.to_tensors())));
  EXPECT_EQ(back.loss, ClassifierLoss::kSoftmax);
  EXPECT_EQ(back.num_classes(), 4u);
  TensorMap broken = k.to_tensors();
  broken.erase("classifier.weights");
  EXPECT_THROW(Classifier::from_tensors(broken), CorruptionError);
}

TEST_F(Stages, InferIsDeterministicAndFollowsSelfSimilarity) {
  const AudioClip clip = synth_clip(2, 4, 99);
  const MelSpectrogram mel = log_mel(clip);
  const MelSpectrogram *one[] = {&mel};
  Tensor emb;
  {
    NoGradGuard guard;
    emb = encode_audio(model(), stack_mels(one));
  }
  Rng rng(10);
  std::vector<double> w(4 * kJointDim);
  for (double &v : w) v = rng.normal(0.0, 1.0);
  for (int target = 0; target < 4; ++target) {
    std::vector<double> wt(w);
    std::copy(emb.data().begin(), emb.data().end(), wt.begin() + target * kJointDim);
    Classifier k;
    k.weights = Tensor({4, kJointDim}, wt);
    EXPECT_EQ(infer(model(), k, clip), target);
    EXPECT_EQ(infer(model(), k, clip), infer(model(), k, clip));
  }
}

TEST_F(Stages, EvaluateMatchesPerClipInference) {
  const AudioSet &set = tiny_corpus().test_in;
  RunLog log;
  ClassifierConfig cc;
  cc.epochs = 2;
  const Classifier k = train_classifier(build_text_training_set(model(), nullptr, tiny_corpus().emotion_names()),
                                        4, cc, 0, log).classifier;
  const EvalResult r = evaluate(model(), k, set);
  const Tensor emb = embed_audio_set(model(), set);
  for (std::size_t i = 0; i < set.size(); ++i)
    EXPECT_EQ(r.predictions[i], k.predict(emb.data().subspan(i * kJointDim, kJointDim)));
  EXPECT_THROW(evaluate(model(), k, AudioSet{}), DataError);
}

TEST_F(Stages, EmbeddingsDoNotDependOnEvalBatching) {
  const AudioSet &set = tiny_corpus().test_in;
  const Tensor all = embed_audio_set(model(), set);
  AudioSet single;
  single.mels = {set.mels[33 % set.size()]};
  single.emotions = {0};
  const Tensor one = embed_audio_set(model(), single);
  for (std::size_t j = 0; j < kJointDim; ++j)
    EXPECT_NEAR(one.at(0, j), all.at(33 % set.size(), j), 1e-12);
}

// ---------------------------------------------------------------------------
// Studies

std::vector<SeedModel> random_models() {
  std::vector<SeedModel> out;
  for (std::uint64_t s : {0u, 1u, 2u}) out.push_back({s, ClepModel::init(1000 + s)});
  return out;
}

TEST(Studies, AblationGridShape) {
  RunLog log;
  TrainConfig c = tiny_config();
  c.acpt.iterations = 1;
  c.classifier.epochs = 1;
  const AblationReport r = ablate(tiny_corpus(), c, random_models(), log);
  EXPECT_EQ(r.runs.size(), 24u);
  std::set<std::tuple<bool, bool, Split, std::uint64_t>> cells;
  for (const auto &run : r.runs) cells.insert({run.fine_tune, run.acpt, run.split, run.seed});
  EXPECT_EQ(cells.size(), 24u);
  const std::string table = r.table();
  EXPECT_NE(table.find("fine_tune\tacpt\ttest_in_wa\ttest_in_ua\ttest_dg_wa\ttest_dg_ua\n"),
            std::string::npos);
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 6);
  double sum = 0.0;
  for (const auto &run : r.runs)
    if (run.fine_tune && run.acpt && run.split == Split::kTestDg) sum += run.result.wa;
  EXPECT_NEAR(r.mean_wa(true, true, Split::kTestDg), sum / 3.0, 1e-15);
  const std::string runs = r.runs_table();
  EXPECT_EQ(std::count(runs.begin(), runs.end(), '\n'), 25);
}

TEST(Studies, LossComparisonCoversBothLosses) {
  RunLog log;
  TrainConfig c = tiny_config();
  c.acpt.iterations = 1;
  c.classifier.epochs = 1;
  const auto rows = compare_classifier_losses(tiny_corpus(), c, random_models(), log);
  EXPECT_EQ(rows.size(), 6u);
  const std::string t = loss_comparison_table(rows);
  EXPECT_NE(t.find("arcface\tmean"), std::string::npos) << t;
  EXPECT_NE(t.find("softmax\tmean"), std::string::npos) << t;
}

TEST(Studies, PromptLengthSweep) {
  RunLog log;
  TrainConfig c = tiny_config();
  c.acpt.iterations = 1;
  c.classifier.epochs = 1;
  const StudyConfig study;
  const auto models = random_models();
  const auto a = prompt_length_sweep(tiny_corpus(), c, study, models, log);
  ASSERT_EQ(a.size(), 15u);
  std::set<std::size_t> lengths;
  for (const auto &r : a) lengths.insert(r.prompt_tokens);
  EXPECT_EQ(lengths, (std::set<std::size_t>{2, 4, 8, 16, 32}));
  const auto b = prompt_length_sweep(tiny_corpus(), c, study, models, log);
  EXPECT_EQ(sweep_table(a), sweep_table(b));
  EXPECT_EQ(sweep_table(a).rfind("prompt_tokens\tseed\twa\tua\n", 0), 0u);
}

}  // namespace
}  // namespace clepdg
