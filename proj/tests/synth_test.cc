// tests/synth_test.cc

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

#include "clepdg/synth.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "clepdg/error.h"

namespace clepdg {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / "clepdg_synth_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

CorpusConfig small_config() {
  CorpusConfig c;
  c.train_per_pair = 1;
  c.test_in_per_pair = 1;
  c.test_dg_per_pair = 1;
  return c;
}

TEST(Soundscapes, TwelveDenseIds) {
  const auto &s = default_soundscapes();
  ASSERT_EQ(s.size(), 12u);
  std::set<std::string> names;
  for (std::size_t i = 0; i < s.size(); ++i) {
    EXPECT_EQ(s[i].id, static_cast<int>(i));
    names.insert(s[i].name);
  }
  EXPECT_EQ(names.size(), 12u);
}

TEST(Emotions, DefaultFour) {
  const auto &e = default_emotions();
  ASSERT_EQ(e.size(), 4u);
  const char *want[] = {"angry", "happy", "sad", "neutral"};
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(e[i].id, i);
    EXPECT_EQ(e[i].name, want[i]);
  }
}

TEST(SynthClip, Deterministic) {
  const AudioClip a = synth_clip(1, 3, 99), b = synth_clip(1, 3, 99), c = synth_clip(1, 3, 100);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_NE(a.samples, c.samples);
  EXPECT_EQ(a.samples.size(), kClipSamples);
}

TEST(SynthClip, NoNoiseEqualsSignature) {
  ASSERT_EQ(soundscape_by_id(0).noise, NoiseKind::kNone);
  const ClipComponents parts = synth_components(0, 0, 5);
  for (double v : parts.noise) ASSERT_EQ(v, 0.0);
  const AudioClip clip = synth_clip(0, 0, 5);
  double peak = 0.0;
  for (double v : parts.signal) peak = std::max(peak, std::abs(v));
  double clip_peak = 0.0;
  for (std::size_t i = 0; i < kClipSamples; ++i) {
    ASSERT_EQ(clip.samples[i], parts.signal[i] * (0.9 / peak));
    clip_peak = std::max(clip_peak, std::abs(clip.samples[i]));
  }
  EXPECT_NEAR(clip_peak, 0.9, 1e-12);
}

TEST(SynthClip, PeakNormalized) {
  for (int s = 0; s < 12; ++s) {
    const AudioClip clip = synth_clip(s % 4, s, 11);
    double peak = 0.0;
    for (double v : clip.samples) peak = std::max(peak, std::abs(v));
    EXPECT_NEAR(peak, 0.9, 1e-12) << s;
  }
}

TEST(SynthClip, WhiteNoiseSnr) {
  const int sad = 2, white20 = 5;
  ASSERT_EQ(soundscape_by_id(white20).noise, NoiseKind::kWhite);
  ASSERT_EQ(soundscape_by_id(white20).snr_db, 20.0);
  const ClipComponents parts = synth_components(sad, white20, 7);
  double ps = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < kClipSamples; ++i) {
    ps += parts.signal[i] * parts.signal[i];
    pn += parts.noise[i] * parts.noise[i];
  }
  EXPECT_NEAR(10.0 * std::log10(ps / pn), 20.0, 0.5);
}

TEST(SynthClip, EmotionFundamentalRanges) {
  // The strongest low-frequency component of a noise-free clip sits inside the
  // emotion's fundamental range.
  const double lo[] = {180, 220, 90, 140}, hi[] = {240, 300, 140, 180};
  for (int e = 0; e < 4; ++e) {
    const ClipComponents parts = synth_components(e, 0, 40 + e);
    double best = 0.0, best_hz = 0.0;
    for (double hz = 80.0; hz <= 310.0; hz += 0.5) {
      double re = 0.0, im = 0.0;
      for (std::size_t i = 0; i < 16000; ++i) {
        const double w = 2.0 * 3.14159265358979323846 * hz * static_cast<double>(i) / 16000.0;
        re += parts.signal[i] * std::cos(w);
        im += parts.signal[i] * std::sin(w);
      }
      if (re * re + im * im > best) {
        best = re * re + im * im;
        best_hz = hz;
      }
    }
    EXPECT_GE(best_hz, lo[e] - 1.0) << e;
    EXPECT_LE(best_hz, hi[e] + 1.0) << e;
  }
}

TEST(SynthClip, UnknownIds) {
  EXPECT_THROW(synth_clip(4, 0, 1), LookupError);
  EXPECT_THROW(synth_clip(0, 12, 1), LookupError);
  EXPECT_THROW(synth_clip(-1, 0, 1), LookupError);
  EXPECT_THROW(synth_caption(0, 12, true), LookupError);
}

TEST(Caption, Template) {
  EXPECT_EQ(synth_caption(1, 0, false), "This is a happy sound");
  EXPECT_EQ(synth_caption(2, 2, true), "This is a sad sound in a street");
  EXPECT_EQ(synth_caption(0, 0, false), "This is a angry sound");
}

TEST(Corpus, DefaultCounts) {
  const Manifest m = plan_corpus(CorpusConfig{});
  EXPECT_EQ(m.split(Split::kTrain).size(), 4u * 8u * 16u);
  EXPECT_EQ(m.split(Split::kTestIn).size(), 4u * 8u * 4u);
  EXPECT_EQ(m.split(Split::kTestDg).size(), 4u * 4u * 8u);
}

TEST(Corpus, HoldoutDefinesSplits) {
  const Manifest m = plan_corpus(CorpusConfig{});
  std::set<int> train_scapes, dg_scapes;
  std::set<std::uint64_t> train_seeds, all_seeds;
  for (const auto &r : m.records) {
    EXPECT_TRUE(all_seeds.insert(r.seed).second);
    if (r.split == Split::kTestDg) {
      EXPECT_GE(r.soundscape, 8);
      dg_scapes.insert(r.soundscape);
    } else {
      EXPECT_LT(r.soundscape, 8);
      if (r.split == Split::kTrain) train_scapes.insert(r.soundscape);
    }
  }
  for (int s : dg_scapes) EXPECT_FALSE(train_scapes.count(s));
  EXPECT_EQ(m.train_soundscapes(), (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7}));
}

TEST(Corpus, CustomHoldout) {
  CorpusConfig c = small_config();
  c.dg_holdout = {0, 5};
  const Manifest m = plan_corpus(c);
  for (const auto &r : m.records) {
    const bool held = r.soundscape == 0 || r.soundscape == 5;
    EXPECT_EQ(held, r.split == Split::kTestDg);
  }
}

TEST(Corpus, HoldoutValidation) {
  CorpusConfig c;
  c.dg_holdout = {};
  EXPECT_THROW(plan_corpus(c), ConfigError);
  c.dg_holdout = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  EXPECT_THROW(plan_corpus(c), ConfigError);
  c.dg_holdout = {12};
  EXPECT_THROW(plan_corpus(c), ConfigError);
}

TEST(Corpus, CaptionsArePlainTemplate) {
  for (const auto &r : plan_corpus(small_config()).records)
    EXPECT_EQ(r.caption, synth_caption(r.emotion, r.soundscape, false));
}

TEST(Corpus, BuildIsByteIdenticalAndReadable) {
  const fs::path a = scratch("a"), b = scratch("b");
  const Manifest ma = build_corpus(small_config(), a.string());
  build_corpus(small_config(), b.string());
  EXPECT_EQ(slurp(a / "manifest.tsv"), slurp(b / "manifest.tsv"));
  for (const auto &r : ma.records) ASSERT_EQ(slurp(a / r.clip_path), slurp(b / r.clip_path));

  const Manifest back = read_manifest((a / "manifest.tsv").string());
  ASSERT_EQ(back.records.size(), ma.records.size());
  EXPECT_EQ(back.global_seed, ma.global_seed);
  EXPECT_EQ(back.dg_holdout, ma.dg_holdout);
  ASSERT_EQ(back.soundscapes.size(), 12u);
  EXPECT_EQ(back.soundscapes[5].band, ma.soundscapes[5].band);
  EXPECT_EQ(back.soundscapes[2].snr_db, ma.soundscapes[2].snr_db);
  for (std::size_t i = 0; i < back.records.size(); ++i) {
    EXPECT_EQ(back.records[i].clip_path, ma.records[i].clip_path);
    EXPECT_EQ(back.records[i].caption, ma.records[i].caption);
    EXPECT_EQ(back.records[i].seed, ma.records[i].seed);
    EXPECT_EQ(back.records[i].split, ma.records[i].split);
  }
  // Stored clips are the generated ones up to 16-bit quantization.
  const Record &r = ma.records.front();
  const AudioClip stored = load_clip(back.clip_file(r));
  const AudioClip fresh = synth_clip(r.emotion, r.soundscape, r.seed);
  for (std::size_t i = 0; i < kClipSamples; ++i)
    ASSERT_NEAR(stored.samples[i], fresh.samples[i], 0.5 / 32768.0 + 1e-15);
}

TEST(Corpus, SeedChangesClips) {
  CorpusConfig c = small_config();
  const Manifest a = plan_corpus(c);
  c.global_seed = 1;
  const Manifest b = plan_corpus(c);
  EXPECT_NE(a.records[0].seed, b.records[0].seed);
}

TEST(Manifest, MalformedLinesReported) {
  const fs::path dir = scratch("bad");
  {
    std::ofstream os(dir / "manifest.tsv");
    os << "# version\t1\nclips/x.wav\tThis is a sad sound\t2\t0\ttrain\n";
  }
  EXPECT_THROW(read_manifest((dir / "manifest.tsv").string()), DataError);
  EXPECT_THROW(read_manifest((dir / "missing.tsv").string()), IoError);
}

TEST(Separability, NearestCentroidOnMeanLogMel) {
  const Manifest m = plan_corpus(CorpusConfig{});
  auto features = [](const Record &r) {
    const MelSpectrogram mel = log_mel(synth_clip(r.emotion, r.soundscape, r.seed));
    std::vector<double> f(kNumMelBands, 0.0);
    for (std::size_t t = 0; t < mel.num_frames; ++t)
      for (std::size_t b = 0; b < kNumMelBands; ++b) f[b] += mel.at(t, b) / mel.num_frames;
    return f;
  };
  std::vector<std::vector<double>> centroid(4, std::vector<double>(kNumMelBands, 0.0));
  std::vector<int> count(4, 0);
  for (const Record *r : m.split(Split::kTrain)) {
    const auto f = features(*r);
    for (std::size_t b = 0; b < kNumMelBands; ++b) centroid[r->emotion][b] += f[b];
    ++count[r->emotion];
  }
  for (int e = 0; e < 4; ++e)
    for (double &v : centroid[e]) v /= count[e];
  int correct = 0;
  const auto test = m.split(Split::kTestIn);
  for (const Record *r : test) {
    const auto f = features(*r);
    int best = 0;
    double best_d = 1e300;
    for (int e = 0; e < 4; ++e) {
      double d = 0.0;
      for (std::size_t b = 0; b < kNumMelBands; ++b) d += (f[b] - centroid[e][b]) * (f[b] - centroid[e][b]);
      if (d < best_d) {
        best_d = d;
        best = e;
      }
    }
    correct += best == r->emotion;
  }
  EXPECT_GE(static_cast<double>(correct) / test.size(), 0.60);
}

}  // namespace
}  // namespace clepdg
