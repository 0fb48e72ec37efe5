// include/clepdg/synth.h

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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "clepdg/audio.h"

namespace clepdg {

inline constexpr int kGeneratorVersion = 1;
inline constexpr int kNumSoundscapes = 12;

struct EmotionLabel {
  int id = 0;
  std::string name;
};

enum class NoiseKind { kNone, kWhite, kPink, kHum, kBabble };

std::string noise_kind_name(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string &name);

struct SoundscapeCondition {
  int id = 0;
  std::string name;
  NoiseKind noise = NoiseKind::kNone;
  double snr_db = 0.0;
  // Recording channel band-pass applied to the mixture.
  std::optional<std::pair<double, double>> band;
};

// angry, happy, sad, neutral
const std::vector<EmotionLabel> &default_emotions();
// 12 conditions; ids 8..11 form the default held-out set.
const std::vector<SoundscapeCondition> &default_soundscapes();

const EmotionLabel &emotion_by_id(int id);
const SoundscapeCondition &soundscape_by_id(int id);

// The two parts of a clip before mixing: the emotion signature and the
// soundscape noise already scaled to the condition's SNR.
struct ClipComponents {
  std::vector<double> signal;
  std::vector<double> noise;
};

ClipComponents synth_components(int emotion_id, int soundscape_id, std::uint64_t seed);

// signal + noise, channel band filter, peak-normalized to 0.9.
AudioClip synth_clip(int emotion_id, int soundscape_id, std::uint64_t seed);

// "This is a [EMOTION] sound" or "This is a [EMOTION] sound in a [SOUNDSCAPE]".
std::string synth_caption(int emotion_id, int soundscape_id, bool include_soundscape);

// ---------------------------------------------------------------------------
// Corpus

enum class Split { kTrain, kTestIn, kTestDg };
std::string split_name(Split split);
Split parse_split(const std::string &name);

struct Record {
  std::string clip_path;  // relative to the manifest directory
  std::string caption;
  int emotion = 0;
  int soundscape = 0;
  Split split = Split::kTrain;
  std::uint64_t seed = 0;
};

struct Manifest {
  int version = kGeneratorVersion;
  std::uint64_t global_seed = 0;
  std::vector<EmotionLabel> emotions;
  std::vector<SoundscapeCondition> soundscapes;
  std::vector<int> dg_holdout;
  std::vector<Record> records;
  std::string base_dir;  // directory clip paths are relative to

  std::vector<const Record *> split(Split s) const;
  std::vector<int> train_soundscapes() const;
  std::vector<int> soundscape_ids() const;  // every soundscape, held-out included
  std::string clip_file(const Record &r) const;
};

struct CorpusConfig {
  std::uint64_t global_seed = 0;
  int train_per_pair = 16;
  int test_in_per_pair = 4;
  int test_dg_per_pair = 8;
  std::vector<int> dg_holdout = {8, 9, 10, 11};
};

// Record layout without touching the filesystem.
Manifest plan_corpus(const CorpusConfig &config);
// plan_corpus + write every WAV and out_dir/manifest.tsv.
Manifest build_corpus(const CorpusConfig &config, const std::string &out_dir);

void write_manifest(const Manifest &manifest, const std::string &path);
Manifest read_manifest(const std::string &path);

}  // namespace clepdg
