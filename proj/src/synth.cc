// src/synth.cc

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

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "clepdg/error.h"
#include "clepdg/rng.h"

namespace clepdg {

namespace {

constexpr double kPeak = 0.9;
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Per-emotion signature. Harmonic k has amplitude k^-tilt: 0.5 is bright,
// 1.0 flat, 2.0 dark.
struct EmotionProfile {
  double f0_lo, f0_hi;
  double am_hz;
  double tilt;
};

const EmotionProfile &profile(int emotion_id) {
  static const EmotionProfile profiles[] = {
      {180.0, 240.0, 8.0, 0.5},   // angry
      {220.0, 300.0, 5.0, 0.5},   // happy
      {90.0, 140.0, 1.0, 2.0},    // sad
      {140.0, 180.0, 2.5, 1.0},   // neutral
  };
  return profiles[emotion_id];
}

// Adds sum_k amp_k * sin(2 pi k f0 t + phase_k) * envelope(t) to out. The
// oscillators run as complex phasor recurrences.
void add_harmonics(std::vector<double> &out, double f0, double max_hz, double tilt,
                   double gain, Rng &rng, const std::vector<double> *envelope) {
  std::vector<double> tone(out.size(), 0.0);
  for (int k = 1; k * f0 < max_hz; ++k) {
    const double amp = gain * std::pow(static_cast<double>(k), -tilt);
    const double w = kTwoPi * k * f0 / kSampleRate;
    const std::complex<double> rot(std::cos(w), std::sin(w));
    const double phase = rng.uniform(0.0, kTwoPi);
    std::complex<double> z(std::cos(phase), std::sin(phase));
    for (auto &v : tone) {
      v += amp * z.imag();
      z *= rot;
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] += envelope ? tone[i] * (*envelope)[i] : tone[i];
}

std::vector<double> modulation(std::size_t n, double rate_hz, double depth, double phase) {
  std::vector<double> env(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / kSampleRate;
    env[i] = (1.0 - depth) + depth * (0.5 + 0.5 * std::sin(kTwoPi * rate_hz * t + phase));
  }
  return env;
}

std::vector<double> emotion_signature(int emotion_id, Rng &rng) {
  const auto &p = profile(emotion_id);
  const double f0 = rng.uniform(p.f0_lo, p.f0_hi);
  const auto env = modulation(kClipSamples, p.am_hz, 0.8, rng.uniform(0.0, kTwoPi));
  std::vector<double> s(kClipSamples, 0.0);
  add_harmonics(s, f0, 7000.0, p.tilt, 1.0, rng, &env);
  return s;
}

std::vector<double> raw_noise(NoiseKind kind, Rng &rng) {
  std::vector<double> n(kClipSamples, 0.0);
  switch (kind) {
    case NoiseKind::kNone:
      break;
    case NoiseKind::kWhite:
      for (auto &v : n) v = rng.normal();
      break;
    case NoiseKind::kPink: {
      // Paul Kellet's refined pinking filter.
      double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
      for (auto &v : n) {
        const double w = rng.normal();
        b0 = 0.99886 * b0 + w * 0.0555179;
        b1 = 0.99332 * b1 + w * 0.0750759;
        b2 = 0.96900 * b2 + w * 0.1538520;
        b3 = 0.86650 * b3 + w * 0.3104856;
        b4 = 0.55000 * b4 + w * 0.5329522;
        b5 = -0.7616 * b5 - w * 0.0168980;
        v = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
        b6 = w * 0.115926;
      }
      break;
    }
    case NoiseKind::kHum:
      add_harmonics(n, 50.0, 450.0, 1.0, 1.0, rng, nullptr);
      break;
    case NoiseKind::kBabble:
      for (int talker = 0; talker < 6; ++talker) {
        const double f0 = rng.uniform(100.0, 260.0);
        const auto env = modulation(kClipSamples, rng.uniform(3.0, 6.0), 1.0, rng.uniform(0.0, kTwoPi));
        add_harmonics(n, f0, 4000.0, 1.0, 1.0, rng, &env);
      }
      break;
  }
  return n;
}

struct Biquad {
  double b0, b1, b2, a1, a2;
  void run(std::vector<double> &x) const {
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (auto &v : x) {
      const double y = b0 * v + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
      x2 = x1;
      x1 = v;
      y2 = y1;
      y1 = y;
      v = y;
    }
  }
};

Biquad design(double cutoff_hz, bool highpass) {
  const double w0 = kTwoPi * cutoff_hz / kSampleRate;
  const double q = 1.0 / std::numbers::sqrt2;  // Butterworth
  const double alpha = std::sin(w0) / (2.0 * q);
  const double c = std::cos(w0);
  const double a0 = 1.0 + alpha;
  if (highpass)
    return {(1.0 + c) / 2.0 / a0, -(1.0 + c) / a0, (1.0 + c) / 2.0 / a0, -2.0 * c / a0,
            (1.0 - alpha) / a0};
  return {(1.0 - c) / 2.0 / a0, (1.0 - c) / a0, (1.0 - c) / 2.0 / a0, -2.0 * c / a0,
          (1.0 - alpha) / a0};
}

double mean_square(const std::vector<double> &x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return s / static_cast<double>(x.size());
}

}  // namespace

std::string noise_kind_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kNone: return "none";
    case NoiseKind::kWhite: return "white";
    case NoiseKind::kPink: return "pink";
    case NoiseKind::kHum: return "hum";
    case NoiseKind::kBabble: return "babble";
  }
  return "none";
}

NoiseKind parse_noise_kind(const std::string &name) {
  for (auto k : {NoiseKind::kNone, NoiseKind::kWhite, NoiseKind::kPink, NoiseKind::kHum,
                 NoiseKind::kBabble})
    if (noise_kind_name(k) == name) return k;
  throw DataError("unknown noise kind '" + name + "'");
}

const std::vector<EmotionLabel> &default_emotions() {
  static const std::vector<EmotionLabel> e = {{0, "angry"}, {1, "happy"}, {2, "sad"}, {3, "neutral"}};
  return e;
}

const std::vector<SoundscapeCondition> &default_soundscapes() {
  using B = std::pair<double, double>;
  static const std::vector<SoundscapeCondition> s = {
      {0, "studio", NoiseKind::kNone, 0.0, std::nullopt},
      {1, "office", NoiseKind::kWhite, 25.0, std::nullopt},
      {2, "street", NoiseKind::kPink, 12.0, std::nullopt},
      {3, "cafe", NoiseKind::kBabble, 15.0, std::nullopt},
      {4, "kitchen", NoiseKind::kHum, 18.0, std::nullopt},
      {5, "phone", NoiseKind::kWhite, 20.0, B{300.0, 3400.0}},
      {6, "park", NoiseKind::kPink, 18.0, std::nullopt},
      {7, "classroom", NoiseKind::kBabble, 22.0, std::nullopt},
      {8, "crowd", NoiseKind::kBabble, 8.0, std::nullopt},
      {9, "factory", NoiseKind::kHum, 8.0, std::nullopt},
      {10, "radio", NoiseKind::kPink, 10.0, B{200.0, 4000.0}},
      {11, "subway", NoiseKind::kWhite, 8.0, B{100.0, 6000.0}},
  };
  return s;
}

const EmotionLabel &emotion_by_id(int id) {
  const auto &e = default_emotions();
  if (id < 0 || id >= static_cast<int>(e.size()))
    throw LookupError("unknown emotion id " + std::to_string(id));
  return e[id];
}

const SoundscapeCondition &soundscape_by_id(int id) {
  const auto &s = default_soundscapes();
  if (id < 0 || id >= static_cast<int>(s.size()))
    throw LookupError("unknown soundscape id " + std::to_string(id));
  return s[id];
}

ClipComponents synth_components(int emotion_id, int soundscape_id, std::uint64_t seed) {
  emotion_by_id(emotion_id);
  const auto &scape = soundscape_by_id(soundscape_id);
  Rng signal_rng(derive_seed(seed, 0));
  Rng noise_rng(derive_seed(seed, 1));
  ClipComponents c;
  c.signal = emotion_signature(emotion_id, signal_rng);
  c.noise = raw_noise(scape.noise, noise_rng);
  if (scape.noise != NoiseKind::kNone) {
    const double ps = mean_square(c.signal), pn = mean_square(c.noise);
    const double gain = std::sqrt(ps / (pn * std::pow(10.0, scape.snr_db / 10.0)));
    for (auto &v : c.noise) v *= gain;
  }
  return c;
}

AudioClip synth_clip(int emotion_id, int soundscape_id, std::uint64_t seed) {
  auto parts = synth_components(emotion_id, soundscape_id, seed);
  const auto &scape = soundscape_by_id(soundscape_id);
  std::vector<double> mix(kClipSamples);
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = parts.signal[i] + parts.noise[i];
  if (scape.band) {
    if (scape.band->first > 0.0) design(scape.band->first, true).run(mix);
    if (scape.band->second < kSampleRate / 2.0) design(scape.band->second, false).run(mix);
  }
  double peak = 0.0;
  for (double v : mix) peak = std::max(peak, std::abs(v));
  if (peak > 0.0)
    for (auto &v : mix) v *= kPeak / peak;
  AudioClip clip;
  clip.samples = std::move(mix);
  return clip;
}

std::string synth_caption(int emotion_id, int soundscape_id, bool include_soundscape) {
  std::string caption = "This is a " + emotion_by_id(emotion_id).name + " sound";
  if (include_soundscape) caption += " in a " + soundscape_by_id(soundscape_id).name;
  return caption;
}

// ---------------------------------------------------------------------------
// Corpus

std::string split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kTestIn: return "test_in";
    case Split::kTestDg: return "test_dg";
  }
  return "train";
}

Split parse_split(const std::string &name) {
  for (auto s : {Split::kTrain, Split::kTestIn, Split::kTestDg})
    if (split_name(s) == name) return s;
  throw DataError("unknown split '" + name + "' (expected train, test_in or test_dg)");
}

std::vector<const Record *> Manifest::split(Split s) const {
  std::vector<const Record *> out;
  for (const auto &r : records)
    if (r.split == s) out.push_back(&r);
  return out;
}

std::vector<int> Manifest::train_soundscapes() const {
  std::vector<int> out;
  for (const auto &s : soundscapes)
    if (std::find(dg_holdout.begin(), dg_holdout.end(), s.id) == dg_holdout.end())
      out.push_back(s.id);
  return out;
}

std::vector<int> Manifest::soundscape_ids() const {
  std::vector<int> out;
  for (const auto &s : soundscapes) out.push_back(s.id);
  return out;
}

std::string Manifest::clip_file(const Record &r) const {
  if (base_dir.empty()) return r.clip_path;
  return (std::filesystem::path(base_dir) / r.clip_path).string();
}

Manifest plan_corpus(const CorpusConfig &config) {
  const auto &scapes = default_soundscapes();
  std::vector<int> holdout = config.dg_holdout;
  std::sort(holdout.begin(), holdout.end());
  holdout.erase(std::unique(holdout.begin(), holdout.end()), holdout.end());
  if (holdout.empty()) throw ConfigError("corpus: dg_holdout must not be empty");
  if (holdout.size() >= scapes.size())
    throw ConfigError("corpus: dg_holdout cannot contain every soundscape");
  for (int id : holdout)
    if (id < 0 || id >= static_cast<int>(scapes.size()))
      throw ConfigError("corpus: dg_holdout id " + std::to_string(id) + " out of range");
  if (config.train_per_pair < 1 || config.test_in_per_pair < 1 || config.test_dg_per_pair < 1)
    throw ConfigError("corpus: clips per pair must be at least 1");

  Manifest m;
  m.global_seed = config.global_seed;
  m.emotions = default_emotions();
  m.soundscapes = scapes;
  m.dg_holdout = holdout;
  const auto in_domain = m.train_soundscapes();

  std::uint64_t index = 0;
  auto emit = [&](Split split, const std::vector<int> &scape_ids, int per_pair) {
    for (const auto &e : m.emotions)
      for (int s : scape_ids)
        for (int k = 0; k < per_pair; ++k) {
          Record r;
          char name[64];
          std::snprintf(name, sizeof(name), "clips/%s_%05llu.wav", split_name(split).c_str(),
                        static_cast<unsigned long long>(index));
          r.clip_path = name;
          r.caption = synth_caption(e.id, s, false);
          r.emotion = e.id;
          r.soundscape = s;
          r.split = split;
          r.seed = derive_seed(config.global_seed, index);
          m.records.push_back(std::move(r));
          ++index;
        }
  };
  emit(Split::kTrain, in_domain, config.train_per_pair);
  emit(Split::kTestIn, in_domain, config.test_in_per_pair);
  emit(Split::kTestDg, holdout, config.test_dg_per_pair);
  return m;
}

Manifest build_corpus(const CorpusConfig &config, const std::string &out_dir) {
  Manifest m = plan_corpus(config);
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "clips", ec);
  if (ec) throw IoError("build_corpus: cannot create " + out_dir + ": " + ec.message());
  m.base_dir = out_dir;
  for (const auto &r : m.records) {
    const auto clip = synth_clip(r.emotion, r.soundscape, r.seed);
    write_wav(m.clip_file(r), clip.samples);
  }
  write_manifest(m, (fs::path(out_dir) / "manifest.tsv").string());
  return m;
}

namespace {
std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::vector<std::string> split_tabs(const std::string &line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, '\t')) out.push_back(field);
  if (!line.empty() && line.back() == '\t') out.emplace_back();
  return out;
}
}  // namespace

void write_manifest(const Manifest &m, const std::string &path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("write_manifest: cannot open " + path);
  os << "# clepdg-manifest\n";
  os << "# version\t" << m.version << "\n";
  os << "# global_seed\t" << m.global_seed << "\n";
  os << "# dg_holdout\t";
  for (std::size_t i = 0; i < m.dg_holdout.size(); ++i) os << (i ? "," : "") << m.dg_holdout[i];
  os << "\n";
  for (const auto &e : m.emotions) os << "# emotion\t" << e.id << "\t" << e.name << "\n";
  for (const auto &s : m.soundscapes) {
    os << "# soundscape\t" << s.id << "\t" << s.name << "\t" << noise_kind_name(s.noise) << "\t"
       << format_double(s.snr_db) << "\t";
    if (s.band)
      os << format_double(s.band->first) << "\t" << format_double(s.band->second);
    else
      os << "-\t-";
    os << "\n";
  }
  for (const auto &r : m.records)
    os << r.clip_path << "\t" << r.caption << "\t" << r.emotion << "\t" << r.soundscape << "\t"
       << split_name(r.split) << "\t" << r.seed << "\n";
  if (!os) throw IoError("write_manifest: write failed for " + path);
}

Manifest read_manifest(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw IoError("manifest not found or unreadable: " + path);
  Manifest m;
  m.base_dir = std::filesystem::path(path).parent_path().string();
  std::string line;
  std::size_t lineno = 0;
  try {
    while (std::getline(is, line)) {
      ++lineno;
      if (line.empty()) continue;
      if (line[0] == '#') {
        auto f = split_tabs(line.substr(2));
        if (f.empty()) continue;
        if (f[0] == "version" && f.size() == 2) {
          m.version = std::stoi(f[1]);
        } else if (f[0] == "global_seed" && f.size() == 2) {
          m.global_seed = std::stoull(f[1]);
        } else if (f[0] == "dg_holdout" && f.size() == 2) {
          std::istringstream ids(f[1]);
          std::string id;
          while (std::getline(ids, id, ','))
            if (!id.empty()) m.dg_holdout.push_back(std::stoi(id));
        } else if (f[0] == "emotion" && f.size() == 3) {
          m.emotions.push_back({std::stoi(f[1]), f[2]});
        } else if (f[0] == "soundscape" && f.size() == 7) {
          SoundscapeCondition s;
          s.id = std::stoi(f[1]);
          s.name = f[2];
          s.noise = parse_noise_kind(f[3]);
          s.snr_db = std::stod(f[4]);
          if (f[5] != "-") s.band = std::make_pair(std::stod(f[5]), std::stod(f[6]));
          m.soundscapes.push_back(std::move(s));
        }
        continue;
      }
      auto f = split_tabs(line);
      if (f.size() != 6) throw DataError("expected 6 fields");
      Record r;
      r.clip_path = f[0];
      r.caption = f[1];
      r.emotion = std::stoi(f[2]);
      r.soundscape = std::stoi(f[3]);
      r.split = parse_split(f[4]);
      r.seed = std::stoull(f[5]);
      m.records.push_back(std::move(r));
    }
  } catch (const DataError &e) {
    throw DataError("manifest " + path + " line " + std::to_string(lineno) + ": " + e.what());
  } catch (const std::exception &e) {
    throw DataError("manifest " + path + " line " + std::to_string(lineno) + ": malformed field (" +
                    e.what() + ")");
  }
  if (m.version != kGeneratorVersion)
    throw DataError("manifest " + path + ": unsupported version " + std::to_string(m.version));
  return m;
}

}  // namespace clepdg
