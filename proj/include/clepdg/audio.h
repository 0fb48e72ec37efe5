// include/clepdg/audio.h

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

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace clepdg {

inline constexpr int kSampleRate = 16000;
inline constexpr std::size_t kClipSamples = 80000;  // 5 s at 16 kHz
inline constexpr std::size_t kFrameLength = 400;    // 25 ms
inline constexpr std::size_t kFrameHop = 160;       // 10 ms
inline constexpr std::size_t kFftSize = 512;
inline constexpr std::size_t kNumBins = kFftSize / 2 + 1;
inline constexpr std::size_t kNumMelBands = 40;
inline constexpr double kEnergyFloor = 1e-10;
inline constexpr std::size_t kNumFrames = 1 + (kClipSamples - kFrameLength) / kFrameHop;  // 498

struct AudioClip {
  std::vector<double> samples;
  int sample_rate = kSampleRate;
};

// Truncates or zero-pads (at the end) to exactly kClipSamples.
// Throws UnsupportedRateError unless sample_rate == 16000.
AudioClip standardize(std::span<const double> samples, int sample_rate);

struct MelSpectrogram {
  std::size_t num_frames = 0;
  std::size_t num_bands = kNumMelBands;
  std::vector<double> values;  // [num_frames x num_bands], row-major

  double at(std::size_t frame, std::size_t band) const {
    return values[frame * num_bands + band];
  }
};

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular filters on the linear-frequency DFT bins, 0-8000 Hz.
class MelFilterbank {
 public:
  MelFilterbank(std::size_t num_bands, std::size_t fft_size, int sample_rate,
                double low_hz, double high_hz);

  std::size_t num_bands() const { return num_bands_; }
  std::size_t num_bins() const { return num_bins_; }
  double weight(std::size_t band, std::size_t bin) const {
    return weights_[band * num_bins_ + bin];
  }
  double center_hz(std::size_t band) const { return centers_hz_[band]; }
  double bin_hz(std::size_t bin) const;

  // energies[band] = sum_bin weight * power[bin]
  void apply(std::span<const double> power, std::span<double> energies) const;

 private:
  std::size_t num_bands_, num_bins_, fft_size_;
  int sample_rate_;
  std::vector<double> weights_;
  std::vector<double> centers_hz_;
  std::vector<std::size_t> first_bin_, last_bin_;
};

const MelFilterbank &default_filterbank();

// Symmetric Hann window of length kFrameLength.
const std::vector<double> &hann_window();

// |DFT|^2 of a windowed frame zero-padded to kFftSize, bins 0..kFftSize/2.
void power_spectrum(std::span<const double> frame, std::span<double> power);
// Same quantity by direct summation; kept as the reference for the FFT.
void power_spectrum_naive(std::span<const double> frame, std::span<double> power);

MelSpectrogram log_mel(const AudioClip &clip);
MelSpectrogram log_mel_naive(const AudioClip &clip);

// ---------------------------------------------------------------------------
// WAV: mono PCM 16-bit little-endian.

void write_wav(const std::string &path, std::span<const double> samples,
               int sample_rate = kSampleRate);
// Samples are int16 / 32768. Throws IoError / DataError.
std::vector<double> read_wav(const std::string &path, int *sample_rate);
// read_wav + standardize.
AudioClip load_clip(const std::string &path);

}  // namespace clepdg
