// src/audio.cc

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

#include "clepdg/audio.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "clepdg/error.h"

namespace clepdg {

AudioClip standardize(std::span<const double> samples, int sample_rate) {
  if (sample_rate != kSampleRate)
    throw UnsupportedRateError("standardize: sample rate " + std::to_string(sample_rate) +
                               " Hz is not supported (expected 16000 Hz)");
  AudioClip clip;
  clip.samples.assign(kClipSamples, 0.0);
  std::copy_n(samples.begin(), std::min(samples.size(), kClipSamples), clip.samples.begin());
  return clip;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

MelFilterbank::MelFilterbank(std::size_t num_bands, std::size_t fft_size, int sample_rate,
                             double low_hz, double high_hz)
    : num_bands_(num_bands),
      num_bins_(fft_size / 2 + 1),
      fft_size_(fft_size),
      sample_rate_(sample_rate),
      weights_(num_bands * (fft_size / 2 + 1), 0.0) {
  const double mel_lo = hz_to_mel(low_hz), mel_hi = hz_to_mel(high_hz);
  const double step = (mel_hi - mel_lo) / static_cast<double>(num_bands + 1);
  std::vector<double> edges(num_bands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_lo + step * static_cast<double>(i));
  for (std::size_t b = 0; b < num_bands; ++b) {
    const double left = edges[b], center = edges[b + 1], right = edges[b + 2];
    centers_hz_.push_back(center);
    std::size_t first = num_bins_, last = 0;
    for (std::size_t k = 0; k < num_bins_; ++k) {
      const double f = bin_hz(k);
      double w = 0.0;
      if (f > left && f < right)
        w = f <= center ? (f - left) / (center - left) : (right - f) / (right - center);
      weights_[b * num_bins_ + k] = w;
      if (w > 0.0) {
        first = std::min(first, k);
        last = k;
      }
    }
    first_bin_.push_back(first);
    last_bin_.push_back(last);
  }
}

double MelFilterbank::bin_hz(std::size_t bin) const {
  return static_cast<double>(bin) * sample_rate_ / static_cast<double>(fft_size_);
}

void MelFilterbank::apply(std::span<const double> power, std::span<double> energies) const {
  for (std::size_t b = 0; b < num_bands_; ++b) {
    double e = 0.0;
    const double *w = weights_.data() + b * num_bins_;
    for (std::size_t k = first_bin_[b]; k <= last_bin_[b] && k < num_bins_; ++k) e += w[k] * power[k];
    energies[b] = e;
  }
}

const MelFilterbank &default_filterbank() {
  static const MelFilterbank bank(kNumMelBands, kFftSize, kSampleRate, 0.0, kSampleRate / 2.0);
  return bank;
}

const std::vector<double> &hann_window() {
  static const std::vector<double> window = [] {
    std::vector<double> w(kFrameLength);
    for (std::size_t n = 0; n < kFrameLength; ++n)
      w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                  static_cast<double>(kFrameLength - 1));
    return w;
  }();
  return window;
}

namespace {

struct FftTables {
  std::vector<std::complex<double>> twiddle;  // exp(-2 pi i k / N), k < N
  std::vector<std::size_t> bitrev;
};

const FftTables &fft_tables() {
  static const FftTables tables = [] {
    FftTables t;
    t.twiddle.resize(kFftSize);
    for (std::size_t k = 0; k < kFftSize; ++k) {
      const double a = -2.0 * std::numbers::pi * static_cast<double>(k) / kFftSize;
      t.twiddle[k] = {std::cos(a), std::sin(a)};
    }
    t.bitrev.resize(kFftSize);
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < kFftSize) ++bits;
    for (std::size_t i = 0; i < kFftSize; ++i) {
      std::size_t r = 0;
      for (std::size_t b = 0; b < bits; ++b)
        if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (bits - 1 - b);
      t.bitrev[i] = r;
    }
    return t;
  }();
  return tables;
}

}  // namespace

void power_spectrum(std::span<const double> frame, std::span<double> power) {
  const auto &t = fft_tables();
  const auto &win = hann_window();
  std::complex<double> buf[kFftSize];
  for (std::size_t i = 0; i < kFftSize; ++i) buf[i] = 0.0;
  for (std::size_t n = 0; n < kFrameLength; ++n) buf[t.bitrev[n]] = frame[n] * win[n];
  for (std::size_t len = 2; len <= kFftSize; len <<= 1) {
    const std::size_t half = len / 2, stride = kFftSize / len;
    for (std::size_t start = 0; start < kFftSize; start += len)
      for (std::size_t j = 0; j < half; ++j) {
        const std::complex<double> u = buf[start + j];
        const std::complex<double> v = buf[start + j + half] * t.twiddle[j * stride];
        buf[start + j] = u + v;
        buf[start + j + half] = u - v;
      }
  }
  for (std::size_t k = 0; k < kNumBins; ++k) power[k] = std::norm(buf[k]);
}

void power_spectrum_naive(std::span<const double> frame, std::span<double> power) {
  const auto &t = fft_tables();
  const auto &win = hann_window();
  for (std::size_t k = 0; k < kNumBins; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t n = 0; n < kFrameLength; ++n) {
      const auto &w = t.twiddle[(k * n) % kFftSize];
      const double x = frame[n] * win[n];
      re += x * w.real();
      im += x * w.imag();
    }
    power[k] = re * re + im * im;
  }
}

namespace {

template <class Spectrum>
MelSpectrogram log_mel_impl(const AudioClip &clip, Spectrum spectrum) {
  const auto &bank = default_filterbank();
  const std::size_t frames =
      clip.samples.size() < kFrameLength ? 0 : 1 + (clip.samples.size() - kFrameLength) / kFrameHop;
  MelSpectrogram mel;
  mel.num_frames = frames;
  mel.values.resize(frames * kNumMelBands);
  std::vector<double> power(kNumBins);
  for (std::size_t f = 0; f < frames; ++f) {
    spectrum(std::span<const double>(clip.samples).subspan(f * kFrameHop, kFrameLength), power);
    std::span<double> row(mel.values.data() + f * kNumMelBands, kNumMelBands);
    bank.apply(power, row);
    for (auto &e : row) e = std::log(e + kEnergyFloor);
  }
  return mel;
}

}  // namespace

MelSpectrogram log_mel(const AudioClip &clip) {
  return log_mel_impl(clip, [](std::span<const double> fr, std::span<double> p) { power_spectrum(fr, p); });
}

MelSpectrogram log_mel_naive(const AudioClip &clip) {
  return log_mel_impl(clip, [](std::span<const double> fr, std::span<double> p) {
    power_spectrum_naive(fr, p);
  });
}

// ---------------------------------------------------------------------------
// WAV

namespace {

void put_u32(std::ofstream &os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char *>(b), 4);
}

void put_u16(std::ofstream &os, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<const char *>(b), 2);
}

std::uint32_t get_u32(const unsigned char *p) {
  return std::uint32_t{p[0]} | std::uint32_t{p[1]} << 8 | std::uint32_t{p[2]} << 16 |
         std::uint32_t{p[3]} << 24;
}

std::uint16_t get_u16(const unsigned char *p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

}  // namespace

void write_wav(const std::string &path, std::span<const double> samples, int sample_rate) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("write_wav: cannot open " + path);
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  os.write("RIFF", 4);
  put_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_u32(os, 16);
  put_u16(os, 1);  // PCM
  put_u16(os, 1);  // mono
  put_u32(os, static_cast<std::uint32_t>(sample_rate));
  put_u32(os, static_cast<std::uint32_t>(sample_rate) * 2);
  put_u16(os, 2);
  put_u16(os, 16);
  os.write("data", 4);
  put_u32(os, data_bytes);
  for (double x : samples) {
    const double q = std::clamp(std::round(x * 32768.0), -32768.0, 32767.0);
    put_u16(os, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  if (!os) throw IoError("write_wav: write failed for " + path);
}

std::vector<double> read_wav(const std::string &path, int *sample_rate) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("read_wav: cannot open " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), {});
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw DataError("read_wav: " + path + " is not a RIFF/WAVE file");
  std::size_t pos = 12;
  bool have_fmt = false;
  int rate = 0;
  while (pos + 8 <= bytes.size()) {
    const unsigned char *chunk = bytes.data() + pos;
    const std::uint32_t size = get_u32(chunk + 4);
    if (pos + 8 + size > bytes.size()) throw DataError("read_wav: truncated chunk in " + path);
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw DataError("read_wav: short fmt chunk in " + path);
      const std::uint16_t format = get_u16(chunk + 8), channels = get_u16(chunk + 10);
      const std::uint16_t bits = get_u16(chunk + 22);
      if (format != 1 || channels != 1 || bits != 16)
        throw DataError("read_wav: " + path + " is not mono 16-bit PCM");
      rate = static_cast<int>(get_u32(chunk + 12));
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw DataError("read_wav: data before fmt in " + path);
      std::vector<double> out(size / 2);
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<std::int16_t>(get_u16(chunk + 8 + 2 * i)) / 32768.0;
      if (sample_rate) *sample_rate = rate;
      return out;
    }
    pos += 8 + size + (size & 1);
  }
  throw DataError("read_wav: no data chunk in " + path);
}

AudioClip load_clip(const std::string &path) {
  int rate = 0;
  auto samples = read_wav(path, &rate);
  return standardize(samples, rate);
}

}  // namespace clepdg
