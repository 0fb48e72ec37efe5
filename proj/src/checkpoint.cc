// src/checkpoint.cc

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

#include "clepdg/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "clepdg/error.h"

namespace clepdg {

namespace {

constexpr std::size_t kMagicSize = 8;
constexpr std::uint8_t kDtypeF32 = 0;

class Writer {
 public:
  explicit Writer(std::vector<unsigned char> &out) : out_(out) {}
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void bytes(const void *p, std::size_t n) {
    const auto *b = static_cast<const unsigned char *>(p);
    out_.insert(out_.end(), b, b + n);
  }

 private:
  std::vector<unsigned char> &out_;
};

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> in) : in_(in) {}
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }
  std::span<const unsigned char> take(std::size_t n, const char *what) {
    if (n > remaining())
      throw CorruptionError(std::string("checkpoint truncated while reading ") + what);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint8_t u8(const char *what) { return take(1, what)[0]; }
  std::uint32_t u32(const char *what) {
    auto s = take(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(s[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64(const char *what) {
    auto s = take(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(s[i]) << (8 * i);
    return v;
  }

 private:
  std::span<const unsigned char> in_;
  std::size_t pos_ = 0;
};

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

}  // namespace

std::uint64_t fnv1a64(std::span<const unsigned char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<unsigned char> serialize_checkpoint(const TensorMap &tensors) {
  std::vector<unsigned char> payload;
  std::vector<unsigned char> out;
  Writer w(out);
  w.bytes(kCheckpointMagic, kMagicSize);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  Writer pw(payload);
  for (const auto &[name, t] : tensors) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.u8(kDtypeF32);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t d : t.shape()) w.u64(d);
    w.u64(payload.size());
    for (double v : t.data()) pw.u32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  w.u64(payload.size());
  w.bytes(payload.data(), payload.size());
  w.u64(fnv1a64(payload));
  return out;
}

TensorMap deserialize_checkpoint(std::span<const unsigned char> bytes) {
  Reader r(bytes);
  auto magic = r.take(kMagicSize, "magic");
  if (std::memcmp(magic.data(), kCheckpointMagic, kMagicSize) != 0)
    throw CorruptionError("not a checkpoint: bad magic");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion)
    throw CorruptionError("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t count = r.u32("tensor count");

  struct Entry {
    std::string name;
    Shape shape;
    std::uint64_t offset;
  };
  std::vector<Entry> entries;
  for (std::uint32_t i = 0; i < count; ++i) {
    Entry e;
    const std::uint32_t len = r.u32("name length");
    auto name = r.take(len, "tensor name");
    e.name.assign(name.begin(), name.end());
    if (r.u8("dtype") != kDtypeF32)
      throw CorruptionError("tensor " + e.name + " has an unknown dtype");
    const std::uint32_t ndim = r.u32("rank");
    if (ndim > 8) throw CorruptionError("tensor " + e.name + " has implausible rank");
    for (std::uint32_t d = 0; d < ndim; ++d) e.shape.push_back(r.u64("dimension"));
    e.offset = r.u64("payload offset");
    entries.push_back(std::move(e));
  }
  const std::uint64_t payload_size = r.u64("payload size");
  auto payload = r.take(payload_size, "payload");
  const std::uint64_t expected = r.u64("checksum");
  if (r.remaining() != 0) throw CorruptionError("trailing bytes after checkpoint checksum");
  const std::uint64_t actual = fnv1a64(payload);
  if (actual != expected)
    throw CorruptionError("checkpoint checksum mismatch: expected " + hex64(expected) +
                          ", actual " + hex64(actual));

  TensorMap out;
  for (const auto &e : entries) {
    const std::size_t n = shape_numel(e.shape);
    if (e.offset > payload_size || n > (payload_size - e.offset) / 4)
      throw CorruptionError("tensor " + e.name + " extends past the payload");
    std::vector<double> data(n);
    const unsigned char *p = payload.data() + e.offset;
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[4 * i + b]) << (8 * b);
      data[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    if (!out.emplace(e.name, Tensor(e.shape, std::move(data))).second)
      throw CorruptionError("duplicate tensor name " + e.name);
  }
  return out;
}

void save_checkpoint(const TensorMap &tensors, const std::string &path) {
  const auto bytes = serialize_checkpoint(tensors);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);
  os.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing checkpoint: " + path);
}

TensorMap load_checkpoint(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("checkpoint not found or unreadable: " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  try {
    return deserialize_checkpoint(bytes);
  } catch (const CorruptionError &e) {
    throw CorruptionError(path + ": " + e.what());
  }
}

void snap_to_f32(Tensor &t) {
  for (double &v : t.mutable_data()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace clepdg
