// include/clepdg/checkpoint.h

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
#include <span>
#include <string>
#include <vector>

#include "clepdg/tensor.h"

namespace clepdg {

// Binary layout, all integers little-endian:
//   "CLEPDG01"  u32 version  u32 count
//   count x { u32 name_len, name, u8 dtype (0 = f32), u32 ndim, u64 dims[ndim],
//             u64 payload_offset }
//   u64 payload_size, payload (f32 LE, row-major), u64 FNV-1a of payload
inline constexpr char kCheckpointMagic[] = "CLEPDG01";
inline constexpr std::uint32_t kCheckpointVersion = 1;

using TensorMap = std::map<std::string, Tensor>;

std::uint64_t fnv1a64(std::span<const unsigned char> bytes);

std::vector<unsigned char> serialize_checkpoint(const TensorMap &tensors);
// Throws CorruptionError on bad magic, unknown version or dtype, truncation,
// inconsistent offsets or a checksum mismatch.
TensorMap deserialize_checkpoint(std::span<const unsigned char> bytes);

void save_checkpoint(const TensorMap &tensors, const std::string &path);
// IoError when the file cannot be read; otherwise as deserialize_checkpoint.
TensorMap load_checkpoint(const std::string &path);

// Rounds every element to the nearest f32, i.e. the value a save/load round
// trip would produce.
void snap_to_f32(Tensor &t);

}  // namespace clepdg
