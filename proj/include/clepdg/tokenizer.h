// include/clepdg/tokenizer.h

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

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace clepdg {

inline constexpr int kPadToken = 0;
inline constexpr int kClsToken = 1;
inline constexpr int kUnkToken = 2;
inline constexpr std::size_t kTextLength = 16;

using TextSequence = std::vector<int>;

// Closed vocabulary: the special tokens, the caption template words, the
// emotion names and the soundscape descriptors.
const std::vector<std::string> &vocabulary();
std::size_t vocab_size();
int token_id(std::string_view word);  // kUnkToken when absent

// Lowercased words, split on whitespace and punctuation, mapped to ids.
std::vector<int> word_ids(std::string_view text);

// [CLS, words..., PAD...] truncated/padded to `length`. Throws ContractError
// for text with no words.
TextSequence tokenize(std::string_view text, std::size_t length = kTextLength);

}  // namespace clepdg
