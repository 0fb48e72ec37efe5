// src/tokenizer.cc

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

#include "clepdg/tokenizer.h"

#include <cctype>
#include <unordered_map>

#include "clepdg/error.h"

namespace clepdg {

const std::vector<std::string> &vocabulary() {
  static const std::vector<std::string> vocab = {
      "[PAD]", "[CLS]", "[UNK]",
      // template words
      "this", "is", "a", "an", "sound", "of", "in", "voice", "recorded", "the", "speech",
      // emotions
      "angry", "happy", "sad", "neutral",
      // soundscapes
      "studio", "office", "street", "cafe", "kitchen", "phone", "park", "classroom", "crowd",
      "factory", "radio", "subway"};
  return vocab;
}

std::size_t vocab_size() { return vocabulary().size(); }

int token_id(std::string_view word) {
  static const std::unordered_map<std::string, int> index = [] {
    std::unordered_map<std::string, int> m;
    const auto &v = vocabulary();
    for (std::size_t i = 0; i < v.size(); ++i) m.emplace(v[i], static_cast<int>(i));
    return m;
  }();
  auto it = index.find(std::string(word));
  return it == index.end() ? kUnkToken : it->second;
}

std::vector<int> word_ids(std::string_view text) {
  std::vector<int> ids;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) ids.push_back(token_id(word));
    word.clear();
  };
  for (char ch : text) {
    const unsigned char c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || std::ispunct(c))
      flush();
    else
      word.push_back(static_cast<char>(std::tolower(c)));
  }
  flush();
  return ids;
}

TextSequence tokenize(std::string_view text, std::size_t length) {
  auto words = word_ids(text);
  if (words.empty()) throw ContractError("tokenize: text has no words");
  TextSequence seq;
  seq.reserve(length);
  seq.push_back(kClsToken);
  for (int id : words) {
    if (seq.size() == length) break;
    seq.push_back(id);
  }
  seq.resize(length, kPadToken);
  return seq;
}

}  // namespace clepdg
