// include/clepdg/config.h

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

#include <string>
#include <string_view>
#include <vector>

#include "clepdg/pipeline.h"
#include "clepdg/synth.h"

namespace clepdg {

std::string profile_name(Profile profile);
Profile parse_profile(const std::string &name);

// Flat `section.key = value` configuration. Blank lines and lines starting
// with '#' are ignored. `profile = desk|paper` selects the defaults the other
// keys override, wherever it appears in the file.
struct RunConfig {
  Profile profile = Profile::kDesk;
  CorpusConfig corpus;
  TrainConfig train;
  StudyConfig study;

  static RunConfig defaults(Profile profile = Profile::kDesk);
  // ConfigError (with the line number) on syntax errors, unknown or repeated
  // keys and invalid values.
  static RunConfig parse(std::string_view text);
  static RunConfig load(const std::string &path);

  // Every key with its effective value, in a form parse() accepts.
  std::string echo() const;
  static const std::vector<std::string> &keys();
};

}  // namespace clepdg
