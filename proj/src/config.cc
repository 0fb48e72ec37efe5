// src/config.cc

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

#include "clepdg/config.h"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "clepdg/error.h"

namespace clepdg {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string &key, const std::string &v) {
  T out{};
  const char *end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw ConfigError(key + ": cannot parse '" + v + "' as a number");
  return out;
}

template <typename T>
std::vector<T> parse_list(const std::string &key, const std::string &v) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string format_list(const std::vector<T> &v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct Field {
  std::function<void(RunConfig &, const std::string &key, const std::string &value)> set;
  std::function<std::string(const RunConfig &)> get;
};

const std::map<std::string, Field> &fields() {
  using C = RunConfig;
  using K = const std::string &;
  static const std::map<std::string, Field> f = {
      {"seed",
       {[](C &c, K k, K v) { c.train.seed = parse_number<std::uint64_t>(k, v); },
        [](const C &c) { return std::to_string(c.train.seed); }}},
      {"corpus.seed",
       {[](C &c, K k, K v) { c.corpus.global_seed = parse_number<std::uint64_t>(k, v); },
        [](const C &c) { return std::to_string(c.corpus.global_seed); }}},
      {"corpus.train_per_pair",
       {[](C &c, K k, K v) { c.corpus.train_per_pair = parse_number<int>(k, v); },
        [](const C &c) { return std::to_string(c.corpus.train_per_pair); }}},
      {"corpus.test_in_per_pair",
       {[](C &c, K k, K v) { c.corpus.test_in_per_pair = parse_number<int>(k, v); },
        [](const C &c) { return std::to_string(c.corpus.test_in_per_pair); }}},
      {"corpus.test_dg_per_pair",
       {[](C &c, K k, K v) { c.corpus.test_dg_per_pair = parse_number<int>(k, v); },
        [](const C &c) { return std::to_string(c.corpus.test_dg_per_pair); }}},
      {"corpus.dg_holdout",
       {[](C &c, K k, K v) { c.corpus.dg_holdout = parse_list<int>(k, v); },
        [](const C &c) { return format_list(c.corpus.dg_holdout); }}},
      {"pretrain.epochs",
       {[](C &c, K k, K v) { c.train.pretrain.epochs = parse_number<int>(k, v); },
        [](const C &c) { return std::to_string(c.train.pretrain.epochs); }}},
      {"pretrain.batch_size",
       {[](C &c, K k, K v) { c.train.pretrain.batch_size = parse_number<std::size_t>(k, v); },
        [](const C &c) { return std::to_string(c.train.pretrain.batch_size); }}},
      {"pretrain.audio_lr",
       {[](C &c, K k, K v) { c.train.pretrain.audio_lr = parse_number<double>(k, v); },
        [](const C &c) { return format_double(c.train.pretrain.audio_lr); }}},
      {"pretrain.projection_lr",
       {[](C &c, K k, K v) { c.train.pretrain.projection_lr = parse_number<double>(k, v); },
        [](const C &c) { return format_double(c.train.pretrain.projection_lr); }}},
      {"acpt.iterations",
       {[](C &c, K k, K v) { c.train.acpt.iterations = parse_number<int>(k, v); },
        [](const C &c) { return std::to_string(c.train.acpt.iterations); }}},
      {"acpt.learning_rate",
       {[](C &c, K k, K v) { c.train.acpt.learning_rate = parse_number<double>(k, v); },
        [](const C &c) { return format_double(c.train.acpt.learning_rate); }}},
      {"acpt.momentum",
       {[](C &c, K k, K v) { c.train.acpt.momentum = parse_number<double>(k, v); },
        [](const C &c) { return format_double(c.train.acpt.momentum); }}},
      {"acpt.omega",
       {[](C &c, K k, K v) { c.train.acpt.omega = parse_number<double>(k, v); },
        [](const C &c) { return format_double(c.train.acpt.omega); }}},
      {"acpt.prompt_tokens",
       {[](C &c, K k, K v) { c.train.prompt_tokens = parse_number<std::size_t>(k, v); },
        [](const C &c) { return std::to_string(c.train.prompt_tokens); }}},
      {"acpt.max_length",
       {[](C &c, K k, K v) { c.train.max_length = parse_number<std::size_t>(k, v); },
        [](const C &c) { return std::to_string(c.train.max_length); }}},
      {"classifier.loss",
       {[](C &c, K, K v) { c.train.classifier.loss = parse_classifier_loss(v); },
        [](const C &c) { return classifier_loss_name(c.train.classifier.loss); }}},
      {"classifier.epochs",
       {[](C &c, K k, K v) { c.train.classifier.epochs = parse_number<int>(k, v); },
        [](const C &c) { return std::to_string(c.train.classifier.epochs); }}},
      {"classifier.learning_rate",
       {[](C &c, K k, K v) { c.train.classifier.learning_rate = parse_number<double>(k, v); },
        [](const C &c) { return format_double(c.train.classifier.learning_rate); }}},
      {"classifier.momentum",
       {[](C &c, K k, K v) { c.train.classifier.momentum = parse_number<double>(k, v); },
        [](const C &c) { return format_double(c.train.classifier.momentum); }}},
      {"classifier.batch_size",
       {[](C &c, K k, K v) { c.train.classifier.batch_size = parse_number<std::size_t>(k, v); },
        [](const C &c) { return std::to_string(c.train.classifier.batch_size); }}},
      {"classifier.scale",
       {[](C &c, K k, K v) { c.train.classifier.arcface.scale = parse_number<double>(k, v); },
        [](const C &c) { return format_double(c.train.classifier.arcface.scale); }}},
      {"classifier.margin",
       {[](C &c, K k, K v) { c.train.classifier.arcface.margin = parse_number<double>(k, v); },
        [](const C &c) { return format_double(c.train.classifier.arcface.margin); }}},
      {"eval.seeds",
       {[](C &c, K k, K v) { c.study.seeds = parse_list<std::uint64_t>(k, v); },
        [](const C &c) { return format_list(c.study.seeds); }}},
      {"sweep.prompt_lengths",
       {[](C &c, K k, K v) { c.study.prompt_lengths = parse_list<std::size_t>(k, v); },
        [](const C &c) { return format_list(c.study.prompt_lengths); }}},
      {"sweep.max_length",
       {[](C &c, K k, K v) { c.study.sweep_max_length = parse_number<std::size_t>(k, v); },
        [](const C &c) { return std::to_string(c.study.sweep_max_length); }}},
  };
  return f;
}

}  // namespace

std::string profile_name(Profile profile) {
  return profile == Profile::kPaper ? "paper" : "desk";
}

Profile parse_profile(const std::string &name) {
  if (name == "desk") return Profile::kDesk;
  if (name == "paper") return Profile::kPaper;
  throw ConfigError("unknown profile '" + name + "' (expected desk or paper)");
}

RunConfig RunConfig::defaults(Profile profile) {
  RunConfig c;
  c.profile = profile;
  c.train = TrainConfig::for_profile(profile);
  return c;
}

const std::vector<std::string> &RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out = {"profile"};
    for (const auto &[name, f] : fields()) out.push_back(name);
    return out;
  }();
  return k;
}

RunConfig RunConfig::parse(std::string_view text) {
  struct Line {
    int number;
    std::string key, value;
  };
  std::vector<Line> lines;
  std::set<std::string> seen;
  Profile profile = Profile::kDesk;
  std::istringstream is{std::string(text)};
  std::string raw;
  for (int number = 1; std::getline(is, raw); ++number) {
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(number) + ": ";
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    Line l{number, trim(std::string_view(line).substr(0, eq)),
           trim(std::string_view(line).substr(eq + 1))};
    if (l.key.empty() || l.value.empty()) throw ConfigError(where + "expected 'key = value'");
    if (l.key != "profile" && !fields().count(l.key))
      throw ConfigError(where + "unknown key '" + l.key + "'");
    if (!seen.insert(l.key).second) throw ConfigError(where + "key '" + l.key + "' repeated");
    if (l.key == "profile") {
      try {
        profile = parse_profile(l.value);
      } catch (const ConfigError &e) {
        throw ConfigError(where + e.what());
      }
    } else {
      lines.push_back(std::move(l));
    }
  }
  RunConfig c = defaults(profile);
  for (const auto &l : lines) {
    try {
      fields().at(l.key).set(c, l.key, l.value);
    } catch (const ConfigError &e) {
      throw ConfigError("config line " + std::to_string(l.number) + ": " + e.what());
    }
  }
  c.train.validate();
  if (c.corpus.train_per_pair < 1 || c.corpus.test_in_per_pair < 1 || c.corpus.test_dg_per_pair < 1)
    throw ConfigError("corpus clip counts must be at least 1");
  for (std::size_t np : c.study.prompt_lengths)
    if (np == 0) throw ConfigError("sweep.prompt_lengths entries must be positive");
  return c;
}

RunConfig RunConfig::load(const std::string &path) {
  std::ifstream is(path);
  if (!is) throw IoError("config not found or unreadable: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

std::string RunConfig::echo() const {
  std::string out = "profile = " + profile_name(profile) + "\n";
  for (const auto &[name, f] : fields()) out += name + " = " + f.get(*this) + "\n";
  return out;
}

}  // namespace clepdg
