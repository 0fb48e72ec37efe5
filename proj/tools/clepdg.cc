// tools/clepdg.cc

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

// Command-line driver: corpus synthesis, the training stages, evaluation and
// the multi-seed studies.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "clepdg/audio.h"
#include "clepdg/checkpoint.h"
#include "clepdg/config.h"
#include "clepdg/error.h"
#include "clepdg/gradcheck.h"
#include "clepdg/pipeline.h"
#include "clepdg/synth.h"

namespace fs = std::filesystem;
using namespace clepdg;

namespace {

struct Options {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out;
  std::string manifest;
  std::string checkpoint;
  std::string classifier;
  std::string clip;
  std::string split = "test_in";
};

RunConfig load_config(const Options &opt) {
  RunConfig cfg = opt.config_path.empty() ? RunConfig::defaults() : RunConfig::load(opt.config_path);
  if (opt.seed_given) {
    cfg.train.seed = opt.seed;
    cfg.study.seeds = {opt.seed};
  }
  return cfg;
}

// The run log goes to <out>/run.log when an output directory is given and to
// stderr otherwise. The effective config is echoed at the top.
class LogSink {
 public:
  LogSink(const Options &opt, const RunConfig &cfg) {
    if (!opt.out.empty()) {
      fs::create_directories(opt.out);
      const std::string path = (fs::path(opt.out) / "run.log").string();
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw IoError("cannot write " + path);
      std::ofstream(fs::path(opt.out) / "effective.conf") << cfg.echo();
      log_ = RunLog(*file_);
    } else {
      log_ = RunLog(std::cerr);
    }
    std::istringstream echo(cfg.echo());
    for (std::string line; std::getline(echo, line);) log_.note(line);
  }
  RunLog &log() { return log_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  RunLog log_;
};

std::string out_file(const Options &opt, const std::string &name) {
  return (fs::path(opt.out) / name).string();
}

void write_text(const std::string &path, const std::string &text) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << text;
}

std::vector<std::string> default_emotion_names() {
  std::vector<std::string> names;
  for (const auto &e : default_emotions()) names.push_back(e.name);
  return names;
}

int cmd_synth(const Options &opt) {
  RunConfig cfg = load_config(opt);
  if (opt.seed_given) cfg.corpus.global_seed = opt.seed;
  LogSink sink(opt, cfg);
  const Manifest m = build_corpus(cfg.corpus, opt.out);
  for (Split s : {Split::kTrain, Split::kTestIn, Split::kTestDg})
    std::cout << split_name(s) << '\t' << m.split(s).size() << '\n';
  std::cout << "manifest\t" << out_file(opt, "manifest.tsv") << '\n';
  return 0;
}

int cmd_pretrain(const Options &opt) {
  const RunConfig cfg = load_config(opt);
  const LoadedCorpus corpus = load_corpus(read_manifest(opt.manifest));
  LogSink sink(opt, cfg);
  const PretrainResult r = pretrain(corpus.train, cfg.train, sink.log());
  const std::string path = out_file(opt, "model.ckpt");
  save_checkpoint(model_tensors(r.model), path);
  std::cout << "checkpoint\t" << path << '\n';
  return 0;
}

int cmd_acpt(const Options &opt) {
  const RunConfig cfg = load_config(opt);
  const LoadedCorpus corpus = load_corpus(read_manifest(opt.manifest));
  ClepModel model = model_from_tensors(load_checkpoint(opt.checkpoint));
  LogSink sink(opt, cfg);
  AcptResult r = run_acpt(model, corpus.emotion_names(), corpus.manifest.soundscape_ids(),
                          cfg.train, sink.log());
  model.prompts = std::move(r.bank);
  const std::string path = out_file(opt, "model.ckpt");
  save_checkpoint(model_tensors(model), path);
  std::cout << "first_loss\t" << r.losses.front() << "\nlast_loss\t" << r.losses.back()
            << "\ncheckpoint\t" << path << '\n';
  return 0;
}

int cmd_train_classifier(const Options &opt) {
  const RunConfig cfg = load_config(opt);
  const ClepModel model = model_from_tensors(load_checkpoint(opt.checkpoint));
  const auto names = opt.manifest.empty()
                         ? default_emotion_names()
                         : load_corpus(read_manifest(opt.manifest)).emotion_names();
  LogSink sink(opt, cfg);
  const PromptBank *bank = model.prompts ? &*model.prompts : nullptr;
  const LabeledEmbeddings data =
      build_text_training_set(model, bank, names, cfg.train.max_length);
  const ClassifierResult r = train_classifier(data, names.size(), cfg.train.classifier,
                                              cfg.train.seed, sink.log());
  const std::string path = out_file(opt, "classifier.ckpt");
  save_checkpoint(r.classifier.to_tensors(), path);
  std::cout << "examples\t" << data.labels.size() << "\ntrain_accuracy\t" << r.train_accuracy
            << "\nclassifier\t" << path << '\n';
  return 0;
}

int cmd_infer(const Options &opt) {
  const ClepModel model = model_from_tensors(load_checkpoint(opt.checkpoint));
  const Classifier k = Classifier::from_tensors(load_checkpoint(opt.classifier));
  const auto names = default_emotion_names();
  if (k.num_classes() != names.size())
    throw ContractError("classifier has " + std::to_string(k.num_classes()) + " classes, expected " +
                        std::to_string(names.size()));
  std::cout << names[static_cast<std::size_t>(infer(model, k, load_clip(opt.clip)))] << '\n';
  return 0;
}

int cmd_eval(const Options &opt) {
  const Split split = parse_split(opt.split);
  const Manifest manifest = read_manifest(opt.manifest);
  const ClepModel model = model_from_tensors(load_checkpoint(opt.checkpoint));
  const Classifier k = Classifier::from_tensors(load_checkpoint(opt.classifier));
  const EvalResult r = evaluate(model, k, load_audio_set(manifest, split));
  std::ostringstream os;
  os.precision(4);
  os << std::fixed << "split\twa\tua\n" << split_name(split) << '\t' << r.wa << '\t' << r.ua << '\n';
  os << "# confusion (rows true, columns predicted)\n";
  for (const auto &row : r.confusion) {
    for (std::size_t j = 0; j < row.size(); ++j) os << (j ? "\t" : "") << row[j];
    os << '\n';
  }
  std::cout << os.str();
  if (!opt.out.empty()) {
    fs::create_directories(opt.out);
    write_text(out_file(opt, "eval_" + split_name(split) + ".tsv"), os.str());
  }
  return 0;
}

std::vector<SeedModel> seed_models(const Options &opt, const RunConfig &cfg,
                                   const LoadedCorpus &corpus, RunLog &log) {
  auto models = pretrain_seeds(corpus, cfg.train, cfg.study.seeds, log);
  for (const auto &m : models)
    save_checkpoint(model_tensors(m.fine_tuned),
                    out_file(opt, "model_seed" + std::to_string(m.seed) + ".ckpt"));
  return models;
}

int cmd_ablate(const Options &opt) {
  const RunConfig cfg = load_config(opt);
  const LoadedCorpus corpus = load_corpus(read_manifest(opt.manifest));
  LogSink sink(opt, cfg);
  const auto models = seed_models(opt, cfg, corpus, sink.log());
  const AblationReport report = ablate(corpus, cfg.train, models, sink.log());
  const auto losses = compare_classifier_losses(corpus, cfg.train, models, sink.log());
  write_text(out_file(opt, "ablation.tsv"), report.table());
  write_text(out_file(opt, "ablation_runs.tsv"), report.runs_table());
  write_text(out_file(opt, "classifier_losses.tsv"), loss_comparison_table(losses));
  std::cout << report.table() << '\n' << loss_comparison_table(losses);
  return 0;
}

int cmd_sweep(const Options &opt) {
  const RunConfig cfg = load_config(opt);
  const LoadedCorpus corpus = load_corpus(read_manifest(opt.manifest));
  LogSink sink(opt, cfg);
  const auto models = seed_models(opt, cfg, corpus, sink.log());
  const auto rows = prompt_length_sweep(corpus, cfg.train, cfg.study, models, sink.log());
  write_text(out_file(opt, "sweep.tsv"), sweep_table(rows));
  std::cout << sweep_table(rows);
  return 0;
}

int cmd_gradcheck(const Options &opt) {
  bool all = true;
  for (const auto &c : run_gradcheck_suite(opt.seed)) {
    all = all && c.report.passed;
    std::printf("%-28s %s  max_rel %.3e  checked %zu\n", c.name.c_str(),
                c.report.passed ? "PASS" : "FAIL", c.report.max_rel_error, c.report.checked);
  }
  std::printf("%s\n", all ? "all passed" : "FAILED");
  return all ? 0 : 2;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"clepdg: contrastive audio-text training with prompt tuning"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config_path, "key = value config file");
  app.add_option_function<std::uint64_t>(
      "--seed",
      [&](std::uint64_t s) {
        opt.seed = s;
        opt.seed_given = true;
      },
      "training seed (corpus seed for synth-data)");

  auto sub = [&](const char *name, const char *help) {
    CLI::App *s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };
  CLI::App *synth = sub("synth-data", "write the synthetic corpus and its manifest");
  CLI::App *pre = sub("pretrain", "contrastive fine-tuning");
  CLI::App *acpt = sub("acpt", "prompt tuning on a fine-tuned checkpoint");
  CLI::App *cls = sub("train-classifier", "train the classifier on text embeddings");
  CLI::App *inf = sub("infer", "print the predicted emotion of one clip");
  CLI::App *ev = sub("eval", "WA/UA of a classifier on one split");
  CLI::App *abl = sub("ablate", "fine-tune x prompt-tuning grid and classifier loss comparison");
  CLI::App *sweep = sub("sweep-prompt-len", "accuracy against the number of prompt tokens");
  CLI::App *gc = sub("gradcheck", "finite-difference gradient suite");

  for (CLI::App *s : {synth, pre, acpt, cls, abl, sweep})
    s->add_option("--out", opt.out, "output directory")->required();
  ev->add_option("--out", opt.out, "output directory");
  for (CLI::App *s : {pre, acpt, ev, abl, sweep})
    s->add_option("--manifest", opt.manifest, "corpus manifest.tsv")->required();
  cls->add_option("--manifest", opt.manifest, "corpus manifest.tsv (emotion names)");
  for (CLI::App *s : {acpt, cls, inf, ev})
    s->add_option("--checkpoint", opt.checkpoint, "model checkpoint")->required();
  for (CLI::App *s : {inf, ev})
    s->add_option("--classifier", opt.classifier, "classifier checkpoint")->required();
  inf->add_option("--clip", opt.clip, "16 kHz mono WAV")->required();
  ev->add_option("--split", opt.split, "train, test_in or test_dg");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    if (*synth) return cmd_synth(opt);
    if (*pre) return cmd_pretrain(opt);
    if (*acpt) return cmd_acpt(opt);
    if (*cls) return cmd_train_classifier(opt);
    if (*inf) return cmd_infer(opt);
    if (*ev) return cmd_eval(opt);
    if (*abl) return cmd_ablate(opt);
    if (*sweep) return cmd_sweep(opt);
    if (*gc) return cmd_gradcheck(opt);
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
