// Copyright 2026 The MSTN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: gen-data, train, eval, generate and ablate.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mstn/error.hpp"
#include "mstn/run.hpp"
#include "mstn/synthetic.hpp"

namespace fs = std::filesystem;
using namespace mstn;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
};

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path require_out(const Globals& g, const char* command) {
  if (g.out.empty()) throw ConfigError(std::string(command) + " needs --out");
  return g.out;
}

RunConfig load_config(const Globals& g) {
  if (g.config.empty()) throw ConfigError("--config is required");
  RunConfig c = load_run_config(g.config);
  if (g.seed) c.seed = g.seed;
  if (!g.out.empty()) c.run_dir = g.out;
  return c;
}

// ------------------------------------------------------------------ gen-data

struct GenDataArgs {
  std::size_t count = 1000;
  std::size_t valid_count = 200;
  std::size_t test_count = 200;
  SyntheticTaskSpec spec;
  std::string signal = "video";
};

void cmd_gen_data(const Globals& g, GenDataArgs a) {
  if (a.count == 0) throw ConfigError("--count must be >= 1");
  if (!g.seed) throw ConfigError("gen-data needs --seed");
  if (a.signal == "video") a.spec.signal = SignalModality::video;
  else if (a.signal == "audio") a.spec.signal = SignalModality::audio;
  else throw ConfigError("--signal must be video or audio");
  a.spec.pattern_seed = *g.seed;
  a.spec.validate();
  const fs::path out = require_out(g, "gen-data");
  fs::create_directories(out);

  struct Split {
    const char* name;
    std::size_t count;
  };
  nlohmann::ordered_json probe;
  std::vector<DialogExample> all;
  std::uint64_t offset = 0;
  for (const Split split : {Split{"train", a.count}, Split{"valid", a.valid_count},
                            Split{"test", a.test_count}}) {
    const std::uint64_t seed = *g.seed + 1 + offset++;
    if (split.count == 0) continue;
    const SyntheticDataset ds =
        generate_synthetic(a.spec, split.count, seed, std::string(split.name) + "-");
    save_dataset(out / (std::string(split.name) + ".jsonl"), ds.examples);
    std::vector<std::size_t> histogram(a.spec.attributes, 0);
    for (auto k : ds.attribute_index) ++histogram[k];
    probe[split.name] = {{"examples", ds.probe.examples},
                         {"accuracy", ds.probe.accuracy},
                         {"iterations", ds.probe.iterations},
                         {"attribute_histogram", histogram}};
    if (std::string(split.name) == "train") all = ds.examples;
  }
  build_vocab_from_examples(all, 1).save(out / "vocab.txt");
  write_json(out / "probe.json", probe);
  write_json(out / "task.json",
             {{"seed", *g.seed},
              {"attributes", a.spec.attributes},
              {"objects", a.spec.objects},
              {"video_dim", a.spec.video_dim},
              {"audio_dim", a.spec.audio_dim},
              {"video_frames", a.spec.video_frames},
              {"audio_frames", a.spec.audio_frames},
              {"window", a.spec.window},
              {"noise", a.spec.noise},
              {"skew", a.spec.skew},
              {"signal", a.signal},
              {"history_turns", a.spec.history_turns},
              {"caption_rate", a.spec.caption_rate}});
  std::cout << "wrote " << a.count << "/" << a.valid_count << "/" << a.test_count
            << " examples to " << out.string() << '\n';
}

// --------------------------------------------------------------------- train

void cmd_train(const Globals& g, const std::string& resume, bool quiet) {
  RunConfig config = load_config(g);
  config.validate(true);
  auto train = load_dataset(config.train_data);
  auto valid = load_dataset(config.valid_data);
  Vocab vocab = build_vocab_from_examples(train, config.min_count);
  Trainer trainer(config, vocab, std::move(train), std::move(valid));
  if (!resume.empty()) trainer.resume(resume);
  if (!quiet) {
    trainer.on_event = [](const nlohmann::ordered_json& j) {
      if (j["kind"] != "step") std::cout << j.dump() << std::endl;
    };
  }
  const TrainLog log = trainer.run();
  std::cout << "best valid loss " << log.best_valid_loss << " at epoch " << log.best_epoch
            << " after " << trainer.step() << " steps\n";
}

// ---------------------------------------------------------------------- eval

struct LoadedModel {
  MstnModel model;
  Vocab vocab;
};

LoadedModel load_checkpoint(const std::string& path, const std::string& vocab_path) {
  if (path.empty()) throw ConfigError("--checkpoint is required");
  const Checkpoint ckpt = Checkpoint::load(path);
  LoadedModel lm{model_from_checkpoint(ckpt), vocab_from_checkpoint(ckpt)};
  if (!vocab_path.empty()) {
    const Vocab external = Vocab::load(vocab_path);
    if (!(external == lm.vocab)) {
      throw DataError("vocabulary mismatch: checkpoint has " + std::to_string(lm.vocab.size()) +
                      " tokens, " + vocab_path + " has " + std::to_string(external.size()));
    }
  }
  return lm;
}

void check_features(const MstnModel& model, std::span<const DialogExample> data) {
  for (const auto& ex : data) {
    if (ex.video.cols != model.config().video_dim || ex.audio.cols != model.config().audio_dim) {
      throw DataError("example " + ex.id + " has feature dimensions " +
                      std::to_string(ex.video.cols) + "/" + std::to_string(ex.audio.cols) +
                      " but the checkpoint expects " + std::to_string(model.config().video_dim) +
                      "/" + std::to_string(model.config().audio_dim));
    }
  }
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string vocab;
  DecodeConfig decode;
};

void cmd_eval(const Globals& g, const EvalArgs& a) {
  if (a.data.empty()) throw ConfigError("--data is required");
  if (a.decode.beam < 1) throw ConfigError("--beam must be >= 1");
  const fs::path out = require_out(g, "eval");
  const LoadedModel lm = load_checkpoint(a.checkpoint, a.vocab);
  if (a.decode.max_len < 1 || a.decode.max_len > lm.model.config().max_decode_len) {
    throw ConfigError("--max-len must lie in [1, " +
                      std::to_string(lm.model.config().max_decode_len) + "]");
  }
  const auto data = load_dataset(a.data);
  check_features(lm.model, data);
  const EvalReport report = evaluate_model(lm.model, lm.vocab, data, a.decode);
  fs::create_directories(out);
  write_json(out / "report.json", to_json(report));
  write_hypotheses_tsv(out / "hypotheses.tsv", report);
  std::cout << "bleu4 " << report.bleu4 << " rouge_l " << report.rouge_l;
  if (report.attribute_accuracy) std::cout << " attribute_accuracy " << *report.attribute_accuracy;
  std::cout << " over " << report.examples << " examples\n";
}

// ------------------------------------------------------------------ generate

void cmd_generate(const EvalArgs& a, const std::string& id, std::size_t index) {
  if (a.data.empty()) throw ConfigError("--data is required");
  const LoadedModel lm = load_checkpoint(a.checkpoint, a.vocab);
  const auto data = load_dataset(a.data);
  const DialogExample* pick = nullptr;
  if (!id.empty()) {
    for (const auto& ex : data) {
      if (ex.id == id) pick = &ex;
    }
    if (pick == nullptr) throw DataError("no example with id '" + id + "' in " + a.data);
  } else {
    if (index >= data.size()) {
      throw DataError("--index " + std::to_string(index) + " out of range for " +
                      std::to_string(data.size()) + " examples");
    }
    pick = &data[index];
  }
  check_features(lm.model, std::span(pick, 1));
  std::cout << detokenize(generate_answer(lm.model, lm.vocab, *pick, a.decode)) << '\n';
}

// -------------------------------------------------------------------- ablate

void cmd_ablate(const Globals& g, std::vector<std::uint64_t> seeds, std::size_t classes) {
  RunConfig config = load_config(g);
  if (seeds.empty()) {
    if (!config.seed) throw ConfigError("ablate needs --seeds or a seed");
    seeds.push_back(*config.seed);
  }
  config.seed = seeds.front();
  config.validate(true);
  if (config.test_data.empty()) throw ConfigError("ablate needs [data] test");
  const fs::path out = require_out(g, "ablate");
  const auto train = load_dataset(config.train_data);
  const auto valid = load_dataset(config.valid_data);
  const auto test = load_dataset(config.test_data);
  if (classes == 0) {
    std::set<std::string> seen;
    for (const auto& ex : train) {
      if (!ex.attribute.empty()) seen.insert(ex.attribute);
    }
    classes = seen.size();
    if (classes == 0) throw DataError("training data carries no attribute labels; pass --attributes");
  }
  const Vocab vocab = build_vocab_from_examples(train, config.min_count);
  const AblationReport report =
      run_ablation(config, vocab, train, valid, test, seeds, classes,
                   [](const std::string& msg) { std::cout << msg << std::endl; });
  fs::create_directories(out);
  const auto j = to_json(report);
  write_json(out / "ablation.json", j);
  std::cout << j["summary"].dump(2) << '\n';
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return 3;
  if (dynamic_cast<const DataError*>(&e)) return 2;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return 2;
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MSTN audio-visual dialog model: data generation, training and evaluation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "random seed");
  app.add_option("--config", g.config, "run configuration file");
  app.add_option("--out", g.out, "output directory");

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a synthetic grounding dataset");
  gen_cmd->add_option("--count", gen.count, "training examples")->capture_default_str();
  gen_cmd->add_option("--valid-count", gen.valid_count, "validation examples")->capture_default_str();
  gen_cmd->add_option("--test-count", gen.test_count, "test examples")->capture_default_str();
  gen_cmd->add_option("--attributes", gen.spec.attributes, "attribute classes K")->capture_default_str();
  gen_cmd->add_option("--objects", gen.spec.objects, "object nouns")->capture_default_str();
  gen_cmd->add_option("--skew", gen.spec.skew, "probability of the majority attribute")
      ->capture_default_str();
  gen_cmd->add_option("--noise", gen.spec.noise, "feature noise sigma")->capture_default_str();
  gen_cmd->add_option("--signal", gen.signal, "stream carrying the attribute (video|audio)")
      ->capture_default_str();
  gen_cmd->add_option("--video-dim", gen.spec.video_dim)->capture_default_str();
  gen_cmd->add_option("--audio-dim", gen.spec.audio_dim)->capture_default_str();
  gen_cmd->add_option("--video-frames", gen.spec.video_frames)->capture_default_str();
  gen_cmd->add_option("--audio-frames", gen.spec.audio_frames)->capture_default_str();
  gen_cmd->add_option("--window", gen.spec.window)->capture_default_str();
  gen_cmd->add_option("--history-turns", gen.spec.history_turns)->capture_default_str();
  gen_cmd->add_option("--caption-rate", gen.spec.caption_rate)->capture_default_str();

  std::string resume;
  bool quiet = false;
  auto* train_cmd = app.add_subcommand("train", "train a model from a config file");
  train_cmd->add_option("--resume", resume, "checkpoint written by a previous run");
  train_cmd->add_flag("--quiet", quiet, "suppress per-epoch output");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "decode a dataset and score it");
  std::string id;
  std::size_t index = 0;
  auto* gen_answer_cmd = app.add_subcommand("generate", "answer a single example");
  for (auto* cmd : {eval_cmd, gen_answer_cmd}) {
    cmd->add_option("--checkpoint", ev.checkpoint, "model checkpoint")->required();
    cmd->add_option("--data", ev.data, "JSON-lines dataset")->required();
    cmd->add_option("--vocab", ev.vocab, "vocabulary file to check against the checkpoint");
    cmd->add_option("--beam", ev.decode.beam, "beam size")->capture_default_str();
    cmd->add_option("--max-len", ev.decode.max_len, "maximum answer length")->capture_default_str();
    cmd->add_option("--alpha", ev.decode.length_alpha, "length-normalisation exponent")
        ->capture_default_str();
  }
  gen_answer_cmd->add_option("--id", id, "example id");
  gen_answer_cmd->add_option("--index", index, "example index when no id is given");

  std::vector<std::uint64_t> seeds;
  std::size_t classes = 0;
  auto* ablate_cmd = app.add_subcommand("ablate", "train and compare the WEAN and linear arms");
  ablate_cmd->add_option("--seeds", seeds, "seeds, one run per arm each")->delimiter(',');
  ablate_cmd->add_option("--attributes", classes, "attribute classes (default: inferred)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen_cmd) cmd_gen_data(g, gen);
    else if (*train_cmd) cmd_train(g, resume, quiet);
    else if (*eval_cmd) cmd_eval(g, ev);
    else if (*gen_answer_cmd) cmd_generate(ev, id, index);
    else if (*ablate_cmd) cmd_ablate(g, seeds, classes);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return 0;
}
