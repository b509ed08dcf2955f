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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mstn/batch.hpp"
#include "mstn/checkpoint.hpp"
#include "mstn/dataset.hpp"
#include "mstn/decoding.hpp"
#include "mstn/metrics.hpp"
#include "mstn/model.hpp"
#include "mstn/optim.hpp"
#include "mstn/vocab.hpp"

namespace mstn {

struct OptimConfig {
  double lr_scale = 1.0;  // multiplies the Noam schedule
  std::int64_t warmup_steps = 4000;
  AdamConfig adam;
};

struct DecodeConfig {
  std::size_t beam = 5;
  std::size_t max_len = 30;
  double length_alpha = 0.0;
};

struct RunConfig {
  std::string preset = "full";
  MstnConfig model;
  OptimConfig optim;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::size_t max_steps = 0;  // 0 = no cap
  std::size_t min_count = 1;
  std::optional<std::uint64_t> seed;
  std::filesystem::path train_data;
  std::filesystem::path valid_data;
  std::filesystem::path test_data;
  std::filesystem::path run_dir;
  DecodeConfig decode;
  MaxLens max_lens;

  // Throws ConfigError. With `require_data`, the train/valid files must exist
  // and the seed must be set.
  void validate(bool require_data) const;

  // Canonical "section.key=value" lines; the basis of config hashes.
  std::vector<std::pair<std::string, std::string>> to_pairs() const;
};

// Named hyperparameter sets: "full" (512 dims, 8 heads, 1 decoder layer,
// dropout 0.2, 20 epochs, beam 5, max length 30), "toy" (32 dims, 4 heads,
// d_ff 64) and "tiny" (8 dims, 2 heads, d_ff 16).
RunConfig preset_config(const std::string& name);

// INI-style text: optional top-level "preset = name", then [model], [optim],
// [train], [data], [decode] and [limits] sections. Unknown sections or keys
// are errors. Relative data paths resolve against `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// FNV-1a over the canonical config lines, optionally skipping output_layer.
std::string config_hash(const RunConfig& config, bool ignore_output_layer);

// Rejects ablation arms that differ in anything but the output layer.
void validate_arms(const RunConfig& wean_arm, const RunConfig& linear_arm);

Vocab build_vocab_from_examples(std::span<const DialogExample> examples, std::size_t min_count);

// ----------------------------------------------------------------- training

struct StepRecord {
  std::int64_t step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double valid_bleu4 = 0.0;
  double wall_seconds = 0.0;
};

struct TrainLog {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  double initial_valid_loss = 0.0;
  double best_valid_loss = 0.0;
  std::size_t best_epoch = 0;
};

nlohmann::ordered_json to_json(const StepRecord& r);
nlohmann::ordered_json to_json(const EpochRecord& r);

class Trainer {
 public:
  // Builds a fresh model whose vocabulary size and feature dimensions come
  // from `vocab` and the training data. Throws ConfigError/DataError during
  // pre-flight, before any training compute.
  Trainer(RunConfig config, Vocab vocab, std::vector<DialogExample> train,
          std::vector<DialogExample> valid);

  // Restores model weights, optimizer moments, RNG and epoch counter from a
  // checkpoint written by save_state().
  void resume(const std::filesystem::path& checkpoint);

  // Trains until `epochs` (or `max_steps`) is reached. When run_dir is set it
  // writes best.ckpt, last.ckpt (each epoch), train_log.jsonl and vocab.txt.
  TrainLog run();

  // One optimizer update on `batch`; returns the pre-update loss. Throws
  // NumericError on a non-finite loss.
  double train_step(const Batch& batch, std::size_t batch_id);

  double evaluate_loss(std::span<const DialogExample> examples) const;

  void save_state(const std::filesystem::path& path) const;

  const MstnModel& model() const { return model_; }
  MstnModel& model() { return model_; }
  const Vocab& vocab() const { return vocab_; }
  const RunConfig& config() const { return config_; }
  std::int64_t step() const { return adam_.step; }

  std::function<void(const nlohmann::ordered_json&)> on_event;

 private:
  RunConfig config_;
  Vocab vocab_;
  std::vector<DialogExample> train_;
  std::vector<DialogExample> valid_;
  MstnModel model_;
  AdamState adam_;
  Rng rng_;
  std::size_t completed_epochs_ = 0;
};

// Checkpoint with model, vocabulary and a record of the run config.
Checkpoint make_checkpoint(const MstnModel& model, const Vocab& vocab, const RunConfig* config);
Vocab vocab_from_checkpoint(const Checkpoint& ckpt);

// --------------------------------------------------------------- evaluation

struct EvalRecord {
  std::string id;
  std::string hypothesis;
  std::vector<std::string> references;
  double bleu4 = 0.0;  // sentence-level, smoothed
  double rouge_l = 0.0;
  std::optional<bool> attribute_hit;
};

struct EvalReport {
  double bleu4 = 0.0;
  double bleu4_raw = 0.0;
  double rouge_l = 0.0;
  std::optional<double> attribute_accuracy;
  std::size_t examples = 0;
  std::size_t attribute_examples = 0;
  std::vector<EvalRecord> records;
};

// Scores already-decoded hypotheses. `attributes` may be empty or hold one
// (possibly empty) attribute token per example.
EvalReport evaluate_hypotheses(std::span<const Tokens> hypotheses,
                               std::span<const std::vector<Tokens>> references,
                               std::span<const std::string> ids,
                               std::span<const std::string> attributes);

// Beam-search decodes every example and scores it against its gold answer.
EvalReport evaluate_model(const MstnModel& model, const Vocab& vocab,
                          std::span<const DialogExample> examples, const DecodeConfig& decode,
                          const MaxLens& max_lens = {});

std::vector<std::string> generate_answer(const MstnModel& model, const Vocab& vocab,
                                         const DialogExample& example, const DecodeConfig& decode,
                                         const MaxLens& max_lens = {});

nlohmann::ordered_json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);
void write_hypotheses_tsv(const std::filesystem::path& path, const EvalReport& report);

// ---------------------------------------------------------------- ablation

struct ArmResult {
  OutputLayer output_layer = OutputLayer::wean;
  std::uint64_t seed = 0;
  std::string config_hash;       // output_layer excluded
  std::string full_config_hash;  // everything included
  double final_train_loss = 0.0;
  double best_valid_loss = 0.0;
  EvalReport report;
};

struct AblationReport {
  std::vector<ArmResult> arms;  // wean, linear per seed
  double chance_accuracy = 0.0;
};

struct ArmSummary {
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
};

ArmSummary summarize(std::span<const double> values);

// Trains and evaluates both arms for every seed on identical data.
AblationReport run_ablation(const RunConfig& base, const Vocab& vocab,
                            std::span<const DialogExample> train,
                            std::span<const DialogExample> valid,
                            std::span<const DialogExample> test,
                            std::span<const std::uint64_t> seeds,
                            std::size_t attribute_classes,
                            const std::function<void(const std::string&)>& progress = {});

nlohmann::ordered_json to_json(const AblationReport& report);

}  // namespace mstn
