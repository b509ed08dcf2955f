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

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mstn/error.hpp"
#include "mstn/run.hpp"

namespace mstn {

namespace {

MstnConfig model_config_for(const RunConfig& run, const Vocab& vocab,
                            std::span<const DialogExample> train) {
  run.validate(false);
  if (train.empty()) throw DataError("training set is empty");
  MstnConfig c = run.model;
  c.vocab_size = vocab.size();
  c.video_dim = train.front().video.cols;
  c.audio_dim = train.front().audio.cols;
  c.validate();
  return c;
}

// Exclusive marker that one training process owns a run directory.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir) {
    if (dir.empty()) return;
    std::filesystem::create_directories(dir);
    path_ = dir / "train.lock";
    FILE* f = std::fopen(path_.c_str(), "wx");
    if (f == nullptr) {
      throw ConfigError("run directory " + dir.string() + " is locked by another training run (" +
                        path_.string() + ")");
    }
    std::fclose(f);
  }
  ~RunLock() {
    if (!path_.empty()) {
      std::error_code ec;
      std::filesystem::remove(path_, ec);
    }
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

std::string join_tokens(const Vocab& vocab) {
  std::string out;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    if (i) out += ' ';
    out += vocab.token(static_cast<std::int64_t>(i));
  }
  return out;
}

}  // namespace

Vocab build_vocab_from_examples(std::span<const DialogExample> examples, std::size_t min_count) {
  std::vector<std::vector<std::string>> corpus;
  for (const auto& ex : examples) {
    corpus.push_back(ex.question);
    corpus.push_back(ex.caption);
    corpus.push_back(ex.answer);
    for (const auto& turn : ex.history) {
      corpus.push_back(turn.question);
      corpus.push_back(turn.answer);
    }
  }
  return Vocab::build(corpus, min_count);
}

nlohmann::ordered_json to_json(const StepRecord& r) {
  return {{"kind", "step"}, {"step", r.step}, {"lr", r.lr}, {"loss", r.loss}};
}

nlohmann::ordered_json to_json(const EpochRecord& r) {
  return {{"kind", "epoch"},           {"epoch", r.epoch},
          {"train_loss", r.train_loss}, {"valid_loss", r.valid_loss},
          {"valid_bleu4", r.valid_bleu4}, {"wall_seconds", r.wall_seconds}};
}

Checkpoint make_checkpoint(const MstnModel& model, const Vocab& vocab, const RunConfig* config) {
  Checkpoint ckpt = checkpoint_from_model(model);
  ckpt.config.emplace_back("vocab", join_tokens(vocab));
  if (config != nullptr) {
    for (auto& [k, v] : config->to_pairs()) ckpt.config.emplace_back("run." + k, v);
  }
  return ckpt;
}

Vocab vocab_from_checkpoint(const Checkpoint& ckpt) {
  const std::string* line = ckpt.get("vocab");
  if (line == nullptr) throw DataError("checkpoint carries no vocabulary");
  std::vector<std::string> tokens;
  std::istringstream in(*line);
  for (std::string t; in >> t;) tokens.push_back(t);
  return Vocab::from_tokens(tokens, "stored in checkpoint");
}

Trainer::Trainer(RunConfig config, Vocab vocab, std::vector<DialogExample> train,
                 std::vector<DialogExample> valid)
    : config_(std::move(config)),
      vocab_(std::move(vocab)),
      train_(std::move(train)),
      valid_(std::move(valid)),
      model_(model_config_for(config_, vocab_, train_), config_.seed.value_or(0)),
      rng_(config_.seed.value_or(0) ^ 0x9e3779b97f4a7c15ULL) {
  if (!config_.seed) throw ConfigError("a seed is mandatory for training");
  adam_.config = config_.optim.adam;
  for (const auto* set : {&train_, &valid_}) {
    for (const auto& ex : *set) {
      if (ex.video.cols != model_.config().video_dim || ex.audio.cols != model_.config().audio_dim) {
        throw DataError("example " + ex.id + " has feature dimensions " +
                        std::to_string(ex.video.cols) + "/" + std::to_string(ex.audio.cols) +
                        ", expected " + std::to_string(model_.config().video_dim) + "/" +
                        std::to_string(model_.config().audio_dim));
      }
    }
  }
}

double Trainer::train_step(const Batch& batch, std::size_t batch_id) {
  auto& params = model_.parameters();
  params.zero_grad();
  GradTape tape;
  ForwardResult result;
  {
    TapeScope scope(tape);
    result = model_.forward_teacher_forced(batch, Mode{true, &rng_});
  }
  const double loss = result.loss.item();
  if (!std::isfinite(loss)) {
    throw NumericError("non-finite loss at step " + std::to_string(adam_.step + 1) + ", batch " +
                       std::to_string(batch_id));
  }
  tape.backward(result.loss);
  const double lr = config_.optim.lr_scale *
                    noam_lr(adam_.step + 1, model_.config().d_model, config_.optim.warmup_steps);
  try {
    adam_step(params.tensors(), adam_, lr);
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " at step " + std::to_string(adam_.step + 1) +
                       ", batch " + std::to_string(batch_id));
  }
  if (on_event) on_event(to_json(StepRecord{adam_.step, lr, loss}));
  return loss;
}

double Trainer::evaluate_loss(std::span<const DialogExample> examples) const {
  if (examples.empty()) return 0.0;
  double total = 0.0;
  std::size_t tokens = 0;
  const std::size_t bs = config_.batch_size;
  for (std::size_t start = 0; start < examples.size(); start += bs) {
    const auto chunk = examples.subspan(start, std::min(bs, examples.size() - start));
    const Batch batch = make_batch(chunk, vocab_, config_.max_lens);
    const auto r = model_.forward_teacher_forced(batch, Mode{false, nullptr});
    total += r.loss.item() * static_cast<double>(r.target_tokens);
    tokens += r.target_tokens;
  }
  return total / static_cast<double>(tokens);
}

void Trainer::save_state(const std::filesystem::path& path) const {
  Checkpoint ckpt = make_checkpoint(model_, vocab_, &config_);
  ckpt.config.emplace_back("train.completed_epochs", std::to_string(completed_epochs_));
  ckpt.config.emplace_back("train.rng", rng_.state());
  ckpt.config.emplace_back("adam.step", std::to_string(adam_.step));
  const auto& params = model_.parameters();
  if (!adam_.m.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto& shape = params.tensors()[i].shape();
      ckpt.tensors.emplace_back("adam.m/" + params.names()[i], Tensor::from(shape, adam_.m[i]));
      ckpt.tensors.emplace_back("adam.v/" + params.names()[i], Tensor::from(shape, adam_.v[i]));
    }
  }
  ckpt.save(path);
}

void Trainer::resume(const std::filesystem::path& path) {
  const Checkpoint ckpt = Checkpoint::load(path);
  MstnModel restored = model_from_checkpoint(ckpt);
  if (restored.config().to_pairs() != model_.config().to_pairs()) {
    throw DataError("checkpoint " + path.string() + " was trained with a different model config");
  }
  if (!(vocab_from_checkpoint(ckpt) == vocab_)) {
    throw DataError("checkpoint vocabulary (" + std::to_string(vocab_from_checkpoint(ckpt).size()) +
                    " tokens) differs from the data vocabulary (" + std::to_string(vocab_.size()) +
                    " tokens)");
  }
  auto& params = model_.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto src = restored.parameters().tensors()[i].data();
    std::copy(src.begin(), src.end(), params.tensors()[i].data().begin());
  }
  auto need = [&](const char* key) -> const std::string& {
    const std::string* v = ckpt.get(key);
    if (v == nullptr) throw DataError(std::string("checkpoint lacks training state '") + key + "'");
    return *v;
  };
  completed_epochs_ = std::stoull(need("train.completed_epochs"));
  rng_.set_state(need("train.rng"));
  adam_ = AdamState{};
  adam_.config = config_.optim.adam;
  adam_.step = std::stoll(need("adam.step"));
  if (adam_.step > 0) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Tensor* m = ckpt.tensor("adam.m/" + params.names()[i]);
      const Tensor* v = ckpt.tensor("adam.v/" + params.names()[i]);
      if (m == nullptr || v == nullptr) {
        throw DataError("checkpoint lacks optimizer moments for " + params.names()[i]);
      }
      adam_.m.push_back(m->values());
      adam_.v.push_back(v->values());
    }
  }
}

TrainLog Trainer::run() {
  RunLock lock(config_.run_dir);
  std::ofstream log_file;
  if (!config_.run_dir.empty()) {
    vocab_.save(config_.run_dir / "vocab.txt");
    log_file.open(config_.run_dir / "train_log.jsonl",
                  completed_epochs_ > 0 ? std::ios::app : std::ios::trunc);
    if (!log_file) throw DataError("cannot write training log in " + config_.run_dir.string());
  }
  auto emit = [&](const nlohmann::ordered_json& j) {
    if (log_file.is_open()) log_file << j.dump() << '\n';
  };
  auto user_event = on_event;
  struct Restore {
    std::function<void(const nlohmann::ordered_json&)>& slot;
    std::function<void(const nlohmann::ordered_json&)> saved;
    ~Restore() { slot = std::move(saved); }
  } restore{on_event, user_event};
  on_event = [&](const nlohmann::ordered_json& j) {
    emit(j);
    if (user_event) user_event(j);
  };

  TrainLog log;
  log.initial_valid_loss = evaluate_loss(valid_);
  log.best_valid_loss = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t bs = config_.batch_size;
  bool stop = false;
  for (std::size_t epoch = completed_epochs_ + 1; epoch <= config_.epochs && !stop; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), 0);
    rng_.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      std::vector<DialogExample> chunk;
      for (std::size_t k = start; k < std::min(start + bs, order.size()); ++k) {
        chunk.push_back(train_[order[k]]);
      }
      const Batch batch = make_batch(chunk, vocab_, config_.max_lens);
      const double loss = train_step(batch, start / bs);
      log.steps.push_back({adam_.step, config_.optim.lr_scale *
                                           noam_lr(adam_.step, model_.config().d_model,
                                                   config_.optim.warmup_steps),
                           loss});
      loss_sum += loss;
      ++batches;
      if (config_.max_steps > 0 && static_cast<std::size_t>(adam_.step) >= config_.max_steps) {
        stop = true;
        break;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(std::max<std::size_t>(batches, 1));
    rec.valid_loss = evaluate_loss(valid_);
    if (!valid_.empty()) {
      DecodeConfig greedy = config_.decode;
      greedy.beam = 1;
      const std::size_t limit = std::min<std::size_t>(valid_.size(), 64);
      rec.valid_bleu4 =
          evaluate_model(model_, vocab_, std::span(valid_).first(limit), greedy, config_.max_lens).bleu4;
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    completed_epochs_ = epoch;
    log.epochs.push_back(rec);
    on_event(to_json(rec));

    if (!config_.run_dir.empty()) {
      save_state(config_.run_dir / "last.ckpt");
      if (rec.valid_loss < log.best_valid_loss) save_state(config_.run_dir / "best.ckpt");
    }
    if (rec.valid_loss < log.best_valid_loss) {
      log.best_valid_loss = rec.valid_loss;
      log.best_epoch = epoch;
    }
  }

  nlohmann::ordered_json summary = {{"kind", "summary"},
                                    {"steps", adam_.step},
                                    {"epochs", completed_epochs_},
                                    {"initial_valid_loss", log.initial_valid_loss},
                                    {"best_valid_loss", log.best_valid_loss},
                                    {"best_epoch", log.best_epoch}};
  on_event(summary);
  return log;
}

}  // namespace mstn
