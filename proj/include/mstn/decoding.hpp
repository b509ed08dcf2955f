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
#include <span>
#include <vector>

#include "mstn/model.hpp"

namespace mstn {

// Next-token distribution given the tokens generated so far (prefix starts
// with <sos>). Implementations must be pure functions of the prefix.
class StepScorer {
 public:
  virtual ~StepScorer() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual std::vector<double> next_log_probs(std::span<const std::int64_t> prefix) const = 0;
};

// Frozen MSTN conditioned on one example. Encodes the inputs once; pad, sos
// and unk are excluded (probability 0) from every step.
class MstnScorer : public StepScorer {
 public:
  MstnScorer(const MstnModel& model, const ExampleInputs& inputs);

  std::size_t vocab_size() const override { return model_.config().vocab_size; }
  std::vector<double> next_log_probs(std::span<const std::int64_t> prefix) const override;

 private:
  const MstnModel& model_;
  EncodedInputs encoded_;
};

struct Hypothesis {
  std::vector<std::int64_t> tokens;  // starts with <sos>; ends with <eos> when finished
  double log_prob = 0.0;
  double score = 0.0;  // length-normalised ranking score
  bool finished = false;

  // Generated tokens without <sos>/<eos>.
  std::vector<std::int64_t> output() const;
};

struct DecodeOptions {
  std::size_t beam = 5;
  std::size_t max_len = 30;  // generated tokens, <eos> included
  double length_alpha = 0.0;
  std::int64_t sos_id = 1;
  std::int64_t eos_id = 2;
};

// ((5 + len) / 6)^alpha
double length_penalty(std::size_t length, double alpha);

// Argmax at every step until <eos> or max_len. Ties go to the smaller id.
Hypothesis greedy_decode(const StepScorer& scorer, const DecodeOptions& options);

// Best-first hypotheses (at most `beam`). Ranking key: log P / length_penalty,
// ties broken by the lexicographically smaller token sequence. beam larger
// than the vocabulary is clamped.
std::vector<Hypothesis> beam_search(const StepScorer& scorer, const DecodeOptions& options);

}  // namespace mstn
