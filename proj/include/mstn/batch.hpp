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

#include "mstn/dataset.hpp"
#include "mstn/vocab.hpp"

namespace mstn {

// Per-field length limits. `answer` counts decoder targets, so an answer
// keeps at most answer - 1 tokens followed by eos.
struct MaxLens {
  std::size_t question = 32;
  std::size_t caption = 32;
  std::size_t history = 96;  // most recent tokens are kept
  std::size_t video = 64;
  std::size_t audio = 64;
  std::size_t answer = 30;
};

// [batch, width] ids; mask marks real positions. width >= 1 even when every
// row is empty, in which case the mask row is all zero.
struct PaddedIds {
  std::size_t batch = 0;
  std::size_t width = 0;
  std::vector<std::int64_t> ids;
  std::vector<std::uint8_t> mask;

  std::span<const std::int64_t> row(std::size_t b) const { return {ids.data() + b * width, width}; }
  std::span<const std::uint8_t> row_mask(std::size_t b) const {
    return {mask.data() + b * width, width};
  }
};

// [batch, length, dim] features with a [batch, length] mask.
struct PaddedFeatures {
  std::size_t batch = 0;
  std::size_t length = 0;
  std::size_t dim = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;

  std::span<const double> row(std::size_t b) const {
    return {values.data() + b * length * dim, length * dim};
  }
  std::span<const std::uint8_t> row_mask(std::size_t b) const {
    return {mask.data() + b * length, length};
  }
};

struct Batch {
  PaddedIds question;
  PaddedIds caption;
  PaddedIds history;  // turns joined as q a <sep> q a ...
  PaddedFeatures video;
  PaddedFeatures audio;
  PaddedIds answer;  // <sos> tokens... <eos>

  std::size_t size() const { return question.batch; }
};

// History turns flattened into one token sequence with <sep> between turns.
std::vector<std::string> flatten_history(std::span<const DialogTurn> history);

Batch make_batch(std::span<const DialogExample> examples, const Vocab& vocab,
                 const MaxLens& max_lens = {});

}  // namespace mstn
