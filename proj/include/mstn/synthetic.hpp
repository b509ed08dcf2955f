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
#include <string>
#include <vector>

#include "mstn/dataset.hpp"

namespace mstn {

enum class SignalModality { video, audio };

// A toy audio-visual dialog task: "what color is the <object> ?" answered by
// "the <object> is <color> in color", where the color is only recoverable
// from a pattern planted in one feature stream.
struct SyntheticTaskSpec {
  std::size_t attributes = 8;  // K; at most attribute_capacity()
  std::size_t objects = 6;
  std::size_t video_dim = 16;
  std::size_t audio_dim = 16;
  std::size_t video_frames = 8;
  std::size_t audio_frames = 8;
  std::size_t window = 4;  // frames carrying the attribute pattern
  double noise = 0.1;      // Gaussian sigma on every feature
  double skew = 0.0;       // rho: probability of forcing the majority attribute
  SignalModality signal = SignalModality::video;
  std::size_t history_turns = 2;
  double caption_rate = 0.5;  // fraction of captions that mention the object
  std::uint64_t pattern_seed = 0;  // fixes the attribute codes; share it across splits

  static std::size_t attribute_capacity();
  static std::size_t object_capacity();
  // Throws ConfigError on an unusable spec.
  void validate() const;
};

const std::vector<std::string>& attribute_words();
const std::vector<std::string>& object_words();

struct ProbeReport {
  double accuracy = 0.0;
  std::size_t examples = 0;
  std::size_t iterations = 0;
};

struct SyntheticDataset {
  std::vector<DialogExample> examples;
  std::vector<std::size_t> attribute_index;  // per example, in [0, K)
  ProbeReport probe;
};

// Softmax-regression probe over mean-pooled frames; returns training accuracy.
ProbeReport linear_probe(std::span<const FeatureMatrix* const> features,
                         std::span<const std::size_t> labels, std::size_t classes,
                         std::size_t iterations = 300);

// Deterministic in (spec, count, seed); `seed` drives the examples and
// spec.pattern_seed the attribute codes. Feature paths are "features/<id>.video"
// and "features/<id>.audio" with ids "<prefix><index>". Throws DataError if
// the probe cannot recover the attribute with > 95% accuracy.
SyntheticDataset generate_synthetic(const SyntheticTaskSpec& spec, std::size_t count,
                                    std::uint64_t seed, const std::string& id_prefix = "ex");

}  // namespace mstn
