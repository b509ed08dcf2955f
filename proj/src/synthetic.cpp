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

#include "mstn/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "mstn/error.hpp"
#include "mstn/rng.hpp"
#include "mstn/vocab.hpp"

namespace mstn {

const std::vector<std::string>& attribute_words() {
  static const std::vector<std::string> words = {"red",   "blue",   "green",  "yellow",
                                                 "white", "black",  "brown",  "purple",
                                                 "orange", "pink",  "gray",   "silver"};
  return words;
}

const std::vector<std::string>& object_words() {
  static const std::vector<std::string> words = {"door", "car",  "chair", "cup",
                                                 "shirt", "ball", "lamp", "table"};
  return words;
}

std::size_t SyntheticTaskSpec::attribute_capacity() { return attribute_words().size(); }
std::size_t SyntheticTaskSpec::object_capacity() { return object_words().size(); }

void SyntheticTaskSpec::validate() const {
  if (attributes < 1 || attributes > attribute_capacity()) {
    throw ConfigError("attribute count " + std::to_string(attributes) +
                      " exceeds template capacity " + std::to_string(attribute_capacity()));
  }
  if (objects < 1 || objects > object_capacity()) {
    throw ConfigError("object count " + std::to_string(objects) + " exceeds template capacity " +
                      std::to_string(object_capacity()));
  }
  if (video_dim == 0 || audio_dim == 0 || video_frames == 0 || audio_frames == 0) {
    throw ConfigError("feature dimensions and frame counts must be positive");
  }
  const std::size_t frames = signal == SignalModality::video ? video_frames : audio_frames;
  if (window < 1 || window > frames) {
    throw ConfigError("attribute window " + std::to_string(window) + " does not fit in " +
                      std::to_string(frames) + " frames");
  }
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("noise must be finite and >= 0");
  if (!(skew >= 0.0 && skew <= 1.0)) throw ConfigError("skew must lie in [0, 1]");
  if (!(caption_rate >= 0.0 && caption_rate <= 1.0)) {
    throw ConfigError("caption rate must lie in [0, 1]");
  }
}

ProbeReport linear_probe(std::span<const FeatureMatrix* const> features,
                         std::span<const std::size_t> labels, std::size_t classes,
                         std::size_t iterations) {
  if (features.size() != labels.size() || features.empty()) {
    throw ContractError("linear_probe: need one label per feature matrix");
  }
  const std::size_t n = features.size();
  const std::size_t dim = features[0]->cols;
  std::vector<double> x(n * dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& f = *features[i];
    for (std::size_t r = 0; r < f.rows; ++r) {
      for (std::size_t c = 0; c < dim; ++c) x[i * dim + c] += f.values[r * dim + c];
    }
    for (std::size_t c = 0; c < dim; ++c) x[i * dim + c] /= static_cast<double>(f.rows);
  }

  std::vector<double> w(dim * classes, 0.0), b(classes, 0.0);
  std::vector<double> gw(w.size()), gb(classes), p(classes);
  const double lr = 1.0;
  auto scores = [&](std::size_t i) {
    for (std::size_t k = 0; k < classes; ++k) {
      double s = b[k];
      for (std::size_t c = 0; c < dim; ++c) s += x[i * dim + c] * w[c * classes + k];
      p[k] = s;
    }
  };
  for (std::size_t it = 0; it < iterations; ++it) {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      scores(i);
      const double mx = *std::max_element(p.begin(), p.end());
      double z = 0.0;
      for (auto& v : p) z += (v = std::exp(v - mx));
      for (std::size_t k = 0; k < classes; ++k) {
        const double g = p[k] / z - (labels[i] == k ? 1.0 : 0.0);
        gb[k] += g;
        for (std::size_t c = 0; c < dim; ++c) gw[c * classes + k] += g * x[i * dim + c];
      }
    }
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * gw[k] / static_cast<double>(n);
    for (std::size_t k = 0; k < classes; ++k) b[k] -= lr * gb[k] / static_cast<double>(n);
  }

  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    scores(i);
    const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    correct += best == labels[i];
  }
  return {static_cast<double>(correct) / static_cast<double>(n), n, iterations};
}

SyntheticDataset generate_synthetic(const SyntheticTaskSpec& spec, std::size_t count,
                                    std::uint64_t seed, const std::string& id_prefix) {
  spec.validate();
  if (count < 1) throw ConfigError("synthetic dataset needs count >= 1");
  Rng rng(seed);
  const auto& colors = attribute_words();
  const auto& objects = object_words();
  const bool in_video = spec.signal == SignalModality::video;
  const std::size_t signal_dim = in_video ? spec.video_dim : spec.audio_dim;
  const std::size_t signal_frames = in_video ? spec.video_frames : spec.audio_frames;

  // One +-1 pattern per attribute. It depends only on the task seed so that
  // every split of one task shares the same attribute code.
  Rng pattern_rng(spec.pattern_seed);
  std::vector<std::vector<double>> patterns(spec.attributes, std::vector<double>(signal_dim));
  for (auto& pat : patterns) {
    for (auto& v : pat) v = pattern_rng.uniform() < 0.5 ? -1.0 : 1.0;
  }

  SyntheticDataset out;
  out.examples.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t attr =
        rng.uniform() < spec.skew ? 0 : static_cast<std::size_t>(rng.below(spec.attributes));
    const auto& obj = objects[rng.below(spec.objects)];

    DialogExample ex;
    ex.id = id_prefix + std::to_string(i);
    ex.attribute = colors[attr];
    ex.question = tokenize("what color is the " + obj + " ?");
    ex.answer = tokenize("the " + obj + " is " + colors[attr] + " in color");
    if (rng.uniform() < spec.caption_rate) {
      ex.caption = tokenize("a person walks past the " + obj + " in a room");
    } else {
      ex.caption = tokenize("a person is in a room");
    }
    for (std::size_t t = 0; t < spec.history_turns; ++t) {
      const auto& other = objects[rng.below(objects.size())];
      if (rng.uniform() < 0.5) {
        ex.history.push_back({tokenize("is there a " + other + " ?"),
                              tokenize("yes , there is a " + other)});
      } else {
        ex.history.push_back({tokenize("is the person talking ?"),
                              tokenize("no , the person is quiet")});
      }
    }

    auto noise_matrix = [&](std::size_t rows, std::size_t cols) {
      FeatureMatrix f{rows, cols, std::vector<double>(rows * cols)};
      for (auto& v : f.values) v = rng.normal(0.0, spec.noise);
      return f;
    };
    ex.video = noise_matrix(spec.video_frames, spec.video_dim);
    ex.audio = noise_matrix(spec.audio_frames, spec.audio_dim);
    FeatureMatrix& carrier = in_video ? ex.video : ex.audio;
    const std::size_t start = rng.below(signal_frames - spec.window + 1);
    for (std::size_t r = start; r < start + spec.window; ++r) {
      for (std::size_t c = 0; c < signal_dim; ++c) carrier.values[r * signal_dim + c] += patterns[attr][c];
    }
    quantize_to_f32(ex.video);
    quantize_to_f32(ex.audio);
    ex.video_path = "features/" + ex.id + ".video";
    ex.audio_path = "features/" + ex.id + ".audio";

    out.attribute_index.push_back(attr);
    out.examples.push_back(std::move(ex));
  }

  std::vector<const FeatureMatrix*> carriers;
  carriers.reserve(count);
  for (const auto& ex : out.examples) carriers.push_back(in_video ? &ex.video : &ex.audio);
  out.probe = linear_probe(carriers, out.attribute_index, spec.attributes);
  if (!(out.probe.accuracy > 0.95)) {
    throw DataError("generated features fail the decodability check: linear probe accuracy " +
                    std::to_string(out.probe.accuracy) + " <= 0.95");
  }
  return out;
}

}  // namespace mstn
