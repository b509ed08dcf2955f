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

#include "mstn/batch.hpp"

#include <algorithm>

#include "mstn/error.hpp"

namespace mstn {

namespace {

PaddedIds pad_ids(const std::vector<std::vector<std::int64_t>>& rows) {
  PaddedIds out;
  out.batch = rows.size();
  for (const auto& r : rows) out.width = std::max(out.width, r.size());
  out.width = std::max<std::size_t>(out.width, 1);
  out.ids.assign(out.batch * out.width, kPadId);
  out.mask.assign(out.batch * out.width, 0);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    for (std::size_t t = 0; t < rows[b].size(); ++t) {
      out.ids[b * out.width + t] = rows[b][t];
      out.mask[b * out.width + t] = 1;
    }
  }
  return out;
}

PaddedFeatures pad_features(std::span<const FeatureMatrix* const> mats, std::size_t max_len) {
  PaddedFeatures out;
  out.batch = mats.size();
  out.dim = mats.front()->cols;
  for (const auto* m : mats) {
    if (m->cols != out.dim) {
      throw DataError("feature dimension " + std::to_string(m->cols) + " differs from " +
                      std::to_string(out.dim) + " within one batch");
    }
    out.length = std::max(out.length, std::min(m->rows, max_len));
  }
  out.length = std::max<std::size_t>(out.length, 1);
  out.values.assign(out.batch * out.length * out.dim, 0.0);
  out.mask.assign(out.batch * out.length, 0);
  for (std::size_t b = 0; b < mats.size(); ++b) {
    const std::size_t rows = std::min(mats[b]->rows, max_len);
    std::copy_n(mats[b]->values.begin(), rows * out.dim,
                out.values.begin() + static_cast<std::ptrdiff_t>(b * out.length * out.dim));
    std::fill_n(out.mask.begin() + static_cast<std::ptrdiff_t>(b * out.length), rows, 1);
  }
  return out;
}

std::vector<std::int64_t> head(std::vector<std::int64_t> ids, std::size_t n) {
  if (ids.size() > n) ids.resize(n);
  return ids;
}

}  // namespace

std::vector<std::string> flatten_history(std::span<const DialogTurn> history) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (i) out.push_back("<sep>");
    out.insert(out.end(), history[i].question.begin(), history[i].question.end());
    out.insert(out.end(), history[i].answer.begin(), history[i].answer.end());
  }
  return out;
}

Batch make_batch(std::span<const DialogExample> examples, const Vocab& vocab,
                 const MaxLens& max_lens) {
  if (examples.empty()) throw ContractError("make_batch: empty batch");
  if (max_lens.answer < 1) throw ConfigError("answer length limit must be >= 1");

  std::vector<std::vector<std::int64_t>> question, caption, history, answer;
  std::vector<const FeatureMatrix*> video, audio;
  for (const auto& ex : examples) {
    question.push_back(head(vocab.encode(ex.question), max_lens.question));
    caption.push_back(head(vocab.encode(ex.caption), max_lens.caption));
    auto hist = vocab.encode(flatten_history(ex.history));
    if (hist.size() > max_lens.history) {
      hist.erase(hist.begin(), hist.end() - static_cast<std::ptrdiff_t>(max_lens.history));
    }
    history.push_back(std::move(hist));

    auto ans = head(vocab.encode(ex.answer), max_lens.answer - 1);
    ans.insert(ans.begin(), kSosId);
    ans.push_back(kEosId);
    answer.push_back(std::move(ans));

    if (ex.video.rows == 0 || ex.audio.rows == 0) {
      throw DataError("example " + ex.id + " has empty video or audio features");
    }
    video.push_back(&ex.video);
    audio.push_back(&ex.audio);
  }

  Batch batch;
  batch.question = pad_ids(question);
  batch.caption = pad_ids(caption);
  batch.history = pad_ids(history);
  batch.answer = pad_ids(answer);
  batch.video = pad_features(video, max_lens.video);
  batch.audio = pad_features(audio, max_lens.audio);
  return batch;
}

}  // namespace mstn
