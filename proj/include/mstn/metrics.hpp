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

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mstn {

using Tokens = std::vector<std::string>;

// Pooled n-gram statistics for corpus BLEU-4.
struct BleuStats {
  std::array<std::size_t, 4> matches{};  // clipped n-gram matches
  std::array<std::size_t, 4> totals{};   // hypothesis n-grams
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;  // shortest reference per sentence

  void add(const Tokens& hypothesis, std::span<const Tokens> references);
};

struct BleuResult {
  double smoothed = 0.0;  // the reported BLEU-4
  double raw = 0.0;       // no smoothing
  double brevity_penalty = 0.0;
  std::array<double, 4> precisions{};  // smoothed precisions actually used
};

// Geometric mean of clipped precisions with brevity penalty. When any n-gram
// order has zero matches, orders 2..4 use (m + 1) / (t + 1); order 1 is never
// smoothed. An empty corpus hypothesis scores 0.
BleuResult bleu_from_stats(const BleuStats& stats);

// Corpus-level BLEU-4. Throws ContractError if the sizes differ or an example
// has no reference.
BleuResult bleu4(std::span<const Tokens> hypotheses, std::span<const std::vector<Tokens>> references);

std::size_t lcs_length(const Tokens& a, const Tokens& b);

inline constexpr double kRougeBetaSquared = 1.2;

// LCS F-measure (1 + b2) P R / (R + b2 P), best over references.
double rouge_l(const Tokens& hypothesis, std::span<const Tokens> references);

// Mean sentence ROUGE-L over the corpus.
double rouge_l_corpus(std::span<const Tokens> hypotheses,
                      std::span<const std::vector<Tokens>> references);

}  // namespace mstn
