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

#include "mstn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

#include "mstn/error.hpp"

namespace mstn {

namespace {

using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts count_ngrams(const Tokens& tokens, std::size_t n) {
  NgramCounts counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

void BleuStats::add(const Tokens& hypothesis, std::span<const Tokens> references) {
  if (references.empty()) throw ContractError("BLEU needs at least one reference per hypothesis");
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto hyp = count_ngrams(hypothesis, n);
    NgramCounts max_ref;
    for (const auto& ref : references) {
      for (const auto& [gram, c] : count_ngrams(ref, n)) {
        auto& slot = max_ref[gram];
        slot = std::max(slot, c);
      }
    }
    for (const auto& [gram, c] : hyp) {
      auto it = max_ref.find(gram);
      if (it != max_ref.end()) matches[n - 1] += std::min(c, it->second);
      totals[n - 1] += c;
    }
  }
  hyp_length += hypothesis.size();
  std::size_t shortest = references[0].size();
  for (const auto& ref : references) shortest = std::min(shortest, ref.size());
  ref_length += shortest;
}

BleuResult bleu_from_stats(const BleuStats& stats) {
  BleuResult r;
  if (stats.hyp_length == 0 || stats.matches[0] == 0) return r;
  r.brevity_penalty =
      stats.hyp_length > stats.ref_length
          ? 1.0
          : std::exp(1.0 - static_cast<double>(stats.ref_length) / static_cast<double>(stats.hyp_length));

  bool any_zero = false;
  for (std::size_t n = 0; n < 4; ++n) any_zero = any_zero || stats.matches[n] == 0;

  double log_raw = 0.0;
  double log_smoothed = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    const double m = static_cast<double>(stats.matches[n]);
    const double t = static_cast<double>(stats.totals[n]);
    const double p = (any_zero && n >= 1) ? (m + 1.0) / (t + 1.0) : m / t;
    r.precisions[n] = p;
    log_smoothed += std::log(p) / 4.0;
    log_raw = stats.matches[n] == 0 ? -INFINITY : log_raw + std::log(m / t) / 4.0;
  }
  r.smoothed = r.brevity_penalty * std::exp(log_smoothed);
  r.raw = any_zero ? 0.0 : r.brevity_penalty * std::exp(log_raw);
  return r;
}

BleuResult bleu4(std::span<const Tokens> hypotheses, std::span<const std::vector<Tokens>> references) {
  if (hypotheses.size() != references.size()) {
    throw ContractError("BLEU: " + std::to_string(hypotheses.size()) + " hypotheses but " +
                        std::to_string(references.size()) + " reference sets");
  }
  BleuStats stats;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) stats.add(hypotheses[i], references[i]);
  return bleu_from_stats(stats);
}

std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const Tokens& hypothesis, std::span<const Tokens> references) {
  if (references.empty()) throw ContractError("ROUGE-L needs at least one reference");
  double best = 0.0;
  for (const auto& ref : references) {
    if (hypothesis.empty() || ref.empty()) continue;
    const double lcs = static_cast<double>(lcs_length(hypothesis, ref));
    if (lcs == 0.0) continue;
    const double p = lcs / static_cast<double>(hypothesis.size());
    const double r = lcs / static_cast<double>(ref.size());
    const double f = (1.0 + kRougeBetaSquared) * p * r / (r + kRougeBetaSquared * p);
    best = std::max(best, f);
  }
  return best;
}

double rouge_l_corpus(std::span<const Tokens> hypotheses,
                      std::span<const std::vector<Tokens>> references) {
  if (hypotheses.size() != references.size()) {
    throw ContractError("ROUGE-L: hypothesis and reference counts differ");
  }
  if (hypotheses.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) total += rouge_l(hypotheses[i], references[i]);
  return total / static_cast<double>(hypotheses.size());
}

}  // namespace mstn
