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

#include "mstn/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mstn/error.hpp"
#include "mstn/vocab.hpp"

namespace mstn {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Higher score first, then the lexicographically smaller sequence.
bool ranks_before(double score_a, const std::vector<std::int64_t>& a, double score_b,
                  const std::vector<std::int64_t>& b) {
  if (score_a != score_b) return score_a > score_b;
  return a < b;
}

// Number of distinct sequences a search could ever hold at once; a larger
// beam cannot change the result.
std::size_t beam_ceiling(std::size_t vocab, std::size_t max_len) {
  std::size_t total = 1;
  for (std::size_t i = 0; i < max_len; ++i) {
    if (total > std::numeric_limits<std::size_t>::max() / std::max<std::size_t>(vocab, 1)) {
      return std::numeric_limits<std::size_t>::max();
    }
    total *= vocab;
  }
  return total;
}

}  // namespace

MstnScorer::MstnScorer(const MstnModel& model, const ExampleInputs& inputs)
    : model_(model), encoded_(model.encode(inputs, Mode{false, nullptr})) {}

std::vector<double> MstnScorer::next_log_probs(std::span<const std::int64_t> prefix) const {
  const Tensor lg = model_.logits(encoded_, prefix, Mode{false, nullptr});
  const std::size_t n = vocab_size();
  auto row = lg.data().subspan((prefix.size() - 1) * n, n);
  std::vector<double> out(row.begin(), row.end());
  for (auto banned : {kPadId, kSosId, kUnkId}) {
    if (static_cast<std::size_t>(banned) < n) out[static_cast<std::size_t>(banned)] = kNegInf;
  }
  double mx = kNegInf;
  for (double v : out) mx = std::max(mx, v);
  double z = 0.0;
  for (double v : out) z += std::exp(v - mx);
  const double lse = mx + std::log(z);
  for (auto& v : out) v -= lse;
  return out;
}

std::vector<std::int64_t> Hypothesis::output() const {
  std::vector<std::int64_t> out;
  for (std::size_t i = 1; i < tokens.size(); ++i) {
    if (finished && i + 1 == tokens.size()) break;
    out.push_back(tokens[i]);
  }
  return out;
}

double length_penalty(std::size_t length, double alpha) {
  if (alpha == 0.0) return 1.0;
  return std::pow((5.0 + static_cast<double>(length)) / 6.0, alpha);
}

Hypothesis greedy_decode(const StepScorer& scorer, const DecodeOptions& options) {
  if (options.max_len < 1) throw ContractError("max_len must be >= 1");
  Hypothesis h;
  h.tokens.push_back(options.sos_id);
  for (std::size_t step = 0; step < options.max_len; ++step) {
    const auto lp = scorer.next_log_probs(h.tokens);
    std::size_t best = 0;
    for (std::size_t k = 1; k < lp.size(); ++k) {
      if (lp[k] > lp[best]) best = k;
    }
    h.tokens.push_back(static_cast<std::int64_t>(best));
    h.log_prob += lp[best];
    if (static_cast<std::int64_t>(best) == options.eos_id) {
      h.finished = true;
      break;
    }
  }
  h.score = h.log_prob / length_penalty(h.tokens.size() - 1, options.length_alpha);
  return h;
}

std::vector<Hypothesis> beam_search(const StepScorer& scorer, const DecodeOptions& options) {
  if (options.beam < 1) throw ContractError("beam must be >= 1");
  if (options.max_len < 1) throw ContractError("max_len must be >= 1");
  const std::size_t n = scorer.vocab_size();
  const std::size_t beam = std::min(options.beam, beam_ceiling(n, options.max_len));
  const double final_penalty = length_penalty(options.max_len, options.length_alpha);

  std::vector<Hypothesis> live(1);
  live[0].tokens.push_back(options.sos_id);
  std::vector<Hypothesis> done;

  auto by_rank = [](const Hypothesis& a, const Hypothesis& b) {
    return ranks_before(a.score, a.tokens, b.score, b.tokens);
  };

  for (std::size_t step = 1; step <= options.max_len && !live.empty(); ++step) {
    std::vector<Hypothesis> candidates;
    candidates.reserve(live.size() * n);
    for (const auto& h : live) {
      const auto lp = scorer.next_log_probs(h.tokens);
      for (std::size_t k = 0; k < lp.size(); ++k) {
        if (lp[k] == kNegInf) continue;
        Hypothesis c;
        c.tokens = h.tokens;
        c.tokens.push_back(static_cast<std::int64_t>(k));
        c.log_prob = h.log_prob + lp[k];
        candidates.push_back(std::move(c));
      }
    }
    // Same length for every candidate, so raw log-prob order equals
    // normalised order.
    const std::size_t keep = std::min(beam, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                      candidates.end(), [](const Hypothesis& a, const Hypothesis& b) {
                        return ranks_before(a.log_prob, a.tokens, b.log_prob, b.tokens);
                      });
    candidates.resize(keep);

    live.clear();
    for (auto& c : candidates) {
      c.score = c.log_prob / length_penalty(step, options.length_alpha);
      c.finished = c.tokens.back() == options.eos_id;
      if (c.finished || step == options.max_len) {
        done.push_back(std::move(c));
      } else {
        live.push_back(std::move(c));
      }
    }

    if (done.size() >= beam && !live.empty()) {
      std::sort(done.begin(), done.end(), by_rank);
      done.resize(beam);
      // Log-probs only decrease, so a live hypothesis can at best keep its
      // current log-prob at the largest length penalty.
      double optimistic = kNegInf;
      for (const auto& h : live) {
        optimistic = std::max(optimistic, h.log_prob / (h.log_prob < 0.0 ? final_penalty : 1.0));
      }
      if (optimistic < done.back().score) break;
    }
  }

  std::sort(done.begin(), done.end(), by_rank);
  if (done.size() > beam) done.resize(beam);
  return done;
}

}  // namespace mstn
