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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "mstn/error.hpp"
#include "mstn/metrics.hpp"
#include "mstn/rng.hpp"
#include "mstn/vocab.hpp"

using namespace mstn;

namespace {

Tokens toks(const std::string& s) { return tokenize(s); }

double bleu_one(const std::string& hyp, std::vector<std::string> refs) {
  std::vector<Tokens> h{toks(hyp)};
  std::vector<std::vector<Tokens>> r(1);
  for (const auto& ref : refs) r[0].push_back(toks(ref));
  return bleu4(h, r).smoothed;
}

// Longest common subsequence by trying every subset of `a` (|a| <= 10).
std::size_t brute_lcs(const Tokens& a, const Tokens& b) {
  std::size_t best = 0;
  for (std::uint32_t m = 0; m < (1u << a.size()); ++m) {
    std::size_t j = 0, len = 0;
    bool ok = true;
    for (std::size_t i = 0; i < a.size() && ok; ++i) {
      if (!(m >> i & 1u)) continue;
      while (j < b.size() && b[j] != a[i]) ++j;
      if (j == b.size()) ok = false;
      else {
        ++j;
        ++len;
      }
    }
    if (ok) best = std::max(best, len);
  }
  return best;
}

Tokens random_tokens(Rng& rng, std::size_t max_len, std::size_t alphabet) {
  Tokens t(rng.below(max_len + 1));
  for (auto& w : t) w = std::string(1, static_cast<char>('a' + rng.below(alphabet)));
  return t;
}

}  // namespace

TEST(Bleu, HandCountedExample) {
  // Clipped matches 5/6, 3/5, 1/4, 0/3. Orders 2..4 are smoothed because the
  // 4-gram count is zero: 5/6 * 4/6 * 2/5 * 1/4 = 1/18, brevity penalty 1.
  std::vector<Tokens> h{toks("the cat sat on the mat")};
  std::vector<std::vector<Tokens>> r{{toks("the cat is on the mat")}};
  const auto b = bleu4(h, r);
  EXPECT_NEAR(b.smoothed, std::pow(1.0 / 18.0, 0.25), 1e-12);
  EXPECT_EQ(b.raw, 0.0);
  EXPECT_EQ(b.brevity_penalty, 1.0);
  EXPECT_NEAR(b.precisions[0], 5.0 / 6.0, 1e-15);
  EXPECT_NEAR(b.precisions[1], 4.0 / 6.0, 1e-15);
  EXPECT_NEAR(b.precisions[2], 2.0 / 5.0, 1e-15);
  EXPECT_NEAR(b.precisions[3], 1.0 / 4.0, 1e-15);
}

TEST(Bleu, MultiReferenceClippingUsesMaxCount) {
  // Unigram "the" clips at 2 (second reference): 2/4. Bigram "the the" clips
  // at 1: 1/3. Smoothed 1/2 * 2/4 * 1/3 * 1/2 = 1/24.
  EXPECT_NEAR(bleu_one("the the the the", {"the cat", "the the dog"}), std::pow(1.0 / 24.0, 0.25),
              1e-12);
}

TEST(Bleu, BrevityPenaltyUsesShortestReference) {
  // Unsmoothed 1.0 precisions at every order; c = 4 against shortest r = 6.
  std::vector<Tokens> h{toks("a b c d")};
  std::vector<std::vector<Tokens>> r{{toks("a b c d e f g h"), toks("a b c d e f")}};
  const auto b = bleu4(h, r);
  EXPECT_NEAR(b.brevity_penalty, std::exp(1.0 - 6.0 / 4.0), 1e-15);
  EXPECT_NEAR(b.smoothed, std::exp(-0.5), 1e-12);
  EXPECT_NEAR(b.raw, std::exp(-0.5), 1e-12);
}

TEST(Bleu, IdentityAndEmpty) {
  EXPECT_EQ(bleu_one("a man is holding a cup", {"a man is holding a cup"}), 1.0);
  EXPECT_EQ(bleu_one("", {"a man is holding a cup"}), 0.0);
  EXPECT_EQ(bleu_one("x y z", {"a b c"}), 0.0);
}

TEST(Bleu, CorpusStatisticsArePooled) {
  std::vector<Tokens> h{toks("a b c d"), toks("e f")};
  std::vector<std::vector<Tokens>> r{{toks("a b c d")}, {toks("e g")}};
  BleuStats s;
  s.add(h[0], r[0]);
  s.add(h[1], r[1]);
  EXPECT_EQ(s.matches, (std::array<std::size_t, 4>{5, 3, 2, 1}));
  EXPECT_EQ(s.totals, (std::array<std::size_t, 4>{6, 4, 2, 1}));
  EXPECT_NEAR(bleu4(h, r).raw, std::pow(5.0 / 6.0 * 3.0 / 4.0, 0.25), 1e-12);
}

TEST(Bleu, ContractErrors) {
  std::vector<Tokens> h{toks("a")};
  std::vector<std::vector<Tokens>> none;
  EXPECT_THROW(bleu4(h, none), ContractError);
  std::vector<std::vector<Tokens>> empty_set(1);
  EXPECT_THROW(bleu4(h, empty_set), ContractError);
}

TEST(Bleu, InvariantUnderCorpusReordering) {
  Rng rng(3);
  std::vector<Tokens> h;
  std::vector<std::vector<Tokens>> r;
  for (int i = 0; i < 30; ++i) {
    h.push_back(random_tokens(rng, 8, 4));
    r.push_back({random_tokens(rng, 8, 4), random_tokens(rng, 8, 4)});
  }
  const auto base = bleu4(h, r);
  std::vector<std::size_t> perm(h.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = perm.size() - 1 - i;
  std::rotate(perm.begin(), perm.begin() + 7, perm.end());
  std::vector<Tokens> h2;
  std::vector<std::vector<Tokens>> r2;
  for (auto i : perm) {
    h2.push_back(h[i]);
    r2.push_back(r[i]);
  }
  const auto other = bleu4(h2, r2);
  EXPECT_EQ(base.smoothed, other.smoothed);
  EXPECT_EQ(base.raw, other.raw);
}

TEST(Bleu, ExtraReferenceNeverLowersRawScore) {
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<Tokens> h{random_tokens(rng, 8, 3)};
    std::vector<std::vector<Tokens>> r{{random_tokens(rng, 8, 3)}};
    const double before = bleu4(h, r).raw;
    r[0].push_back(random_tokens(rng, 8, 3));
    EXPECT_GE(bleu4(h, r).raw, before);
  }
}

TEST(Bleu, ExtraReferenceCanLowerSmoothedScore) {
  // The added reference supplies the only 4-gram match, which switches
  // smoothing off; orders 2 and 3 lose their +1 and the score drops.
  const std::string hyp = "a b c d p q r s t u v w";
  const double one = bleu_one(hyp, {"a b c z b c d"});
  const double two = bleu_one(hyp, {"a b c z b c d", "a b c d"});
  EXPECT_NEAR(one, std::pow(4.0 / 12 * 4.0 / 12 * 3.0 / 11 * 1.0 / 10, 0.25), 1e-12);
  EXPECT_NEAR(two, std::pow(4.0 / 12 * 3.0 / 11 * 2.0 / 10 * 1.0 / 9, 0.25), 1e-12);
  EXPECT_LT(two, one);
}

TEST(Rouge, HandExamples) {
  EXPECT_EQ(lcs_length(toks("a b c d"), toks("a c b d")), 3u);
  const std::vector<Tokens> ref{toks("a c b d")};
  EXPECT_NEAR(rouge_l(toks("a b c d"), ref), 0.75, 1e-12);
  // P = 1, R = 1/2: 2.2 * 0.5 / (0.5 + 1.2) = 11/17.
  const std::vector<Tokens> longer{toks("a b c d")};
  EXPECT_NEAR(rouge_l(toks("a b"), longer), 11.0 / 17.0, 1e-12);
  // P = 1/2, R = 1: 2.2 * 0.5 / (1 + 0.6) = 11/16.
  const std::vector<Tokens> shorter{toks("a b")};
  EXPECT_NEAR(rouge_l(toks("a x b y"), shorter), 11.0 / 16.0, 1e-12);
}

TEST(Rouge, IdentityDisjointAndEmpty) {
  const std::vector<Tokens> ref{toks("the dog runs")};
  EXPECT_EQ(rouge_l(toks("the dog runs"), ref), 1.0);
  EXPECT_EQ(rouge_l(toks("cats sleep"), ref), 0.0);
  EXPECT_EQ(rouge_l(Tokens{}, ref), 0.0);
  EXPECT_THROW(rouge_l(toks("a"), std::vector<Tokens>{}), ContractError);
}

TEST(Rouge, BestReferenceAndCorpusMean) {
  const std::vector<Tokens> refs{toks("x y"), toks("a c b d")};
  EXPECT_NEAR(rouge_l(toks("a b c d"), refs), 0.75, 1e-12);
  std::vector<Tokens> h{toks("a b c d"), toks("q")};
  std::vector<std::vector<Tokens>> r{{toks("a c b d")}, {toks("q")}};
  EXPECT_NEAR(rouge_l_corpus(h, r), 0.875, 1e-12);
}

TEST(Rouge, LcsMatchesBruteForce) {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const Tokens a = random_tokens(rng, 8, 3);
    const Tokens b = random_tokens(rng, 8, 3);
    ASSERT_EQ(lcs_length(a, b), brute_lcs(a, b));
  }
}

TEST(Rouge, ExtraReferenceNeverLowersScore) {
  Rng rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    const Tokens h = random_tokens(rng, 8, 3);
    std::vector<Tokens> r{random_tokens(rng, 8, 3)};
    const double before = rouge_l(h, r);
    r.push_back(random_tokens(rng, 8, 3));
    const double after = rouge_l(h, r);
    EXPECT_GE(after, before);
    EXPECT_LE(after, 1.0);
  }
}
