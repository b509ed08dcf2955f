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

#include "mstn/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "mstn/error.hpp"

namespace mstn {

namespace {

bool is_terminal_punct(char c) { return c == '.' || c == ',' || c == '?' || c == '!'; }

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

const char* const kReserved[kReservedTokens] = {"<pad>", "<sos>", "<eos>", "<unk>", "<sep>"};

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (start == i) break;
    std::string word(text.substr(start, i - start));
    for (auto& c : word) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    std::size_t end = word.size();
    while (end > 0 && is_terminal_punct(word[end - 1])) --end;
    if (end > 0) out.push_back(word.substr(0, end));
    for (std::size_t k = end; k < word.size(); ++k) out.emplace_back(1, word[k]);
  }
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

Vocab::Vocab() {
  for (const char* t : kReserved) push(t);
}

void Vocab::push(const std::string& token) {
  index_.emplace(token, static_cast<std::int64_t>(tokens_.size()));
  tokens_.push_back(token);
}

Vocab Vocab::build(std::span<const std::vector<std::string>> corpus, std::size_t min_count) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  Vocab vocab;
  for (const auto& [tok, n] : counts) {
    if (n >= min_count && !vocab.contains(tok)) ranked.emplace_back(tok, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [tok, n] : ranked) vocab.push(tok);
  return vocab;
}

Vocab Vocab::build_from_text(std::span<const std::string> corpus, std::size_t min_count) {
  std::vector<std::vector<std::string>> tokenized;
  tokenized.reserve(corpus.size());
  for (const auto& line : corpus) tokenized.push_back(tokenize(line));
  return build(tokenized, min_count);
}

Vocab Vocab::from_tokens(std::span<const std::string> tokens, const std::string& source) {
  Vocab vocab;
  vocab.tokens_.clear();
  vocab.index_.clear();
  for (const auto& t : tokens) {
    if (t.empty()) throw DataError("empty token in vocabulary " + source);
    if (vocab.contains(t)) throw DataError("duplicate token '" + t + "' in vocabulary " + source);
    vocab.push(t);
  }
  for (std::size_t i = 0; i < kReservedTokens; ++i) {
    if (i >= vocab.size() || vocab.tokens_[i] != kReserved[i]) {
      throw DataError("vocabulary " + source + " lacks reserved token " + kReserved[i] +
                      " at id " + std::to_string(i));
    }
  }
  return vocab;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocabulary file " + path.string());
  std::vector<std::string> tokens;
  for (std::string line; std::getline(in, line);) tokens.push_back(line);
  return from_tokens(tokens, path.string());
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary file " + path.string());
  for (const auto& t : tokens_) out << t << '\n';
}

bool Vocab::contains(std::string_view token) const {
  return index_.find(std::string(token)) != index_.end();
}

std::int64_t Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

const std::string& Vocab::token(std::int64_t id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) return tokens_[kUnkId];
  return tokens_[static_cast<std::size_t>(id)];
}

std::vector<std::int64_t> Vocab::encode(std::span<const std::string> tokens) const {
  std::vector<std::int64_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

std::vector<std::string> Vocab::decode(std::span<const std::int64_t> ids) const {
  std::vector<std::string> out;
  for (auto id : ids) {
    if (id == kEosId) break;
    if (id == kPadId || id == kSosId) continue;
    out.push_back(token(id));
  }
  return out;
}

}  // namespace mstn
