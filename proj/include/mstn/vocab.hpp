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
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace mstn {

inline constexpr std::int64_t kPadId = 0;
inline constexpr std::int64_t kSosId = 1;
inline constexpr std::int64_t kEosId = 2;
inline constexpr std::int64_t kUnkId = 3;
inline constexpr std::int64_t kSepId = 4;
inline constexpr std::size_t kReservedTokens = 5;

// Lowercases ASCII, splits on whitespace and peels trailing . , ? ! off each
// word into their own tokens. "Door?!" -> ["door", "?", "!"].
std::vector<std::string> tokenize(std::string_view text);

// Joins tokens with single spaces; tokenize(detokenize(t)) == t for any
// tokenize() output t.
std::string detokenize(std::span<const std::string> tokens);

class Vocab {
 public:
  // Reserved tokens only: <pad> <sos> <eos> <unk> <sep>.
  Vocab();

  // Tokens with frequency >= min_count, ordered by (frequency desc, token asc)
  // after the reserved ids.
  static Vocab build(std::span<const std::vector<std::string>> corpus, std::size_t min_count = 1);
  static Vocab build_from_text(std::span<const std::string> corpus, std::size_t min_count = 1);

  // Exact id order; the reserved tokens must come first. Throws DataError.
  static Vocab from_tokens(std::span<const std::string> tokens, const std::string& source);

  static Vocab load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  // Unknown tokens map to kUnkId.
  std::int64_t id(std::string_view token) const;
  const std::string& token(std::int64_t id) const;

  std::vector<std::int64_t> encode(std::span<const std::string> tokens) const;
  // Stops at the first eos and skips pad/sos.
  std::vector<std::string> decode(std::span<const std::int64_t> ids) const;

  bool operator==(const Vocab& other) const { return tokens_ == other.tokens_; }

 private:
  void push(const std::string& token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int64_t> index_;
};

}  // namespace mstn
