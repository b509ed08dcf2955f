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

#include "mstn/dataset.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mstn/error.hpp"
#include "mstn/vocab.hpp"

namespace mstn {

namespace {

constexpr char kFeatMagic[4] = {'F', 'E', 'A', 'T'};
constexpr std::uint32_t kFeatVersion = 1;

template <typename T>
void put_le(std::ostream& out, T value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = std::bit_cast<U>(value);
  char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf, sizeof(U));
}

template <typename T>
bool get_le(std::istream& in, T& value) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  unsigned char buf[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(U))) return false;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
  value = std::bit_cast<T>(bits);
  return true;
}

std::vector<std::string> text_field(const nlohmann::json& rec, const char* key,
                                    const std::string& where) {
  if (!rec.contains(key)) throw DataError(where + ": missing field \"" + key + "\"");
  const auto& v = rec.at(key);
  if (!v.is_string()) throw DataError(where + ": field \"" + key + "\" must be a string");
  return tokenize(v.get<std::string>());
}

}  // namespace

FeatureMatrix read_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open feature file " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kFeatMagic, 4) != 0) {
    throw DataError("feature file " + path.string() + " has a bad magic header");
  }
  std::uint32_t version = 0;
  std::uint64_t rows = 0, cols = 0;
  if (!get_le(in, version) || !get_le(in, rows) || !get_le(in, cols)) {
    throw DataError("feature file " + path.string() + " has a truncated header");
  }
  if (version != kFeatVersion) {
    throw DataError("feature file " + path.string() + " has unsupported version " +
                    std::to_string(version));
  }
  if (rows == 0 || cols == 0) {
    throw DataError("feature file " + path.string() + " declares an empty matrix");
  }
  FeatureMatrix f;
  f.rows = rows;
  f.cols = cols;
  f.values.resize(rows * cols);
  for (auto& v : f.values) {
    float x = 0.0f;
    if (!get_le(in, x)) {
      throw DataError("feature file " + path.string() + " holds fewer values than its header's " +
                      std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (!std::isfinite(x)) throw DataError("feature file " + path.string() + " contains non-finite values");
    v = static_cast<double>(x);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("feature file " + path.string() + " holds more values than its header's " +
                    std::to_string(rows) + "x" + std::to_string(cols));
  }
  return f;
}

void write_features(const std::filesystem::path& path, const FeatureMatrix& features) {
  if (features.values.size() != features.rows * features.cols) {
    throw ContractError("feature matrix size does not match its dimensions");
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write feature file " + path.string());
  out.write(kFeatMagic, 4);
  put_le(out, kFeatVersion);
  put_le(out, static_cast<std::uint64_t>(features.rows));
  put_le(out, static_cast<std::uint64_t>(features.cols));
  for (double v : features.values) put_le(out, static_cast<float>(v));
  if (!out) throw DataError("failed writing feature file " + path.string());
}

void quantize_to_f32(FeatureMatrix& features) {
  for (auto& v : features.values) v = static_cast<double>(static_cast<float>(v));
}

std::vector<DialogExample> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  const auto dir = path.parent_path();
  std::vector<DialogExample> out;
  std::string line;
  std::size_t lineno = 0;
  std::size_t video_dim = 0, audio_dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!rec.is_object()) throw DataError(where + ": record is not a JSON object");

    DialogExample ex;
    if (rec.contains("id")) {
      if (!rec["id"].is_string()) throw DataError(where + ": field \"id\" must be a string");
      ex.id = rec["id"].get<std::string>();
    }
    ex.question = text_field(rec, "question", where);
    ex.answer = text_field(rec, "answer", where);
    if (ex.answer.empty()) throw DataError(where + ": empty answer");

    if (!rec.contains("history")) throw DataError(where + ": missing field \"history\"");
    const auto& hist = rec["history"];
    if (!hist.is_array()) throw DataError(where + ": field \"history\" must be an array");
    for (const auto& turn : hist) {
      if (!turn.is_array() || turn.size() != 2 || !turn[0].is_string() || !turn[1].is_string()) {
        throw DataError(where + ": history turns must be [question, answer] string pairs");
      }
      ex.history.push_back({tokenize(turn[0].get<std::string>()), tokenize(turn[1].get<std::string>())});
    }

    if (!rec.contains("caption")) throw DataError(where + ": missing field \"caption\"");
    const auto& cap = rec["caption"];
    if (cap.is_string()) {
      ex.caption = tokenize(cap.get<std::string>());
    } else if (!cap.is_null()) {
      throw DataError(where + ": field \"caption\" must be a string or null");
    }

    for (const char* key : {"video", "audio"}) {
      if (!rec.contains(key) || !rec[key].is_string()) {
        throw DataError(where + ": field \"" + std::string(key) + "\" must be a relative path string");
      }
    }
    ex.video_path = rec["video"].get<std::string>();
    ex.audio_path = rec["audio"].get<std::string>();
    try {
      ex.video = read_features(dir / ex.video_path);
      ex.audio = read_features(dir / ex.audio_path);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    if (video_dim == 0) video_dim = ex.video.cols;
    if (audio_dim == 0) audio_dim = ex.audio.cols;
    if (ex.video.cols != video_dim || ex.audio.cols != audio_dim) {
      throw DataError(where + ": feature dimension " + std::to_string(ex.video.cols) + "/" +
                      std::to_string(ex.audio.cols) + " differs from the dataset's " +
                      std::to_string(video_dim) + "/" + std::to_string(audio_dim));
    }

    if (rec.contains("attribute")) {
      if (!rec["attribute"].is_string()) throw DataError(where + ": field \"attribute\" must be a string");
      ex.attribute = rec["attribute"].get<std::string>();
    }
    out.push_back(std::move(ex));
  }
  return out;
}

void save_dataset(const std::filesystem::path& path, std::span<const DialogExample> examples) {
  const auto dir = path.parent_path();
  if (!dir.empty()) std::filesystem::create_directories(dir);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset " + path.string());
  for (const auto& ex : examples) {
    nlohmann::ordered_json rec;
    if (!ex.id.empty()) rec["id"] = ex.id;
    rec["question"] = detokenize(ex.question);
    auto hist = nlohmann::ordered_json::array();
    for (const auto& turn : ex.history) {
      hist.push_back({detokenize(turn.question), detokenize(turn.answer)});
    }
    rec["history"] = hist;
    rec["caption"] = ex.caption.empty() ? nlohmann::ordered_json(nullptr)
                                        : nlohmann::ordered_json(detokenize(ex.caption));
    rec["video"] = ex.video_path;
    rec["audio"] = ex.audio_path;
    rec["answer"] = detokenize(ex.answer);
    if (!ex.attribute.empty()) rec["attribute"] = ex.attribute;
    out << rec.dump() << '\n';
    write_features(dir / ex.video_path, ex.video);
    write_features(dir / ex.audio_path, ex.audio);
  }
  if (!out) throw DataError("failed writing dataset " + path.string());
}

}  // namespace mstn
