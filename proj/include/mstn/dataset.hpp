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
#include <vector>

namespace mstn {

// Row-major [rows, cols] feature sequence (one row per frame).
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  bool operator==(const FeatureMatrix&) const = default;
};

// Feature file: "FEAT", u32 version, u64 rows, u64 cols, rows*cols f32, all
// little-endian. Values are widened to f64 on read.
FeatureMatrix read_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const FeatureMatrix& features);

// Rounds every value through f32 so in-memory features equal what a
// write/read cycle produces.
void quantize_to_f32(FeatureMatrix& features);

struct DialogTurn {
  std::vector<std::string> question;
  std::vector<std::string> answer;

  bool operator==(const DialogTurn&) const = default;
};

struct DialogExample {
  std::string id;  // optional
  std::vector<std::string> question;
  std::vector<DialogTurn> history;
  std::vector<std::string> caption;  // empty when the record has no caption
  std::string video_path;            // relative to the dataset directory
  std::string audio_path;
  FeatureMatrix video;
  FeatureMatrix audio;
  std::vector<std::string> answer;
  std::string attribute;  // optional ground-truth attribute token (synthetic data)

  bool operator==(const DialogExample&) const = default;
};

// JSON-lines dataset. Every record must carry "question", "history",
// "caption" (string or null), "video", "audio" and "answer"; "id" and
// "attribute" are optional. Throws DataError naming the line on any defect.
std::vector<DialogExample> load_dataset(const std::filesystem::path& path);

// Writes the records in canonical form (fixed key order, detokenized text)
// together with their feature files, whose paths are taken relative to the
// dataset file's directory.
void save_dataset(const std::filesystem::path& path, std::span<const DialogExample> examples);

}  // namespace mstn
