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

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "mstn/model.hpp"
#include "mstn/tensor.hpp"

namespace mstn {

// Binary container, all integers little-endian:
//   "MSTN" | u32 version | u64 config byte length | config text
//   | u64 record count | records
// The config text is UTF-8 "key=value\n" lines. Each record is
//   u64 name length | name | u64 rank | rank x u64 dims | f64 values.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::pair<std::string, Tensor>> tensors;

  // Returns the value for `key`, or nullptr.
  const std::string* get(const std::string& key) const;
  const Tensor* tensor(const std::string& name) const;

  void save(const std::filesystem::path& path) const;
  static Checkpoint load(const std::filesystem::path& path);
};

// Model config lines prefixed "model." plus one record per parameter.
Checkpoint checkpoint_from_model(const MstnModel& model);

// Rebuilds the model from "model.*" config lines and parameter records;
// throws DataError if a parameter is missing or has the wrong shape.
MstnModel model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace mstn
