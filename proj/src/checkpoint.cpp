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

#include "mstn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "mstn/error.hpp"

namespace mstn {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'T', 'N'};
constexpr std::uint64_t kMaxName = 1 << 16;
constexpr std::uint64_t kMaxRank = 16;

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t get_u64(std::istream& in, const std::string& what) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError("checkpoint truncated reading " + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::uint32_t get_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("checkpoint truncated reading " + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

const std::string* Checkpoint::get(const std::string& key) const {
  for (const auto& [k, v] : config) {
    if (k == key) return &v;
  }
  return nullptr;
}

const Tensor* Checkpoint::tensor(const std::string& name) const {
  for (const auto& [k, t] : tensors) {
    if (k == name) return &t;
  }
  return nullptr;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  std::string text;
  for (const auto& [k, v] : config) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ContractError("checkpoint config entry '" + k + "' contains a reserved character");
    }
    text += k + "=" + v + "\n";
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    put_u64(out, tensors.size());
    for (const auto& [name, t] : tensors) {
      put_u64(out, name.size());
      out.write(name.data(), static_cast<std::streamsize>(name.size()));
      put_u64(out, t.rank());
      for (auto d : t.shape()) put_u64(out, d);
      for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
    if (!out) throw DataError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError(path.string() + " is not an MSTN checkpoint");
  }
  const auto version = get_u32(in, "version");
  if (version != kVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  const auto text_len = get_u64(in, "config length");
  std::string text(text_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(text_len))) {
    throw DataError("checkpoint truncated in config block");
  }
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) throw DataError("checkpoint config line lacks a newline");
    const std::string line = text.substr(pos, nl - pos);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("checkpoint config line without '=': " + line);
    ckpt.config.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    pos = nl + 1;
  }
  const auto count = get_u64(in, "record count");
  for (std::uint64_t r = 0; r < count; ++r) {
    const auto name_len = get_u64(in, "name length");
    if (name_len == 0 || name_len > kMaxName) throw DataError("checkpoint record has a bad name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name_len))) {
      throw DataError("checkpoint truncated in record name");
    }
    const auto rank = get_u64(in, name + " rank");
    if (rank == 0 || rank > kMaxRank) throw DataError("checkpoint record " + name + " has bad rank");
    Shape shape(rank);
    for (auto& d : shape) {
      d = get_u64(in, name + " dims");
      if (d == 0) throw DataError("checkpoint record " + name + " has a zero dimension");
    }
    std::vector<double> values(shape_numel(shape));
    for (auto& v : values) v = std::bit_cast<double>(get_u64(in, name + " values"));
    ckpt.tensors.emplace_back(name, Tensor::from(shape, std::move(values)));
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw DataError("checkpoint " + path.string() + " has trailing bytes");
  }
  return ckpt;
}

Checkpoint checkpoint_from_model(const MstnModel& model) {
  Checkpoint ckpt;
  for (auto& [k, v] : model.config().to_pairs()) ckpt.config.emplace_back("model." + k, v);
  const auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    ckpt.tensors.emplace_back(params.names()[i], params.tensors()[i].clone());
  }
  return ckpt;
}

MstnModel model_from_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& [k, v] : ckpt.config) {
    if (k.rfind("model.", 0) == 0) pairs.emplace_back(k.substr(6), v);
  }
  MstnModel model(MstnConfig::from_pairs(pairs), 0);
  auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = params.names()[i];
    const Tensor* src = ckpt.tensor(name);
    if (src == nullptr) throw DataError("checkpoint lacks parameter " + name);
    Tensor dst = params.tensors()[i];
    if (src->shape() != dst.shape()) {
      throw DataError("checkpoint parameter " + name + " has shape " + shape_str(src->shape()) +
                      ", model expects " + shape_str(dst.shape()));
    }
    std::copy(src->data().begin(), src->data().end(), dst.data().begin());
  }
  return model;
}

}  // namespace mstn
