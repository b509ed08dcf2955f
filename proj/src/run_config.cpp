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

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "mstn/error.hpp"
#include "mstn/run.hpp"

namespace mstn {

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + key + "' has invalid value '" + value + "'");
  }
  return out;
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p;
}

void apply(RunConfig& c, const std::string& section, const std::string& key,
           const std::string& value, const std::filesystem::path& base) {
  const std::string full = section + "." + key;
  auto sz = [&] { return parse_number<std::size_t>(full, value); };
  auto dbl = [&] { return parse_number<double>(full, value); };
  if (section == "model") {
    if (key == "d_model") c.model.d_model = sz();
    else if (key == "heads") c.model.heads = sz();
    else if (key == "decoder_layers") c.model.decoder_layers = sz();
    else if (key == "d_ff") c.model.d_ff = sz();
    else if (key == "dropout") c.model.dropout = dbl();
    else if (key == "max_decode_len") c.model.max_decode_len = sz();
    else if (key == "output_layer") c.model.output_layer = parse_output_layer(value);
    else if (key == "video_dim") c.model.video_dim = sz();
    else if (key == "audio_dim") c.model.audio_dim = sz();
    else if (key == "max_positions") c.model.max_positions = sz();
    else throw ConfigError("unknown config key '" + full + "'");
  } else if (section == "optim") {
    if (key == "lr_scale") c.optim.lr_scale = dbl();
    else if (key == "warmup_steps") c.optim.warmup_steps = parse_number<std::int64_t>(full, value);
    else if (key == "beta1") c.optim.adam.beta1 = dbl();
    else if (key == "beta2") c.optim.adam.beta2 = dbl();
    else if (key == "eps") c.optim.adam.eps = dbl();
    else throw ConfigError("unknown config key '" + full + "'");
  } else if (section == "train") {
    if (key == "epochs") c.epochs = sz();
    else if (key == "batch_size") c.batch_size = sz();
    else if (key == "max_steps") c.max_steps = sz();
    else if (key == "min_count") c.min_count = sz();
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(full, value);
    else throw ConfigError("unknown config key '" + full + "'");
  } else if (section == "data") {
    if (key == "train") c.train_data = resolve(base, value);
    else if (key == "valid") c.valid_data = resolve(base, value);
    else if (key == "test") c.test_data = resolve(base, value);
    else if (key == "run_dir") c.run_dir = resolve(base, value);
    else throw ConfigError("unknown config key '" + full + "'");
  } else if (section == "decode") {
    if (key == "beam") c.decode.beam = sz();
    else if (key == "max_len") c.decode.max_len = sz();
    else if (key == "alpha") c.decode.length_alpha = dbl();
    else throw ConfigError("unknown config key '" + full + "'");
  } else if (section == "limits") {
    if (key == "question") c.max_lens.question = sz();
    else if (key == "caption") c.max_lens.caption = sz();
    else if (key == "history") c.max_lens.history = sz();
    else if (key == "video") c.max_lens.video = sz();
    else if (key == "audio") c.max_lens.audio = sz();
    else throw ConfigError("unknown config key '" + full + "'");
  } else {
    throw ConfigError("unknown config section [" + section + "]");
  }
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

void RunConfig::validate(bool require_data) const {
  MstnConfig probe = model;
  if (probe.vocab_size == 0) probe.vocab_size = kReservedTokens;
  probe.validate();
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  if (!(optim.lr_scale > 0.0)) throw ConfigError("lr_scale must be > 0");
  if (optim.warmup_steps < 1) throw ConfigError("warmup_steps must be >= 1");
  const auto& a = optim.adam;
  if (!(a.beta1 >= 0.0 && a.beta1 < 1.0) || !(a.beta2 >= 0.0 && a.beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(a.eps > 0.0)) throw ConfigError("Adam eps must be > 0");
  if (decode.beam < 1) throw ConfigError("beam must be >= 1");
  if (decode.max_len < 1 || decode.max_len > model.max_decode_len) {
    throw ConfigError("decode max_len must lie in [1, model.max_decode_len]");
  }
  if (!(decode.length_alpha >= 0.0)) throw ConfigError("length alpha must be >= 0");
  if (max_lens.question < 1 || max_lens.video < 1 || max_lens.audio < 1) {
    throw ConfigError("question/video/audio limits must be >= 1");
  }
  for (auto lim : {max_lens.question, max_lens.caption, max_lens.history, max_lens.video,
                   max_lens.audio}) {
    if (lim > model.max_positions) throw ConfigError("length limit exceeds model.max_positions");
  }
  if (require_data) {
    if (!seed) throw ConfigError("a seed is mandatory for training");
    if (train_data.empty() || !std::filesystem::is_regular_file(train_data)) {
      throw ConfigError("training data not found: '" + train_data.string() + "'");
    }
    if (valid_data.empty() || !std::filesystem::is_regular_file(valid_data)) {
      throw ConfigError("validation data not found: '" + valid_data.string() + "'");
    }
    if (!test_data.empty() && !std::filesystem::is_regular_file(test_data)) {
      throw ConfigError("test data not found: '" + test_data.string() + "'");
    }
    if (!run_dir.empty() && std::filesystem::exists(run_dir) &&
        !std::filesystem::is_directory(run_dir)) {
      throw ConfigError("run_dir exists and is not a directory: " + run_dir.string());
    }
  }
}

std::vector<std::pair<std::string, std::string>> RunConfig::to_pairs() const {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("preset", preset);
  for (auto& [k, v] : model.to_pairs()) {
    if (k != "vocab_size") out.emplace_back("model." + k, v);
  }
  out.emplace_back("optim.lr_scale", fmt(optim.lr_scale));
  out.emplace_back("optim.warmup_steps", std::to_string(optim.warmup_steps));
  out.emplace_back("optim.beta1", fmt(optim.adam.beta1));
  out.emplace_back("optim.beta2", fmt(optim.adam.beta2));
  out.emplace_back("optim.eps", fmt(optim.adam.eps));
  out.emplace_back("train.epochs", std::to_string(epochs));
  out.emplace_back("train.batch_size", std::to_string(batch_size));
  out.emplace_back("train.max_steps", std::to_string(max_steps));
  out.emplace_back("train.min_count", std::to_string(min_count));
  out.emplace_back("train.seed", seed ? std::to_string(*seed) : "unset");
  out.emplace_back("data.train", train_data.string());
  out.emplace_back("data.valid", valid_data.string());
  out.emplace_back("data.test", test_data.string());
  out.emplace_back("decode.beam", std::to_string(decode.beam));
  out.emplace_back("decode.max_len", std::to_string(decode.max_len));
  out.emplace_back("decode.alpha", fmt(decode.length_alpha));
  out.emplace_back("limits.question", std::to_string(max_lens.question));
  out.emplace_back("limits.caption", std::to_string(max_lens.caption));
  out.emplace_back("limits.history", std::to_string(max_lens.history));
  out.emplace_back("limits.video", std::to_string(max_lens.video));
  out.emplace_back("limits.audio", std::to_string(max_lens.audio));
  return out;
}

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  c.preset = name;
  if (name == "full") return c;
  if (name == "toy") {
    c.model.d_model = 32;
    c.model.heads = 4;
    c.model.d_ff = 64;
    c.model.dropout = 0.1;
    c.optim.warmup_steps = 200;
    c.optim.lr_scale = 2.0;
    c.epochs = 10;
    c.batch_size = 16;
    return c;
  }
  if (name == "tiny") {
    c.model.d_model = 8;
    c.model.heads = 2;
    c.model.d_ff = 16;
    c.model.dropout = 0.0;
    c.optim.warmup_steps = 50;
    c.epochs = 2;
    c.batch_size = 4;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "' (expected full, toy or tiny)");
}

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  std::string preset = "full";
  for (const auto& [key, node] : tree) {
    if (node.empty()) {
      if (key != "preset") throw ConfigError("unknown top-level config key '" + key + "'");
      preset = node.data();
    }
  }
  RunConfig c = preset_config(preset);
  for (const auto& [section, node] : tree) {
    if (node.empty()) continue;
    for (const auto& [key, leaf] : node) apply(c, section, key, leaf.data(), base_dir);
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.parent_path());
}

std::string config_hash(const RunConfig& config, bool ignore_output_layer) {
  std::string text;
  for (const auto& [k, v] : config.to_pairs()) {
    if (ignore_output_layer && k == "model.output_layer") continue;
    text += k + "=" + v + "\n";
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

void validate_arms(const RunConfig& wean_arm, const RunConfig& linear_arm) {
  if (wean_arm.seed != linear_arm.seed) {
    throw ConfigError("ablation arms must share one seed");
  }
  if (wean_arm.model.output_layer != OutputLayer::wean ||
      linear_arm.model.output_layer != OutputLayer::linear) {
    throw ConfigError("ablation arms must be one WEAN and one linear output layer");
  }
  const auto a = wean_arm.to_pairs();
  const auto b = linear_arm.to_pairs();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].first == "model.output_layer") continue;
    if (a[i] != b[i]) {
      throw ConfigError("ablation arms differ in '" + a[i].first + "' (" + a[i].second + " vs " +
                        b[i].second + ")");
    }
  }
}

}  // namespace mstn
