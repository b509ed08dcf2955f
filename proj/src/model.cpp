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

#include "mstn/model.hpp"

#include <charconv>
#include <cmath>
#include <set>

#include "mstn/error.hpp"
#include "mstn/vocab.hpp"

namespace mstn {

namespace {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  std::size_t out = 0;
  auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw ConfigError("'" + key + "' expects a non-negative integer, got '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
  }
  return out;
}

std::size_t modality_index(ModalityId m) { return static_cast<std::size_t>(m); }

bool any_real(std::span<const std::uint8_t> mask, std::size_t length) {
  if (length == 0) return false;
  if (mask.empty()) return true;
  for (auto v : mask) {
    if (v) return true;
  }
  return false;
}

}  // namespace

std::string_view modality_name(ModalityId m) {
  switch (m) {
    case ModalityId::question: return "question";
    case ModalityId::caption: return "caption";
    case ModalityId::history: return "history";
    case ModalityId::video: return "video";
    case ModalityId::audio: return "audio";
  }
  return "?";
}

std::string_view output_layer_name(OutputLayer layer) {
  return layer == OutputLayer::wean ? "wean" : "linear";
}

OutputLayer parse_output_layer(std::string_view name) {
  if (name == "wean") return OutputLayer::wean;
  if (name == "linear") return OutputLayer::linear;
  throw ConfigError("output_layer must be 'wean' or 'linear', got '" + std::string(name) + "'");
}

void MstnConfig::validate() const {
  if (d_model == 0 || heads == 0 || d_model % heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " must be a positive multiple of heads " +
                      std::to_string(heads));
  }
  if (d_model % 2 != 0) throw ConfigError("d_model must be even for positional encoding");
  if (decoder_layers < 1) throw ConfigError("decoder_layers must be >= 1");
  if (d_ff < 1) throw ConfigError("d_ff must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("dropout must lie in [0, 1), got " + format_double(dropout));
  }
  if (vocab_size < kReservedTokens) {
    throw ConfigError("vocab_size " + std::to_string(vocab_size) + " is below the " +
                      std::to_string(kReservedTokens) + " reserved tokens");
  }
  if (max_decode_len < 1) throw ConfigError("max_decode_len must be >= 1");
  if (video_dim < 1 || audio_dim < 1) throw ConfigError("feature dimensions must be >= 1");
  if (max_positions < max_decode_len + 1) {
    throw ConfigError("max_positions must cover max_decode_len + 1 decoder positions");
  }
}

std::vector<std::pair<std::string, std::string>> MstnConfig::to_pairs() const {
  return {
      {"d_model", std::to_string(d_model)},
      {"heads", std::to_string(heads)},
      {"decoder_layers", std::to_string(decoder_layers)},
      {"d_ff", std::to_string(d_ff)},
      {"dropout", format_double(dropout)},
      {"vocab_size", std::to_string(vocab_size)},
      {"max_decode_len", std::to_string(max_decode_len)},
      {"output_layer", std::string(output_layer_name(output_layer))},
      {"video_dim", std::to_string(video_dim)},
      {"audio_dim", std::to_string(audio_dim)},
      {"max_positions", std::to_string(max_positions)},
  };
}

MstnConfig MstnConfig::from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs) {
  MstnConfig c;
  for (const auto& [k, v] : pairs) {
    if (k == "d_model") c.d_model = parse_size(k, v);
    else if (k == "heads") c.heads = parse_size(k, v);
    else if (k == "decoder_layers") c.decoder_layers = parse_size(k, v);
    else if (k == "d_ff") c.d_ff = parse_size(k, v);
    else if (k == "dropout") c.dropout = parse_double(k, v);
    else if (k == "vocab_size") c.vocab_size = parse_size(k, v);
    else if (k == "max_decode_len") c.max_decode_len = parse_size(k, v);
    else if (k == "output_layer") c.output_layer = parse_output_layer(v);
    else if (k == "video_dim") c.video_dim = parse_size(k, v);
    else if (k == "audio_dim") c.audio_dim = parse_size(k, v);
    else if (k == "max_positions") c.max_positions = parse_size(k, v);
    else throw ConfigError("unknown model config key '" + k + "'");
  }
  return c;
}

ExampleInputs example_inputs(const Batch& batch, std::size_t b) {
  if (b >= batch.size()) throw ContractError("example index out of range");
  ExampleInputs in;
  auto text = [&](ModalityId m, const PaddedIds& p) {
    auto& dst = in[modality_index(m)];
    auto ids = p.row(b);
    auto mask = p.row_mask(b);
    dst.ids.assign(ids.begin(), ids.end());
    dst.mask.assign(mask.begin(), mask.end());
  };
  auto feats = [&](ModalityId m, const PaddedFeatures& p) {
    auto& dst = in[modality_index(m)];
    auto vals = p.row(b);
    auto mask = p.row_mask(b);
    dst.features.assign(vals.begin(), vals.end());
    dst.feature_dim = p.dim;
    dst.mask.assign(mask.begin(), mask.end());
  };
  text(ModalityId::question, batch.question);
  text(ModalityId::caption, batch.caption);
  text(ModalityId::history, batch.history);
  feats(ModalityId::video, batch.video);
  feats(ModalityId::audio, batch.audio);
  return in;
}

MstnModel::MstnModel(const MstnConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const std::size_t d = config_.d_model;
  // Small embedding init keeps initial WEAN logits near uniform.
  const double embed_std = 0.5 / std::sqrt(static_cast<double>(d));
  embedding_ = params_.normal("embedding", {config_.vocab_size, d}, embed_std, rng);
  null_vector_ = params_.normal("null_vector", {d}, embed_std, rng);
  video_proj_ = Linear(params_, "video_proj", config_.video_dim, d, rng);
  audio_proj_ = Linear(params_, "audio_proj", config_.audio_dim, d, rng);
  for (auto m : kModalities) {
    const std::string prefix = "encoder." + std::string(modality_name(m));
    auto& e = encoders_[modality_index(m)];
    e.norm_in = LayerNorm(params_, prefix + ".norm_in", d);
    e.ffn = FeedForward(params_, prefix + ".ffn", d, config_.d_ff, rng);
    e.norm_out = LayerNorm(params_, prefix + ".norm_out", d);
  }
  qa_video_ = MultiHeadAttention(params_, "qa_attention.video", d, config_.heads, rng);
  qa_audio_ = MultiHeadAttention(params_, "qa_attention.audio", d, config_.heads, rng);
  qa_video_norm_ = LayerNorm(params_, "qa_attention.video.norm", d);
  qa_audio_norm_ = LayerNorm(params_, "qa_attention.audio.norm", d);
  for (std::size_t l = 0; l < config_.decoder_layers; ++l) {
    const std::string prefix = "decoder." + std::to_string(l);
    DecoderLayer layer;
    layer.self_attn = MultiHeadAttention(params_, prefix + ".self_attn", d, config_.heads, rng);
    layer.self_norm = LayerNorm(params_, prefix + ".self_norm", d);
    for (auto m : kModalities) {
      layer.cross[modality_index(m)] = MultiHeadAttention(
          params_, prefix + ".cross." + std::string(modality_name(m)), d, config_.heads, rng);
    }
    layer.fusion = Linear(params_, prefix + ".fusion", kModalities.size() * d, d, rng);
    layer.fusion_norm = LayerNorm(params_, prefix + ".fusion_norm", d);
    layer.ffn = FeedForward(params_, prefix + ".ffn", d, config_.d_ff, rng);
    layer.ffn_norm = LayerNorm(params_, prefix + ".ffn_norm", d);
    decoder_.push_back(std::move(layer));
  }
  if (config_.output_layer == OutputLayer::linear) {
    // Same scale as the embedding so both output layers start near uniform.
    out_weight_ = params_.normal("output.weight", {d, config_.vocab_size}, embed_std, rng);
    out_bias_ = params_.zeros("output.bias", {config_.vocab_size});
  }
  positions_ = positional_encoding(config_.max_positions, d);
}

Tensor MstnModel::maybe_dropout(const Tensor& x, Mode mode) const {
  if (!mode.training || config_.dropout == 0.0) return x;
  if (mode.rng == nullptr) throw ContractError("training mode requires an RNG");
  return dropout(x, config_.dropout, true, *mode.rng);
}

Tensor MstnModel::null_sequence() const { return reshape(null_vector_, {1, config_.d_model}); }

Tensor MstnModel::embed_tokens(std::span<const std::int64_t> ids, Mode mode) const {
  const std::size_t len = ids.size();
  if (len > config_.max_positions) {
    throw DataError("sequence of " + std::to_string(len) + " positions exceeds max_positions " +
                    std::to_string(config_.max_positions));
  }
  std::vector<std::int64_t> clean(ids.begin(), ids.end());
  for (auto& id : clean) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) id = kUnkId;
  }
  const std::size_t d = config_.d_model;
  Tensor x = scale(gather_rows(embedding_, clean), std::sqrt(static_cast<double>(d)));
  x = add_constant(x, positions_.data().subspan(0, len * d));
  return maybe_dropout(x, mode);
}

EncodedModality MstnModel::encode_modality(ModalityId m, const ModalityInput& input,
                                           Mode mode) const {
  EncodedModality out;
  out.id = m;
  const std::size_t d = config_.d_model;
  std::size_t len = 0;
  if (is_text(m)) {
    len = input.ids.size();
  } else {
    const std::size_t expected = m == ModalityId::video ? config_.video_dim : config_.audio_dim;
    if (input.feature_dim != expected) {
      throw DataError(std::string(modality_name(m)) + " feature dimension " +
                      std::to_string(input.feature_dim) + " does not match the model's " +
                      std::to_string(expected));
    }
    if (input.features.size() % expected != 0) {
      throw DataError(std::string(modality_name(m)) + " features are not a whole number of frames");
    }
    len = input.features.size() / expected;
  }
  if (!input.mask.empty() && input.mask.size() != len) {
    throw DimensionError(std::string(modality_name(m)) + " mask has " +
                         std::to_string(input.mask.size()) + " entries for " +
                         std::to_string(len) + " positions");
  }
  if (!any_real(input.mask, len)) {
    out.z = null_sequence();
    out.mask = {1};
    return out;
  }

  Tensor x;
  if (is_text(m)) {
    x = embed_tokens(input.ids, mode);
  } else {
    if (len > config_.max_positions) {
      throw DataError(std::string(modality_name(m)) + " sequence exceeds max_positions");
    }
    const Linear& proj = m == ModalityId::video ? video_proj_ : audio_proj_;
    Tensor f = Tensor::from({len, input.feature_dim}, input.features);
    x = add_constant(proj(f), positions_.data().subspan(0, len * d));
    x = maybe_dropout(x, mode);
  }
  const Encoder& enc = encoders_[modality_index(m)];
  Tensor h = enc.norm_in(x);
  h = enc.norm_out(add(h, maybe_dropout(enc.ffn(h), mode)));
  out.z = h;
  out.mask = input.mask.empty() ? std::vector<std::uint8_t>(len, 1) : input.mask;
  return out;
}

EncodedModality MstnModel::question_aware_attention(const EncodedModality& zm,
                                                    const EncodedModality& zq, Mode mode) const {
  if (is_text(zm.id)) {
    throw ContractError("question-aware attention applies to video/audio, not " +
                        std::string(modality_name(zm.id)));
  }
  if (zq.id != ModalityId::question) {
    throw ContractError("question-aware attention needs the question as query");
  }
  const bool video = zm.id == ModalityId::video;
  const MultiHeadAttention& attn = video ? qa_video_ : qa_audio_;
  const LayerNorm& norm = video ? qa_video_norm_ : qa_audio_norm_;
  const Tensor attended = attn(zq.z, zm.z, zm.z, zm.mask, false);
  std::vector<double> weights(zq.mask.begin(), zq.mask.end());
  const Tensor pooled = masked_mean_rows(attended, weights);
  EncodedModality out;
  out.id = zm.id;
  out.z = norm(add_bias(zm.z, maybe_dropout(pooled, mode)));
  out.mask = zm.mask;
  return out;
}

EncodedInputs MstnModel::encode(const ExampleInputs& inputs, Mode mode) const {
  EncodedInputs enc;
  for (auto m : kModalities) {
    enc[modality_index(m)] = encode_modality(m, inputs[modality_index(m)], mode);
  }
  const auto& q = enc[modality_index(ModalityId::question)];
  for (auto m : {ModalityId::video, ModalityId::audio}) {
    enc[modality_index(m)] = question_aware_attention(enc[modality_index(m)], q, mode);
  }
  return enc;
}

Tensor MstnModel::decode_step_features(const Tensor& zy, const EncodedInputs& modalities,
                                       Mode mode, std::size_t layer, Tensor* concat) const {
  if (layer >= decoder_.size()) throw ContractError("decoder layer index out of range");
  const DecoderLayer& dl = decoder_[layer];
  std::vector<Tensor> attended;
  attended.reserve(kModalities.size());
  for (auto m : kModalities) {
    const auto& zm = modalities[modality_index(m)];
    if (!zm.z.defined() || zm.id != m) {
      throw ContractError("decoder input is missing modality " + std::string(modality_name(m)));
    }
    attended.push_back(dl.cross[modality_index(m)](zy, zm.z, zm.z, zm.mask, false));
  }
  Tensor joined = concat_cols(attended);
  if (concat != nullptr) *concat = joined;
  Tensor fused = dl.fusion_norm(add(zy, maybe_dropout(dl.fusion(joined), mode)));
  return dl.ffn_norm(add(fused, maybe_dropout(dl.ffn(fused), mode)));
}

Tensor MstnModel::decoder_states(const EncodedInputs& encoded, std::span<const std::int64_t> prefix,
                                 std::span<const std::uint8_t> prefix_mask, Mode mode) const {
  if (prefix.empty()) throw ContractError("decoder prefix must contain at least <sos>");
  Tensor h = embed_tokens(prefix, mode);
  for (std::size_t l = 0; l < decoder_.size(); ++l) {
    const DecoderLayer& dl = decoder_[l];
    const Tensor self = dl.self_attn(h, h, h, prefix_mask, true);
    h = dl.self_norm(add(h, maybe_dropout(self, mode)));
    h = decode_step_features(h, encoded, mode, l);
  }
  return h;
}

Tensor MstnModel::output_logits(const Tensor& states) const {
  if (config_.output_layer == OutputLayer::wean) return wean_logits(states, embedding_);
  return linear_logits(states, out_weight_, out_bias_);
}

Tensor MstnModel::logits(const EncodedInputs& encoded, std::span<const std::int64_t> prefix,
                         Mode mode) const {
  return output_logits(decoder_states(encoded, prefix, {}, mode));
}

ForwardResult MstnModel::forward_teacher_forced(const Batch& batch, Mode mode) const {
  const std::size_t B = batch.size();
  if (B == 0) throw ContractError("forward_teacher_forced: empty batch");
  const std::size_t width = batch.answer.width;
  if (width < 2) throw ContractError("answers must be wrapped as <sos> ... <eos>");
  const std::size_t T = width - 1;
  const std::size_t n = config_.vocab_size;

  ForwardResult result;
  result.logits = Tensor::zeros({B, T, n});
  auto all_logits = result.logits.data();
  Tensor total;
  for (std::size_t b = 0; b < B; ++b) {
    const EncodedInputs enc = encode(example_inputs(batch, b), mode);
    auto ids = batch.answer.row(b);
    auto mask = batch.answer.row_mask(b);
    const Tensor lg = output_logits(decoder_states(enc, ids.first(T), mask.first(T), mode));
    const auto targets = ids.subspan(1, T);
    const auto target_mask = mask.subspan(1, T);
    const Tensor ce = cross_entropy_sum(lg, targets, target_mask);
    total = total.defined() ? add(total, ce) : ce;

    auto v = lg.data();
    std::copy(v.begin(), v.end(), all_logits.begin() + static_cast<std::ptrdiff_t>(b * T * n));
    for (std::size_t t = 0; t < T; ++t) {
      if (!target_mask[t]) continue;
      ++result.target_tokens;
      const double* row = v.data() + t * n;
      const auto best = std::max_element(row, row + n) - row;
      result.correct_tokens += best == targets[t];
    }
  }
  if (result.target_tokens == 0) throw ContractError("batch has no target tokens");
  result.loss = scale(total, 1.0 / static_cast<double>(result.target_tokens));
  return result;
}

}  // namespace mstn
