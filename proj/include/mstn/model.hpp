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

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mstn/batch.hpp"
#include "mstn/nn.hpp"
#include "mstn/tensor.hpp"

namespace mstn {

enum class ModalityId { question, caption, history, video, audio };

// Fixed order used for the decoder's cross-attentions and their concatenation.
inline constexpr std::array<ModalityId, 5> kModalities = {
    ModalityId::question, ModalityId::caption, ModalityId::history, ModalityId::video,
    ModalityId::audio};

std::string_view modality_name(ModalityId m);
constexpr bool is_text(ModalityId m) {
  return m == ModalityId::question || m == ModalityId::caption || m == ModalityId::history;
}

enum class OutputLayer { wean, linear };
std::string_view output_layer_name(OutputLayer layer);
OutputLayer parse_output_layer(std::string_view name);

struct MstnConfig {
  std::size_t d_model = 512;
  std::size_t heads = 8;
  std::size_t decoder_layers = 1;
  std::size_t d_ff = 512;
  double dropout = 0.2;
  std::size_t vocab_size = 0;
  std::size_t max_decode_len = 30;
  OutputLayer output_layer = OutputLayer::wean;
  std::size_t video_dim = 16;
  std::size_t audio_dim = 16;
  std::size_t max_positions = 256;  // rows of the positional-encoding table

  // Throws ConfigError when an invariant fails.
  void validate() const;

  // Ordered key=value pairs; parse() rejects unknown keys.
  std::vector<std::pair<std::string, std::string>> to_pairs() const;
  static MstnConfig from_pairs(const std::vector<std::pair<std::string, std::string>>& pairs);
};

// One source stream for a single example. Text modalities use `ids`,
// video/audio use `features` ([length, feature_dim] row-major). `mask` marks
// real positions; an empty mask means every position is real.
struct ModalityInput {
  std::vector<std::int64_t> ids;
  std::vector<double> features;
  std::size_t feature_dim = 0;
  std::vector<std::uint8_t> mask;
};

struct EncodedModality {
  ModalityId id = ModalityId::question;
  Tensor z;                        // [L, d_model]
  std::vector<std::uint8_t> mask;  // L entries, at least one non-zero
};

using ExampleInputs = std::array<ModalityInput, 5>;  // indexed by kModalities order
using EncodedInputs = std::array<EncodedModality, 5>;

// Slices row `b` of a padded batch into per-modality inputs.
ExampleInputs example_inputs(const Batch& batch, std::size_t b);

struct ForwardResult {
  Tensor loss;    // scalar mean over real target tokens (on the tape when training)
  Tensor logits;  // [B, T, n], detached copy; pad target rows included
  std::size_t target_tokens = 0;
  std::size_t correct_tokens = 0;  // argmax == target over real positions
};

class MstnModel {
 public:
  MstnModel(const MstnConfig& config, std::uint64_t seed);

  const MstnConfig& config() const { return config_; }
  ParameterStore& parameters() { return params_; }
  const ParameterStore& parameters() const { return params_; }
  const Tensor& embedding() const { return embedding_; }

  // Positional encoding, layer norm and a residual feed-forward block.
  // Empty or fully padded input becomes the single learned null vector.
  EncodedModality encode_modality(ModalityId m, const ModalityInput& input, Mode mode) const;

  // Conditions a video/audio sequence on the question: the question-queried
  // attention output is mean-pooled over real question positions and added to
  // every row of Z_m, followed by layer norm. Length is preserved.
  EncodedModality question_aware_attention(const EncodedModality& zm, const EncodedModality& zq,
                                           Mode mode) const;

  // All five modalities, with question-aware attention applied to video/audio.
  EncodedInputs encode(const ExampleInputs& inputs, Mode mode) const;

  // Cross-attends the self-attended target states to every modality,
  // concatenates the five results ([t, 5 d]), projects back to d and applies
  // the residual/FFN sublayers of decoder layer `layer`. When `concat` is
  // non-null it receives the concatenated tensor.
  Tensor decode_step_features(const Tensor& zy, const EncodedInputs& modalities, Mode mode,
                              std::size_t layer = 0, Tensor* concat = nullptr) const;

  // Decoder output states [t, d] for target prefix `prefix` (starting with sos).
  // `prefix_mask` marks real prefix positions (empty = all real).
  Tensor decoder_states(const EncodedInputs& encoded, std::span<const std::int64_t> prefix,
                        std::span<const std::uint8_t> prefix_mask, Mode mode) const;

  // Output layer: WEAN scores against the shared embedding, or the untied
  // linear projection.
  Tensor output_logits(const Tensor& states) const;

  Tensor logits(const EncodedInputs& encoded, std::span<const std::int64_t> prefix,
                Mode mode) const;

  // Teacher-forced pass. Throws ContractError on an empty batch.
  ForwardResult forward_teacher_forced(const Batch& batch, Mode mode) const;

 private:
  struct Encoder {
    LayerNorm norm_in;
    FeedForward ffn;
    LayerNorm norm_out;
  };
  struct DecoderLayer {
    MultiHeadAttention self_attn;
    LayerNorm self_norm;
    std::array<MultiHeadAttention, 5> cross;
    Linear fusion;
    LayerNorm fusion_norm;
    FeedForward ffn;
    LayerNorm ffn_norm;
  };

  Tensor embed_tokens(std::span<const std::int64_t> ids, Mode mode) const;
  Tensor maybe_dropout(const Tensor& x, Mode mode) const;
  Tensor null_sequence() const;

  MstnConfig config_;
  ParameterStore params_;
  Tensor embedding_;  // [n, d], shared by every text input and the WEAN output
  Tensor null_vector_;
  Linear video_proj_;
  Linear audio_proj_;
  std::array<Encoder, 5> encoders_;
  MultiHeadAttention qa_video_;
  MultiHeadAttention qa_audio_;
  LayerNorm qa_video_norm_;
  LayerNorm qa_audio_norm_;
  std::vector<DecoderLayer> decoder_;
  Tensor out_weight_;  // linear output layer only
  Tensor out_bias_;
  Tensor positions_;
};

}  // namespace mstn
