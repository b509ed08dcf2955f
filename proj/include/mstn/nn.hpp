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
#include <span>
#include <string>
#include <vector>

#include "mstn/ops.hpp"
#include "mstn/rng.hpp"
#include "mstn/tensor.hpp"

namespace mstn {

// Named, ordered collection of trainable tensors. Registration order is the
// checkpoint order and the optimizer's parameter order.
class ParameterStore {
 public:
  Tensor add(const std::string& name, Tensor value);
  Tensor zeros(const std::string& name, Shape shape);
  Tensor ones(const std::string& name, Shape shape);
  Tensor normal(const std::string& name, Shape shape, double stddev, Rng& rng);
  // Glorot/Xavier uniform over the last two dimensions.
  Tensor xavier(const std::string& name, Shape shape, Rng& rng);

  std::size_t size() const { return tensors_.size(); }
  std::size_t element_count() const;
  const std::vector<std::string>& names() const { return names_; }
  std::span<Tensor> tensors() { return tensors_; }
  std::span<const Tensor> tensors() const { return tensors_; }
  // Returns an undefined tensor when `name` is unknown.
  Tensor find(const std::string& name) const;

  void zero_grad();

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

// Evaluation or training pass. Dropout draws from `rng` only when training.
struct Mode {
  bool training = false;
  Rng* rng = nullptr;
};

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
         Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

struct LayerNorm {
  Tensor gamma;
  Tensor beta;
  double eps = 1e-5;

  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, std::size_t d);
  Tensor operator()(const Tensor& x) const { return layer_norm(x, gamma, beta, eps); }
};

// ReLU(x W1 + b1) W2 + b2, applied independently at every position.
struct FeedForward {
  Linear inner;
  Linear outer;

  FeedForward() = default;
  FeedForward(ParameterStore& store, const std::string& name, std::size_t d_model,
              std::size_t d_ff, Rng& rng);
  Tensor operator()(const Tensor& x) const;
};

// Multi-head scaled dot-product attention with bias-free projections.
struct MultiHeadAttention {
  std::size_t heads = 1;
  std::size_t d_model = 0;
  Tensor w_query;
  Tensor w_key;
  Tensor w_value;
  Tensor w_out;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore& store, const std::string& name, std::size_t d_model,
                     std::size_t heads, Rng& rng);

  std::size_t head_dim() const { return d_model / heads; }

  // key_mask[j] != 0 marks a real key; an empty mask means every key is real.
  // With `causal`, query i only sees keys j <= i. Throws ContractError when a
  // query has no visible key. When `weights` is non-null it receives the
  // per-head attention matrices, each [Lq, Lk].
  Tensor operator()(const Tensor& query, const Tensor& key, const Tensor& value,
                    std::span<const std::uint8_t> key_mask, bool causal,
                    std::vector<Tensor>* weights = nullptr) const;
};

// Sinusoidal table [max_len, d_model]; d_model must be even.
Tensor positional_encoding(std::size_t max_len, std::size_t d_model);

// Retrieval-style output scores: logits[t, i] = o[t] . embedding[i].
// Plain dot product, no bias and no 1/sqrt(d) factor, unlike the attention
// scores. Accepts o as [d] or [T, d]; embedding is [n, d].
Tensor wean_logits(const Tensor& o, const Tensor& embedding);

// Conventional projection o W + b with W: [d, n], b: [n].
Tensor linear_logits(const Tensor& o, const Tensor& weight, const Tensor& bias);

}  // namespace mstn
