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

#include "mstn/nn.hpp"

#include <cmath>

#include "mstn/error.hpp"

namespace mstn {

Tensor ParameterStore::add(const std::string& name, Tensor value) {
  if (find(name).defined()) throw ContractError("parameter registered twice: " + name);
  value.set_requires_grad(true);
  names_.push_back(name);
  tensors_.push_back(value);
  return value;
}

Tensor ParameterStore::zeros(const std::string& name, Shape shape) {
  return add(name, Tensor::zeros(std::move(shape)));
}

Tensor ParameterStore::ones(const std::string& name, Shape shape) {
  return add(name, Tensor::full(std::move(shape), 1.0));
}

Tensor ParameterStore::normal(const std::string& name, Shape shape, double stddev, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.data()) v = rng.normal(0.0, stddev);
  return add(name, t);
}

Tensor ParameterStore::xavier(const std::string& name, Shape shape, Rng& rng) {
  const double fan_in = static_cast<double>(shape.size() >= 2 ? shape[shape.size() - 2] : 1);
  const double fan_out = static_cast<double>(shape.back());
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.data()) v = rng.uniform(-limit, limit);
  return add(name, t);
}

std::size_t ParameterStore::element_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

Tensor ParameterStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return tensors_[i];
  }
  return {};
}

void ParameterStore::zero_grad() {
  for (auto& t : tensors_) t.zero_grad();
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out,
               Rng& rng)
    : weight(store.xavier(name + ".weight", {in, out}, rng)),
      bias(store.zeros(name + ".bias", {out})) {}

Tensor Linear::operator()(const Tensor& x) const { return add_bias(matmul(x, weight), bias); }

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, std::size_t d)
    : gamma(store.ones(name + ".gamma", {d})), beta(store.zeros(name + ".beta", {d})) {}

FeedForward::FeedForward(ParameterStore& store, const std::string& name, std::size_t d_model,
                         std::size_t d_ff, Rng& rng)
    : inner(store, name + ".inner", d_model, d_ff, rng),
      outer(store, name + ".outer", d_ff, d_model, rng) {}

Tensor FeedForward::operator()(const Tensor& x) const { return outer(relu(inner(x))); }

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, const std::string& name,
                                       std::size_t d_model_, std::size_t heads_, Rng& rng)
    : heads(heads_), d_model(d_model_) {
  if (heads == 0 || d_model % heads != 0) {
    throw ConfigError("d_model " + std::to_string(d_model) + " is not divisible by " +
                      std::to_string(heads) + " heads");
  }
  w_query = store.xavier(name + ".w_query", {d_model, d_model}, rng);
  w_key = store.xavier(name + ".w_key", {d_model, d_model}, rng);
  w_value = store.xavier(name + ".w_value", {d_model, d_model}, rng);
  w_out = store.xavier(name + ".w_out", {d_model, d_model}, rng);
}

Tensor MultiHeadAttention::operator()(const Tensor& query, const Tensor& key, const Tensor& value,
                                      std::span<const std::uint8_t> key_mask, bool causal,
                                      std::vector<Tensor>* weights) const {
  if (query.rank() != 2 || key.rank() != 2 || value.rank() != 2) {
    throw DimensionError("attention expects rank-2 query/key/value, got " +
                         shape_str(query.shape()) + ", " + shape_str(key.shape()) + ", " +
                         shape_str(value.shape()));
  }
  const std::size_t lq = query.dim(0), lk = key.dim(0);
  if (value.dim(0) != lk) {
    throw DimensionError("attention key/value lengths differ: " + shape_str(key.shape()) +
                         " vs " + shape_str(value.shape()));
  }
  if (!key_mask.empty() && key_mask.size() != lk) {
    throw DimensionError("attention key mask has " + std::to_string(key_mask.size()) +
                         " entries for " + std::to_string(lk) + " keys");
  }
  if (causal && lq > lk) {
    throw ContractError("causal attention needs at least as many keys as queries");
  }

  std::vector<double> bias(lq * lk, 0.0);
  for (std::size_t i = 0; i < lq; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < lk; ++j) {
      const bool visible = (key_mask.empty() || key_mask[j] != 0) && (!causal || j <= i);
      if (visible) {
        any = true;
      } else {
        bias[i * lk + j] = kMaskValue;
      }
    }
    if (!any) {
      throw ContractError("attention query " + std::to_string(i) + " has no unmasked key");
    }
  }

  const Tensor q = matmul(query, w_query);
  const Tensor k = matmul(key, w_key);
  const Tensor v = matmul(value, w_value);
  const std::size_t dk = head_dim();
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));

  std::vector<Tensor> heads_out;
  heads_out.reserve(heads);
  if (weights != nullptr) weights->clear();
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = heads == 1 ? q : slice_cols(q, h * dk, dk);
    const Tensor kh = heads == 1 ? k : slice_cols(k, h * dk, dk);
    const Tensor vh = heads == 1 ? v : slice_cols(v, h * dk, dk);
    const Tensor scores = add_constant(scale(matmul(qh, transpose(kh)), inv_sqrt), bias);
    const Tensor attn = softmax(scores, -1);
    if (weights != nullptr) weights->push_back(attn);
    heads_out.push_back(matmul(attn, vh));
  }
  const Tensor merged = heads == 1 ? heads_out[0] : concat_cols(heads_out);
  return matmul(merged, w_out);
}

Tensor positional_encoding(std::size_t max_len, std::size_t d_model) {
  if (d_model == 0 || d_model % 2 != 0) {
    throw ConfigError("positional encoding needs an even d_model, got " + std::to_string(d_model));
  }
  Tensor pe = Tensor::zeros({max_len, d_model});
  auto p = pe.data();
  for (std::size_t pos = 0; pos < max_len; ++pos) {
    for (std::size_t i = 0; i < d_model / 2; ++i) {
      const double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d_model));
      p[pos * d_model + 2 * i] = std::sin(angle);
      p[pos * d_model + 2 * i + 1] = std::cos(angle);
    }
  }
  return pe;
}

Tensor wean_logits(const Tensor& o, const Tensor& embedding) {
  if (embedding.rank() != 2) {
    throw DimensionError("wean_logits: embedding table must be [n, d], got " +
                         shape_str(embedding.shape()));
  }
  if (o.dim(-1) != embedding.dim(1)) {
    throw DimensionError("wean_logits: state " + shape_str(o.shape()) +
                         " does not match embedding table " + shape_str(embedding.shape()));
  }
  if (o.rank() == 1) {
    return reshape(matmul(reshape(o, {1, o.numel()}), transpose(embedding)), {embedding.dim(0)});
  }
  return matmul(o, transpose(embedding));
}

Tensor linear_logits(const Tensor& o, const Tensor& weight, const Tensor& bias) {
  if (weight.rank() != 2 || o.dim(-1) != weight.dim(0) || bias.numel() != weight.dim(1)) {
    throw DimensionError("linear_logits: state " + shape_str(o.shape()) + ", weight " +
                         shape_str(weight.shape()) + ", bias " + shape_str(bias.shape()) +
                         " are incompatible");
  }
  if (o.rank() == 1) {
    return add_bias(reshape(matmul(reshape(o, {1, o.numel()}), weight), {weight.dim(1)}), bias);
  }
  return add_bias(matmul(o, weight), bias);
}

}  // namespace mstn
