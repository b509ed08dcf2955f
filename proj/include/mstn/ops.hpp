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
#include <vector>

#include "mstn/rng.hpp"
#include "mstn/tensor.hpp"

// Differentiable tensor operations. Every op records a backward rule on the
// active tape (see TapeScope) when any of its inputs requires a gradient.
// Broadcasting is limited to leading batch dimensions in matmul and to the
// row-vector bias in add_bias.
namespace mstn {

// Additive mask value for excluded attention positions. exp() of it
// underflows to exactly zero after max-subtraction.
inline constexpr double kMaskValue = -1e9;

// [..., p, q] x [..., q, r] -> [..., p, r]. Batch dims must be equal, or one
// operand may be a plain matrix that is broadcast over the other's batch.
Tensor matmul(const Tensor& a, const Tensor& b);

// Swaps the last two dimensions.
Tensor transpose(const Tensor& x);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

// x[..., d] + b[d]
Tensor add_bias(const Tensor& x, const Tensor& b);

// x + c where c carries no gradient (masks, positional encodings).
Tensor add_constant(const Tensor& x, std::span<const double> c);

Tensor relu(const Tensor& x);

Tensor softmax(const Tensor& x, int axis = -1);
Tensor log_softmax(const Tensor& x);

// Normalises over the last axis, then gamma * xhat + beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-5);

// Inverted dropout. Throws ConfigError unless 0 <= p < 1.
Tensor dropout(const Tensor& x, double p, bool training, Rng& rng);

Tensor reshape(const Tensor& x, Shape shape);

// Concatenation along the last axis of rank-2 tensors with equal row counts.
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t width);

// Rows of `table` at `ids`: [n, d] -> [ids.size(), d].
Tensor gather_rows(const Tensor& table, std::span<const std::int64_t> ids);

// Weighted sum over rows divided by the weight total: [L, d] -> [d].
// Rows with weight 0 contribute nothing, including to the gradient.
Tensor masked_mean_rows(const Tensor& x, std::span<const double> weights);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Sum over rows t with mask[t] != 0 of -log softmax(logits[t])[targets[t]].
// logits: [T, n]. Returns a scalar tensor.
Tensor cross_entropy_sum(const Tensor& logits, std::span<const std::int64_t> targets,
                         std::span<const std::uint8_t> mask);

}  // namespace mstn
