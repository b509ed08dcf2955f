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

#include "mstn/tensor.hpp"

namespace mstn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-9;
};

// Per-parameter moments plus the shared step counter.
struct AdamState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One bias-corrected Adam update at learning rate `lr`:
//   w <- w - lr * mhat / (sqrt(vhat) + eps)
// The step counter is incremented before bias correction. Throws NumericError
// without touching parameters or state if any gradient is non-finite.
// Parameters without a gradient buffer are treated as having zero gradient.
void adam_step(std::span<Tensor> params, AdamState& state, double lr);

// d_model^-0.5 * min(step^-0.5, step * warmup^-1.5). step and warmup >= 1.
double noam_lr(std::int64_t step, std::size_t d_model, std::int64_t warmup_steps);

}  // namespace mstn
