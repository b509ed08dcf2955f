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

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mstn/dataset.hpp"
#include "mstn/ops.hpp"
#include "mstn/rng.hpp"
#include "mstn/synthetic.hpp"
#include "mstn/tensor.hpp"

namespace mstn::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  std::string worst;  // name of the tensor with the largest error
  std::size_t elements = 0;
};

// Compares reverse-mode gradients of `loss_fn` with central differences,
// tensor by tensor: ||analytic - numeric|| / max(||analytic||, ||numeric||).
// Tensors whose both gradients vanish count as exact.
inline GradCheck grad_check(const std::vector<std::pair<std::string, Tensor>>& params,
                            const std::function<Tensor()>& loss_fn, double h = 1e-5) {
  for (const auto& [name, t] : params) {
    t.zero_grad();
    t.grad();
  }
  {
    GradTape tape;
    TapeScope scope(tape);
    Tensor loss = loss_fn();
    tape.backward(loss);
  }
  GradCheck out;
  for (const auto& [name, t] : params) {
    Tensor p = t;
    std::vector<double> analytic(t.grad().begin(), t.grad().end());
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double saved = p.data()[i];
      p.data()[i] = saved + h;
      const double up = loss_fn().item();
      p.data()[i] = saved - h;
      const double down = loss_fn().item();
      p.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      diff2 += (analytic[i] - numeric) * (analytic[i] - numeric);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
    out.elements += p.numel();
    const double denom = std::sqrt(std::max(a2, n2));
    const double err = denom < 1e-10 ? 0.0 : std::sqrt(diff2) / denom;
    if (out.worst.empty() || err > out.max_rel_error) {
      out.max_rel_error = err;
      out.worst = name;
    }
  }
  return out;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double sd = 1.0, bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.normal(0.0, sd);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Small synthetic split for model-level tests.
inline std::vector<DialogExample> small_dataset(std::size_t count, std::uint64_t seed,
                                                std::size_t dim = 8) {
  SyntheticTaskSpec spec;
  spec.video_dim = dim;
  spec.audio_dim = dim;
  spec.attributes = 4;
  spec.pattern_seed = 1;
  return generate_synthetic(spec, count, seed).examples;
}

}  // namespace mstn::testing
