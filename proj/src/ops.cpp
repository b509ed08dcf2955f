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

#include "mstn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string>

#include "mstn/error.hpp"

namespace mstn {

namespace {

GradTape* tape_for(std::initializer_list<const Tensor*> inputs) {
  GradTape* tape = active_tape();
  if (tape == nullptr) return nullptr;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return tape;
  }
  return nullptr;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
  }
}

void require_rank2(const Tensor& x, const char* op) {
  if (x.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a rank-2 tensor, got " +
                         shape_str(x.shape()));
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw DimensionError("matmul: operands must have rank >= 2, got " + shape_str(a.shape()) +
                         " and " + shape_str(b.shape()));
  }
  const std::size_t p = a.dim(-2), q = a.dim(-1), r = b.dim(-1);
  if (b.dim(-2) != q) {
    throw DimensionError("matmul: inner dimensions differ for " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
  }
  const Shape a_batch(a.shape().begin(), a.shape().end() - 2);
  const Shape b_batch(b.shape().begin(), b.shape().end() - 2);
  if (!a_batch.empty() && !b_batch.empty() && a_batch != b_batch) {
    throw DimensionError("matmul: batch dimensions not broadcastable for " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const Shape& batch = a_batch.empty() ? b_batch : a_batch;
  const std::size_t nb = shape_numel(batch);
  const std::size_t a_stride = a_batch.empty() ? 0 : p * q;
  const std::size_t b_stride = b_batch.empty() ? 0 : q * r;

  Shape out_shape = batch;
  out_shape.push_back(p);
  out_shape.push_back(r);
  Tensor out = Tensor::zeros(out_shape);
  {
    const double* A = a.data().data();
    const double* B = b.data().data();
    double* C = out.data().data();
    for (std::size_t bi = 0; bi < nb; ++bi) {
      const double* Ab = A + bi * a_stride;
      const double* Bb = B + bi * b_stride;
      double* Cb = C + bi * p * r;
      for (std::size_t i = 0; i < p; ++i) {
        double* crow = Cb + i * r;
        for (std::size_t k = 0; k < q; ++k) {
          const double aik = Ab[i * q + k];
          const double* brow = Bb + k * r;
          for (std::size_t j = 0; j < r; ++j) crow[j] += aik * brow[j];
        }
      }
    }
  }

  if (auto* tape = tape_for({&a, &b})) {
    out.set_requires_grad(true);
    tape->record({a, b}, out, [a, b, out, nb, p, q, r, a_stride, b_stride]() mutable {
      const double* dC = out.grad().data();
      const double* A = a.data().data();
      const double* B = b.data().data();
      if (a.requires_grad()) {
        double* dA = a.grad().data();
        for (std::size_t bi = 0; bi < nb; ++bi) {
          const double* Bb = B + bi * b_stride;
          const double* dCb = dC + bi * p * r;
          double* dAb = dA + bi * a_stride;
          for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t k = 0; k < q; ++k) {
              double s = 0.0;
              for (std::size_t j = 0; j < r; ++j) s += dCb[i * r + j] * Bb[k * r + j];
              dAb[i * q + k] += s;
            }
          }
        }
      }
      if (b.requires_grad()) {
        double* dB = b.grad().data();
        for (std::size_t bi = 0; bi < nb; ++bi) {
          const double* Ab = A + bi * a_stride;
          const double* dCb = dC + bi * p * r;
          double* dBb = dB + bi * b_stride;
          for (std::size_t i = 0; i < p; ++i) {
            for (std::size_t k = 0; k < q; ++k) {
              const double aik = Ab[i * q + k];
              for (std::size_t j = 0; j < r; ++j) dBb[k * r + j] += aik * dCb[i * r + j];
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor transpose(const Tensor& x) {
  if (x.rank() < 2) {
    throw DimensionError("transpose: rank must be >= 2, got " + shape_str(x.shape()));
  }
  const std::size_t m = x.dim(-2), n = x.dim(-1);
  const std::size_t nb = x.numel() / (m * n);
  Shape shape = x.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  Tensor out = Tensor::zeros(shape);
  auto src = x.data();
  auto dst = out.data();
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) dst[b * m * n + j * m + i] = src[b * m * n + i * n + j];
    }
  }
  if (auto* tape = tape_for({&x})) {
    out.set_requires_grad(true);
    tape->record({x}, out, [x, out, nb, m, n]() mutable {
      auto g = out.grad();
      auto dx = x.grad();
      for (std::size_t b = 0; b < nb; ++b) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) dx[b * m * n + i * n + j] += g[b * m * n + j * m + i];
        }
      }
    });
  }
  return out;
}

namespace {

template <typename Fwd>
Tensor binary_same_shape(const Tensor& a, const Tensor& b, const char* name, Fwd fwd,
                         double sign_b, bool is_mul) {
  require_same_shape(a, b, name);
  Tensor out = Tensor::zeros(a.shape());
  {
    auto x = a.data();
    auto y = b.data();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = fwd(x[i], y[i]);
  }
  if (auto* tape = tape_for({&a, &b})) {
    out.set_requires_grad(true);
    tape->record({a, b}, out, [a, b, out, sign_b, is_mul]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto da = a.grad();
        auto y = b.data();
        for (std::size_t i = 0; i < g.size(); ++i) da[i] += is_mul ? g[i] * y[i] : g[i];
      }
      if (b.requires_grad()) {
        auto db = b.grad();
        auto x = a.data();
        for (std::size_t i = 0; i < g.size(); ++i) db[i] += is_mul ? g[i] * x[i] : sign_b * g[i];
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_same_shape(a, b, "add", [](double x, double y) { return x + y; }, 1.0, false);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_same_shape(a, b, "sub", [](double x, double y) { return x - y; }, -1.0, false);
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_same_shape(a, b, "mul", [](double x, double y) { return x * y; }, 1.0, true);
}

Tensor scale(const Tensor& x, double factor) {
  Tensor out = Tensor::zeros(x.shape());
  {
    auto s = x.data();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = s[i] * factor;
  }
  if (auto* tape = tape_for({&x})) {
    out.set_requires_grad(true);
    tape->record({x}, out, [x, out, factor]() mutable {
      auto g = out.grad();
      auto dx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * factor;
    });
  }
  return out;
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  const std::size_t d = x.dim(-1);
  if (b.numel() != d) {
    throw DimensionError("add_bias: bias " + shape_str(b.shape()) + " does not match " +
                         shape_str(x.shape()));
  }
  Tensor out = Tensor::zeros(x.shape());
  const std::size_t rows = x.numel() / d;
  {
    auto s = x.data();
    auto bb = b.data();
    auto o = out.data();
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < d; ++j) o[i * d + j] = s[i * d + j] + bb[j];
    }
  }
  if (auto* tape = tape_for({&x, &b})) {
    out.set_requires_grad(true);
    tape->record({x, b}, out, [x, b, out, rows, d]() mutable {
      auto g = out.grad();
      if (x.requires_grad()) {
        auto dx = x.grad();
        for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
      }
      if (b.requires_grad()) {
        auto db = b.grad();
        for (std::size_t i = 0; i < rows; ++i) {
          for (std::size_t j = 0; j < d; ++j) db[j] += g[i * d + j];
        }
      }
    });
  }
  return out;
}

Tensor add_constant(const Tensor& x, std::span<const double> c) {
  if (c.size() != x.numel()) {
    throw DimensionError("add_constant: " + std::to_string(c.size()) +
                         " values for shape " + shape_str(x.shape()));
  }
  Tensor out = Tensor::zeros(x.shape());
  {
    auto s = x.data();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = s[i] + c[i];
  }
  if (auto* tape = tape_for({&x})) {
    out.set_requires_grad(true);
    tape->record({x}, out, [x, out]() mutable {
      auto g = out.grad();
      auto dx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
    });
  }
  return out;
}

Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape());
  {
    auto s = x.data();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = s[i] > 0.0 ? s[i] : 0.0;
  }
  if (auto* tape = tape_for({&x})) {
    out.set_requires_grad(true);
    tape->record({x}, out, [x, out]() mutable {
      auto g = out.grad();
      auto s = x.data();
      auto dx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (s[i] > 0.0) dx[i] += g[i];
      }
    });
  }
  return out;
}

Tensor softmax(const Tensor& x, int axis) {
  const int r = static_cast<int>(x.rank());
  const int ax = axis < 0 ? r + axis : axis;
  if (ax < 0 || ax >= r) {
    throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " +
                         shape_str(x.shape()));
  }
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= x.shape()[static_cast<std::size_t>(i)];
  for (int i = ax + 1; i < r; ++i) inner *= x.shape()[static_cast<std::size_t>(i)];
  const std::size_t n = x.shape()[static_cast<std::size_t>(ax)];

  Tensor out = Tensor::zeros(x.shape());
  {
    auto s = x.data();
    auto o = out.data();
    for (std::size_t a = 0; a < outer; ++a) {
      for (std::size_t c = 0; c < inner; ++c) {
        const std::size_t base = a * n * inner + c;
        double mx = s[base];
        for (std::size_t k = 1; k < n; ++k) mx = std::max(mx, s[base + k * inner]);
        double total = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double e = std::exp(s[base + k * inner] - mx);
          o[base + k * inner] = e;
          total += e;
        }
        for (std::size_t k = 0; k < n; ++k) o[base + k * inner] /= total;
      }
    }
  }
  if (auto* tape = tape_for({&x})) {
    out.set_requires_grad(true);
    tape->record({x}, out, [x, out, outer, inner, n]() mutable {
      auto g = out.grad();
      auto y = out.data();
      auto dx = x.grad();
      for (std::size_t a = 0; a < outer; ++a) {
        for (std::size_t c = 0; c < inner; ++c) {
          const std::size_t base = a * n * inner + c;
          double dot = 0.0;
          for (std::size_t k = 0; k < n; ++k) dot += y[base + k * inner] * g[base + k * inner];
          for (std::size_t k = 0; k < n; ++k) {
            const std::size_t i = base + k * inner;
            dx[i] += y[i] * (g[i] - dot);
          }
        }
      }
    });
  }
  return out;
}

Tensor log_softmax(const Tensor& x) {
  const std::size_t n = x.dim(-1);
  const std::size_t rows = x.numel() / n;
  Tensor out = Tensor::zeros(x.shape());
  {
    auto s = x.data();
    auto o = out.data();
    for (std::size_t i = 0; i < rows; ++i) {
      const double* row = s.data() + i * n;
      const double mx = *std::max_element(row, row + n);
      double total = 0.0;
      for (std::size_t k = 0; k < n; ++k) total += std::exp(row[k] - mx);
      const double lse = mx + std::log(total);
      for (std::size_t k = 0; k < n; ++k) o[i * n + k] = row[k] - lse;
    }
  }
  if (auto* tape = tape_for({&x})) {
    out.set_requires_grad(true);
    tape->record({x}, out, [x, out, rows, n]() mutable {
      auto g = out.grad();
      auto y = out.data();
      auto dx = x.grad();
      for (std::size_t i = 0; i < rows; ++i) {
        double gsum = 0.0;
        for (std::size_t k = 0; k < n; ++k) gsum += g[i * n + k];
        for (std::size_t k = 0; k < n; ++k) {
          dx[i * n + k] += g[i * n + k] - std::exp(y[i * n + k]) * gsum;
        }
      }
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const std::size_t d = x.dim(-1);
  if (gamma.numel() != d || beta.numel() != d) {
    throw DimensionError("layer_norm: gamma/beta " + shape_str(gamma.shape()) + "/" +
                         shape_str(beta.shape()) + " do not match " + shape_str(x.shape()));
  }
  const std::size_t rows = x.numel() / d;
  std::vector<double> xhat(x.numel());
  std::vector<double> rstd(rows);
  Tensor out = Tensor::zeros(x.shape());
  {
    auto s = x.data();
    auto g = gamma.data();
    auto b = beta.data();
    auto o = out.data();
    for (std::size_t i = 0; i < rows; ++i) {
      const double* row = s.data() + i * d;
      double mu = 0.0;
      for (std::size_t j = 0; j < d; ++j) mu += row[j];
      mu /= static_cast<double>(d);
      double var = 0.0;
      for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
      var /= static_cast<double>(d);
      rstd[i] = 1.0 / std::sqrt(var + eps);
      for (std::size_t j = 0; j < d; ++j) {
        const double h = (row[j] - mu) * rstd[i];
        xhat[i * d + j] = h;
        o[i * d + j] = g[j] * h + b[j];
      }
    }
  }
  if (auto* tape = tape_for({&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    tape->record({x, gamma, beta}, out,
                 [x, gamma, beta, out, xhat = std::move(xhat), rstd = std::move(rstd), rows,
                  d]() mutable {
                   auto gy = out.grad();
                   auto gm = gamma.data();
                   if (gamma.requires_grad()) {
                     auto dg = gamma.grad();
                     for (std::size_t i = 0; i < rows; ++i) {
                       for (std::size_t j = 0; j < d; ++j) dg[j] += gy[i * d + j] * xhat[i * d + j];
                     }
                   }
                   if (beta.requires_grad()) {
                     auto db = beta.grad();
                     for (std::size_t i = 0; i < rows; ++i) {
                       for (std::size_t j = 0; j < d; ++j) db[j] += gy[i * d + j];
                     }
                   }
                   if (x.requires_grad()) {
                     auto dx = x.grad();
                     const double inv_d = 1.0 / static_cast<double>(d);
                     for (std::size_t i = 0; i < rows; ++i) {
                       double m1 = 0.0, m2 = 0.0;
                       for (std::size_t j = 0; j < d; ++j) {
                         const double dh = gy[i * d + j] * gm[j];
                         m1 += dh;
                         m2 += dh * xhat[i * d + j];
                       }
                       m1 *= inv_d;
                       m2 *= inv_d;
                       for (std::size_t j = 0; j < d; ++j) {
                         const double dh = gy[i * d + j] * gm[j];
                         dx[i * d + j] += rstd[i] * (dh - m1 - xhat[i * d + j] * m2);
                       }
                     }
                   }
                 });
  }
  return out;
}

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ConfigError("dropout probability must be in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) return x;
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.numel());
  for (auto& m : mask) m = rng.uniform() >= p ? keep_scale : 0.0;
  Tensor out = Tensor::zeros(x.shape());
  {
    auto s = x.data();
    auto o = out.data();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = s[i] * mask[i];
  }
  if (auto* tape = tape_for({&x})) {
    out.set_requires_grad(true);
    tape->record({x}, out, [x, out, mask = std::move(mask)]() mutable {
      auto g = out.grad();
      auto dx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * mask[i];
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                         shape_str(shape));
  }
  Tensor out = Tensor::from(std::move(shape), x.values());
  if (auto* tape = tape_for({&x})) {
    out.set_requires_grad(true);
    tape->record({x}, out, [x, out]() mutable {
      auto g = out.grad();
      auto dx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
    });
  }
  return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t rows = parts[0].rank() == 2 ? parts[0].dim(0) : 0;
  std::size_t width = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.dim(0) != rows) {
      throw DimensionError("concat_cols: row mismatch " + shape_str(parts[0].shape()) + " vs " +
                           shape_str(p.shape()));
    }
    width += p.dim(1);
  }
  Tensor out = Tensor::zeros({rows, width});
  auto o = out.data();
  std::size_t offset = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(1);
    auto s = p.data();
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy_n(s.data() + i * w, w, o.data() + i * width + offset);
    }
    offset += w;
    any_grad = any_grad || p.requires_grad();
  }
  GradTape* tape = active_tape();
  if (tape != nullptr && any_grad) {
    out.set_requires_grad(true);
    std::vector<Tensor> inputs(parts.begin(), parts.end());
    tape->record(inputs, out, [inputs, out, rows, width]() mutable {
      auto g = out.grad();
      std::size_t off = 0;
      for (auto& p : inputs) {
        const std::size_t w = p.dim(1);
        if (p.requires_grad()) {
          auto dp = p.grad();
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < w; ++j) dp[i * w + j] += g[i * width + off + j];
          }
        }
        off += w;
      }
    });
  }
  return out;
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t width) {
  require_rank2(x, "slice_cols");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (width == 0 || begin + width > cols) {
    throw DimensionError("slice_cols: columns [" + std::to_string(begin) + ", " +
                         std::to_string(begin + width) + ") out of range for " +
                         shape_str(x.shape()));
  }
  Tensor out = Tensor::zeros({rows, width});
  {
    auto s = x.data();
    auto o = out.data();
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy_n(s.data() + i * cols + begin, width, o.data() + i * width);
    }
  }
  if (auto* tape = tape_for({&x})) {
    out.set_requires_grad(true);
    tape->record({x}, out, [x, out, rows, cols, begin, width]() mutable {
      auto g = out.grad();
      auto dx = x.grad();
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < width; ++j) dx[i * cols + begin + j] += g[i * width + j];
      }
    });
  }
  return out;
}

Tensor gather_rows(const Tensor& table, std::span<const std::int64_t> ids) {
  require_rank2(table, "gather_rows");
  if (ids.empty()) throw ContractError("gather_rows: empty id list");
  const std::size_t n = table.dim(0), d = table.dim(1);
  for (auto id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= n) {
      throw ContractError("gather_rows: id " + std::to_string(id) + " outside table of " +
                          std::to_string(n) + " rows");
    }
  }
  std::vector<std::int64_t> idx(ids.begin(), ids.end());
  Tensor out = Tensor::zeros({idx.size(), d});
  {
    auto s = table.data();
    auto o = out.data();
    for (std::size_t i = 0; i < idx.size(); ++i) {
      std::copy_n(s.data() + static_cast<std::size_t>(idx[i]) * d, d, o.data() + i * d);
    }
  }
  if (auto* tape = tape_for({&table})) {
    out.set_requires_grad(true);
    tape->record({table}, out, [table, out, idx = std::move(idx), d]() mutable {
      auto g = out.grad();
      auto dt = table.grad();
      for (std::size_t i = 0; i < idx.size(); ++i) {
        double* row = dt.data() + static_cast<std::size_t>(idx[i]) * d;
        for (std::size_t j = 0; j < d; ++j) row[j] += g[i * d + j];
      }
    });
  }
  return out;
}

Tensor masked_mean_rows(const Tensor& x, std::span<const double> weights) {
  require_rank2(x, "masked_mean_rows");
  const std::size_t rows = x.dim(0), d = x.dim(1);
  if (weights.size() != rows) {
    throw DimensionError("masked_mean_rows: " + std::to_string(weights.size()) +
                         " weights for " + shape_str(x.shape()));
  }
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw ContractError("masked_mean_rows: weights sum to zero");
  std::vector<double> w(weights.begin(), weights.end());
  for (auto& v : w) v /= total;
  Tensor out = Tensor::zeros({d});
  {
    auto s = x.data();
    auto o = out.data();
    for (std::size_t i = 0; i < rows; ++i) {
      if (w[i] == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) o[j] += w[i] * s[i * d + j];
    }
  }
  if (auto* tape = tape_for({&x})) {
    out.set_requires_grad(true);
    tape->record({x}, out, [x, out, w = std::move(w), rows, d]() mutable {
      auto g = out.grad();
      auto dx = x.grad();
      for (std::size_t i = 0; i < rows; ++i) {
        if (w[i] == 0.0) continue;
        for (std::size_t j = 0; j < d; ++j) dx[i * d + j] += w[i] * g[j];
      }
    });
  }
  return out;
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  Tensor out = Tensor::scalar(total);
  if (auto* tape = tape_for({&x})) {
    out.set_requires_grad(true);
    tape->record({x}, out, [x, out]() mutable {
      const double g = out.grad()[0];
      for (auto& v : x.grad()) v += g;
    });
  }
  return out;
}

Tensor mean(const Tensor& x) { return scale(sum(x), 1.0 / static_cast<double>(x.numel())); }

Tensor cross_entropy_sum(const Tensor& logits, std::span<const std::int64_t> targets,
                         std::span<const std::uint8_t> mask) {
  require_rank2(logits, "cross_entropy_sum");
  const std::size_t rows = logits.dim(0), n = logits.dim(1);
  if (targets.size() != rows || mask.size() != rows) {
    throw DimensionError("cross_entropy_sum: " + std::to_string(targets.size()) +
                         " targets / " + std::to_string(mask.size()) + " mask entries for " +
                         shape_str(logits.shape()));
  }
  std::vector<double> probs(rows * n, 0.0);
  double total = 0.0;
  auto s = logits.data();
  for (std::size_t i = 0; i < rows; ++i) {
    if (!mask[i]) continue;
    const auto t = targets[i];
    if (t < 0 || static_cast<std::size_t>(t) >= n) {
      throw ContractError("cross_entropy_sum: target " + std::to_string(t) +
                          " outside vocabulary of " + std::to_string(n));
    }
    const double* row = s.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double z = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double e = std::exp(row[k] - mx);
      probs[i * n + k] = e;
      z += e;
    }
    for (std::size_t k = 0; k < n; ++k) probs[i * n + k] /= z;
    total += mx + std::log(z) - row[static_cast<std::size_t>(t)];
  }
  Tensor out = Tensor::scalar(total);
  if (auto* tape = tape_for({&logits})) {
    out.set_requires_grad(true);
    std::vector<std::int64_t> tg(targets.begin(), targets.end());
    std::vector<std::uint8_t> mk(mask.begin(), mask.end());
    tape->record({logits}, out,
                 [logits, out, probs = std::move(probs), tg = std::move(tg),
                  mk = std::move(mk), rows, n]() mutable {
                   const double g = out.grad()[0];
                   auto dx = logits.grad();
                   for (std::size_t i = 0; i < rows; ++i) {
                     if (!mk[i]) continue;
                     for (std::size_t k = 0; k < n; ++k) dx[i * n + k] += g * probs[i * n + k];
                     dx[i * n + static_cast<std::size_t>(tg[i])] -= g;
                   }
                 });
  }
  return out;
}

}  // namespace mstn
