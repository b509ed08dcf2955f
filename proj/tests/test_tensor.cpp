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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mstn/error.hpp"
#include "mstn/ops.hpp"
#include "mstn/optim.hpp"
#include "test_util.hpp"

using namespace mstn;
using mstn::testing::grad_check;
using mstn::testing::random_tensor;

namespace {

void expect_values(const Tensor& t, std::vector<double> expected, double tol) {
  ASSERT_EQ(t.numel(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(t.at(i), expected[i], tol) << i;
}

// Weighted sum with fixed random weights so every output element matters.
Tensor probe_loss(const Tensor& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum(mul(y, random_tensor(y.shape(), rng, 1.0, false)));
}

}  // namespace

TEST(Tensor, RejectsZeroDimensionsAndMismatchedData) {
  EXPECT_THROW(Tensor::zeros({2, 0}), DimensionError);
  EXPECT_THROW(Tensor::from({2, 2}, {1, 2, 3}), DimensionError);
  EXPECT_EQ(Tensor::zeros({2, 3}).numel(), 6u);
}

TEST(Tensor, GradBufferMatchesData) {
  Tensor t = Tensor::zeros({3, 2}, true);
  EXPECT_FALSE(t.has_grad());
  EXPECT_EQ(t.grad().size(), t.numel());
}

TEST(Matmul, IdentityAndDotExamples) {
  expect_values(matmul(Tensor::from({2, 2}, {1, 0, 0, 1}), Tensor::from({2, 2}, {5, 6, 7, 8})),
                {5, 6, 7, 8}, 0.0);
  expect_values(matmul(Tensor::from({1, 2}, {1, 2}), Tensor::from({2, 1}, {3, 4})), {11}, 0.0);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({4, 2}));
    FAIL();
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4, 2]"), std::string::npos) << msg;
  }
}

TEST(Matmul, GradientOfSumIsOnesTimesBTransposed) {
  Rng rng(1);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng, 1.0, false);
  GradTape tape;
  {
    TapeScope scope(tape);
    tape.backward(sum(matmul(a, b)));
  }
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < 4; ++k) {
      EXPECT_NEAR(a.grad()[i * 4 + k], b.at(k, 0) + b.at(k, 1), 1e-12);
    }
  }
  const auto gc = grad_check({{"a", a}}, [&] { return sum(matmul(a, b)); }, 1e-6);
  EXPECT_LT(gc.max_rel_error, 1e-6);
}

TEST(Matmul, BatchedAndBroadcastGradients) {
  Rng rng(2);
  Tensor a = random_tensor({2, 3, 4}, rng);
  Tensor b = random_tensor({2, 4, 5}, rng);
  Tensor w = random_tensor({4, 5}, rng);
  EXPECT_LT(grad_check({{"a", a}, {"b", b}}, [&] { return probe_loss(matmul(a, b)); }).max_rel_error,
            1e-6);
  EXPECT_LT(grad_check({{"a", a}, {"w", w}}, [&] { return probe_loss(matmul(a, w)); }).max_rel_error,
            1e-6);
}

TEST(Softmax, WorkedExamples) {
  expect_values(softmax(Tensor::from({2}, {0, 0})), {0.5, 0.5}, 1e-15);
  expect_values(softmax(Tensor::from({3}, {1, 2, 3})), {0.09003, 0.24473, 0.66524}, 1e-5);
  expect_values(softmax(Tensor::from({2}, {1000, 1000})), {0.5, 0.5}, 1e-15);
}

TEST(Softmax, SlicesSumToOneAlongAnyAxis) {
  Rng rng(3);
  Tensor x = random_tensor({3, 4, 5}, rng, 5.0, false);
  for (int axis : {0, 1, 2, -1}) {
    Tensor y = softmax(x, axis);
    const std::size_t ax = axis < 0 ? 2 : static_cast<std::size_t>(axis);
    const std::size_t n = x.shape()[ax];
    std::size_t stride = 1;
    for (std::size_t d = ax + 1; d < 3; ++d) stride *= x.shape()[d];
    for (std::size_t start = 0; start < y.numel(); ++start) {
      if ((start / stride) % n != 0) continue;
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        EXPECT_GT(y.at(start + k * stride), 0.0);
        s += y.at(start + k * stride);
      }
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
  }
}

TEST(LayerNorm, WorkedExamples) {
  const Tensor ones = Tensor::full({3}, 1.0);
  const Tensor zeros = Tensor::zeros({3});
  expect_values(layer_norm(Tensor::from({3}, {5, 5, 5}), ones, zeros, 1e-5), {0, 0, 0}, 0.0);
  expect_values(layer_norm(Tensor::from({3}, {1, 2, 3}), ones, zeros, 0.0),
                {-1.22474, 0, 1.22474}, 1e-5);
  const Tensor beta = Tensor::from({3}, {0.5, -1, 2});
  expect_values(layer_norm(Tensor::from({3}, {1, 7, 3}), Tensor::zeros({3}), beta), {0.5, -1, 2},
                0.0);
}

TEST(LayerNorm, NormalisedMoments) {
  Rng rng(4);
  Tensor x = random_tensor({6, 10}, rng, 3.0, false);
  Tensor y = layer_norm(x, Tensor::full({10}, 1.0), Tensor::zeros({10}), 0.0);
  for (std::size_t r = 0; r < 6; ++r) {
    double m = 0.0, v = 0.0;
    for (std::size_t c = 0; c < 10; ++c) m += y.at(r, c);
    m /= 10;
    for (std::size_t c = 0; c < 10; ++c) v += (y.at(r, c) - m) * (y.at(r, c) - m);
    v /= 10;
    EXPECT_LT(std::abs(m), 1e-9);
    EXPECT_LT(std::abs(v - 1.0), 1e-6);
  }
}

TEST(Dropout, IdentityCasesAndValidation) {
  Rng rng(5);
  Tensor x = random_tensor({4, 4}, rng, 1.0, false);
  EXPECT_EQ(dropout(x, 0.5, false, rng).values(), x.values());
  EXPECT_EQ(dropout(x, 0.0, true, rng).values(), x.values());
  EXPECT_THROW(dropout(x, 1.0, true, rng), ConfigError);
  EXPECT_THROW(dropout(x, -0.1, true, rng), ConfigError);
}

TEST(Dropout, InvertedScalingKeepsMean) {
  Rng rng(6);
  Tensor x = Tensor::full({1000000}, 1.0);
  Tensor y = dropout(x, 0.2, true, rng);
  double s = 0.0;
  std::size_t zeros = 0;
  for (double v : y.values()) {
    s += v;
    if (v == 0.0) ++zeros;
    else EXPECT_DOUBLE_EQ(v, 1.25);
  }
  EXPECT_GE(s / 1e6, 0.99);
  EXPECT_LE(s / 1e6, 1.01);
  EXPECT_NEAR(static_cast<double>(zeros) / 1e6, 0.2, 0.005);
}

TEST(Backward, AnalyticExamples) {
  Tensor x = Tensor::from({2, 3}, {1, -2, 3, 0.5, 4, 2}, true);
  {
    GradTape tape;
    TapeScope scope(tape);
    tape.backward(sum(x));
  }
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);

  Tensor y = Tensor::from({3}, {1, 2, 3}, true);
  {
    GradTape tape;
    TapeScope scope(tape);
    tape.backward(sum(mul(y, y)));
  }
  expect_values(Tensor::from({3}, std::vector<double>(y.grad().begin(), y.grad().end())), {2, 4, 6},
                0.0);
}

TEST(Backward, NonScalarLossIsContractError) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  GradTape tape;
  TapeScope scope(tape);
  Tensor y = scale(x, 2.0);
  EXPECT_THROW(tape.backward(y), ContractError);
}

TEST(Backward, AccumulatesAcrossCalls) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  for (int i = 0; i < 2; ++i) {
    GradTape tape;
    TapeScope scope(tape);
    tape.backward(sum(scale(x, 3.0)));
  }
  EXPECT_EQ(x.grad()[0], 6.0);
  x.zero_grad();
  EXPECT_EQ(x.grad()[1], 0.0);
}

TEST(Backward, NoTapeMeansNoRecording) {
  Tensor x = Tensor::from({2}, {1, 2}, true);
  GradTape tape;
  Tensor y = scale(x, 2.0);  // outside any TapeScope
  EXPECT_EQ(tape.size(), 0u);
  {
    TapeScope scope(tape);
    Tensor z = scale(Tensor::from({2}, {1, 2}), 2.0);  // no input requires grad
  }
  EXPECT_EQ(tape.size(), 0u);
}

TEST(Backward, DeterministicGradients) {
  auto run = [] {
    Rng rng(7);
    Tensor a = random_tensor({3, 5}, rng);
    Tensor g = random_tensor({5}, rng);
    Tensor b = random_tensor({5}, rng);
    GradTape tape;
    TapeScope scope(tape);
    tape.backward(probe_loss(softmax(layer_norm(a, g, b))));
    return std::vector<double>(a.grad().begin(), a.grad().end());
  };
  EXPECT_EQ(run(), run());
}

// Every differentiable op against central differences.
class OpGradient : public ::testing::Test {
 protected:
  Rng rng{11};
};

TEST_F(OpGradient, Elementwise) {
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  Tensor bias = random_tensor({4}, rng);
  std::vector<double> c(12);
  for (auto& v : c) v = rng.normal();
  EXPECT_LT(grad_check({{"a", a}, {"b", b}}, [&] { return probe_loss(add(a, b)); }).max_rel_error, 1e-6);
  EXPECT_LT(grad_check({{"a", a}, {"b", b}}, [&] { return probe_loss(sub(a, b)); }).max_rel_error, 1e-6);
  EXPECT_LT(grad_check({{"a", a}, {"b", b}}, [&] { return probe_loss(mul(a, b)); }).max_rel_error, 1e-6);
  EXPECT_LT(grad_check({{"a", a}}, [&] { return probe_loss(scale(a, -1.7)); }).max_rel_error, 1e-6);
  EXPECT_LT(grad_check({{"a", a}, {"bias", bias}}, [&] { return probe_loss(add_bias(a, bias)); })
                .max_rel_error,
            1e-6);
  EXPECT_LT(grad_check({{"a", a}}, [&] { return probe_loss(add_constant(a, c)); }).max_rel_error, 1e-6);
  EXPECT_LT(grad_check({{"a", a}}, [&] { return probe_loss(relu(a)); }).max_rel_error, 1e-6);
  EXPECT_LT(grad_check({{"a", a}}, [&] { return mean(mul(a, a)); }).max_rel_error, 1e-6);
}

TEST_F(OpGradient, SoftmaxFamily) {
  Tensor a = random_tensor({2, 3, 4}, rng);
  for (int axis : {0, 1, 2}) {
    EXPECT_LT(grad_check({{"a", a}}, [&] { return probe_loss(softmax(a, axis)); }).max_rel_error, 1e-6)
        << axis;
  }
  EXPECT_LT(grad_check({{"a", a}}, [&] { return probe_loss(log_softmax(a)); }).max_rel_error, 1e-6);
}

TEST_F(OpGradient, LayerNorm) {
  Tensor x = random_tensor({4, 6}, rng);
  Tensor g = random_tensor({6}, rng);
  Tensor b = random_tensor({6}, rng);
  EXPECT_LT(grad_check({{"x", x}, {"gamma", g}, {"beta", b}},
                       [&] { return probe_loss(layer_norm(x, g, b)); })
                .max_rel_error,
            1e-6);
}

TEST_F(OpGradient, ShapeOps) {
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({3, 2}, rng);
  Tensor table = random_tensor({6, 4}, rng);
  const std::vector<std::int64_t> ids = {5, 0, 5, 2};
  const std::vector<double> w = {1, 0, 1};
  EXPECT_LT(grad_check({{"a", a}}, [&] { return probe_loss(transpose(a)); }).max_rel_error, 1e-6);
  EXPECT_LT(grad_check({{"a", a}}, [&] { return probe_loss(reshape(a, {2, 6})); }).max_rel_error, 1e-6);
  EXPECT_LT(grad_check({{"a", a}, {"b", b}},
                       [&] {
                         const std::vector<Tensor> parts = {a, b};
                         return probe_loss(concat_cols(parts));
                       })
                .max_rel_error,
            1e-6);
  EXPECT_LT(grad_check({{"a", a}}, [&] { return probe_loss(slice_cols(a, 1, 2)); }).max_rel_error, 1e-6);
  EXPECT_LT(grad_check({{"table", table}}, [&] { return probe_loss(gather_rows(table, ids)); })
                .max_rel_error,
            1e-6);
  EXPECT_LT(grad_check({{"a", a}}, [&] { return probe_loss(masked_mean_rows(a, w)); }).max_rel_error,
            1e-6);
}

TEST_F(OpGradient, CrossEntropy) {
  Tensor logits = random_tensor({4, 5}, rng);
  const std::vector<std::int64_t> targets = {1, 4, 0, 2};
  const std::vector<std::uint8_t> mask = {1, 1, 0, 1};
  EXPECT_LT(grad_check({{"logits", logits}},
                       [&] { return cross_entropy_sum(logits, targets, mask); })
                .max_rel_error,
            1e-6);
  // Masked rows contribute nothing.
  const double full = cross_entropy_sum(logits, targets, mask).item();
  Tensor ls = log_softmax(logits);
  EXPECT_NEAR(full, -(ls.at(0, 1) + ls.at(1, 4) + ls.at(3, 2)), 1e-12);
}

TEST(Optim, ZeroGradientIsNoOp) {
  Tensor w = Tensor::from({3}, {0.5, -1, 2}, true);
  w.grad();
  AdamState st;
  for (int i = 0; i < 5; ++i) adam_step(std::span(&w, 1), st, 1e-2);
  expect_values(w, {0.5, -1, 2}, 0.0);
  EXPECT_EQ(st.step, 5);
}

TEST(Optim, HandComputedSteps) {
  Tensor w = Tensor::from({1}, {0.0}, true);
  AdamState st;
  st.config.eps = 1e-8;
  w.grad()[0] = 1.0;
  adam_step(std::span(&w, 1), st, 1e-3);
  EXPECT_NEAR(st.m[0][0], 0.1, 1e-15);
  EXPECT_NEAR(st.v[0][0], 0.001, 1e-15);
  EXPECT_NEAR(w.at(0), -0.001, 1e-9);
  adam_step(std::span(&w, 1), st, 1e-3);
  EXPECT_NEAR(w.at(0), -0.002, 1e-6);
}

TEST(Optim, NanGradientAbortsWithoutUpdate) {
  Tensor w = Tensor::from({2}, {1, 2}, true);
  w.grad()[1] = std::nan("");
  AdamState st;
  EXPECT_THROW(adam_step(std::span(&w, 1), st, 1e-3), NumericError);
  expect_values(w, {1, 2}, 0.0);
  EXPECT_EQ(st.step, 0);
}

TEST(Optim, NoamSchedule) {
  EXPECT_NEAR(noam_lr(4000, 512, 4000), 6.988e-4, 1e-6);
  EXPECT_DOUBLE_EQ(noam_lr(4000, 512, 4000), std::pow(512.0, -0.5) * std::pow(4000.0, -0.5));
  EXPECT_LT(noam_lr(10, 512, 4000), noam_lr(100, 512, 4000));
  EXPECT_GT(noam_lr(5000, 512, 4000), noam_lr(8000, 512, 4000));
  EXPECT_THROW(noam_lr(0, 512, 4000), ContractError);
  EXPECT_THROW(noam_lr(1, 512, 0), ContractError);
}

TEST(Rng, StateRoundTrip) {
  Rng a(42);
  a.next_u64();
  Rng b;
  b.set_state(a.state());
  for (int i = 0; i < 10; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}
