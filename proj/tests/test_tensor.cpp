// Copyright 2026 The sllab Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sllab/errors.hpp"
#include "sllab/tensor.hpp"

namespace sllab {
namespace {

std::vector<double> uniform_values(std::size_t n, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

Tensor random_tensor(std::size_t r, std::size_t c, std::uint64_t seed, bool grad = false) {
  return Tensor({r, c}, uniform_values(r * c, -1.0, 1.0, seed), grad);
}

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  Tensor t({2, 3}, std::vector<double>(6, 1.0));
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
}

TEST(Tensor, HandlesAliasAndCloneCopies) {
  Tensor a({2}, {1.0, 2.0});
  Tensor alias = a;
  Tensor copy = a.clone();
  alias.mutable_data()[0] = 7.0;
  EXPECT_EQ(a.data()[0], 7.0);
  EXPECT_EQ(copy.data()[0], 1.0);
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor m({2, 2}, {0.3, -1.5, 2.25, 4.0});
  Tensor out = matmul(nullptr, eye, m);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out.data()[i], m.data()[i]);
}

TEST(Matmul, HandComputedProduct) {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2, 2}, {5, 6, 7, 8});
  Tensor out = matmul(nullptr, a, b);
  const std::vector<double> want = {19, 22, 43, 50};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(out.data()[i], want[i]);
}

TEST(Matmul, ZeroLeftOperand) {
  Tensor out = matmul(nullptr, Tensor::zeros({3, 4}), random_tensor(4, 2, 1));
  ASSERT_EQ(out.shape(), (Shape{3, 2}));
  for (double v : out.data()) EXPECT_EQ(v, 0.0);
}

TEST(Matmul, MismatchNamesBothShapes) {
  try {
    matmul(nullptr, Tensor::zeros({2, 3}), Tensor::zeros({4, 5}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[4x5]"), std::string::npos) << msg;
  }
}

// Sizes straddle the register tile edges of the kernel.
TEST(Matmul, MatchesNaiveProductOnRaggedShapes) {
  const std::size_t shapes[][3] = {{1, 1, 1}, {3, 5, 7}, {4, 8, 8}, {5, 9, 17}, {13, 64, 31}, {37, 3, 66}};
  std::uint64_t seed = 10;
  for (const auto& s : shapes) {
    Tensor a = random_tensor(s[0], s[1], seed++);
    Tensor b = random_tensor(s[1], s[2], seed++);
    const auto want = oracle::matmul({a.data().begin(), a.data().end()},
                                     {b.data().begin(), b.data().end()}, s[0], s[1], s[2]);
    Tensor got = matmul(nullptr, a, b);
    for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got.data()[i], want[i], 1e-12);
  }
}

TEST(Matmul, NtMatchesExplicitTranspose) {
  Tensor a = random_tensor(6, 5, 3);
  Tensor b = random_tensor(9, 5, 4);
  std::vector<double> bt(5 * 9);
  for (std::size_t i = 0; i < 9; ++i)
    for (std::size_t j = 0; j < 5; ++j) bt[j * 9 + i] = b.at(i, j);
  const auto want = oracle::matmul({a.data().begin(), a.data().end()}, bt, 6, 5, 9);
  Tensor got = matmul_nt(nullptr, a, b);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(got.data()[i], want[i], 1e-12);
}

TEST(MatmulProperty, AssociativeWithinTolerance) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Tensor a = random_tensor(8, 8, 3 * seed), b = random_tensor(8, 8, 3 * seed + 1),
           c = random_tensor(8, 8, 3 * seed + 2);
    Tensor left = matmul(nullptr, matmul(nullptr, a, b), c);
    Tensor right = matmul(nullptr, a, matmul(nullptr, b, c));
    double worst = 0.0;
    for (std::size_t i = 0; i < 64; ++i)
      worst = std::max(worst, std::abs(left.data()[i] - right.data()[i]));
    EXPECT_LT(worst, 1e-8);
  }
}

TEST(Softmax, UniformRow) {
  Tensor out = softmax_rows(nullptr, Tensor({1, 3}, {0, 0, 0}));
  for (double v : out.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
}

TEST(Softmax, LargeLogitDoesNotOverflow) {
  Tensor out = softmax_rows(nullptr, Tensor({1, 2}, {1000, 0}));
  EXPECT_TRUE(std::isfinite(out.data()[0]));
  EXPECT_NEAR(out.data()[0], 1.0, 1e-15);
  EXPECT_NEAR(out.data()[1], 0.0, 1e-15);
}

TEST(Softmax, LogTwoClosedForm) {
  Tensor out = softmax_rows(nullptr, Tensor({1, 2}, {std::log(2.0), 0}));
  EXPECT_NEAR(out.data()[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(out.data()[1], 1.0 / 3.0, 1e-15);
}

TEST(SoftmaxProperty, RowsSumToOne) {
  const std::size_t rows = 200, cols = 37;
  Tensor x({rows, cols}, uniform_values(rows * cols, -50.0, 50.0, 99));
  Tensor p = softmax_rows(nullptr, x);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      EXPECT_GE(p.at(r, c), 0.0);
      s += p.at(r, c);
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(CrossEntropy, UniformLogitsGiveLogV) {
  const int targets[] = {2};
  Tensor loss = cross_entropy(nullptr, Tensor::zeros({1, 4}), targets);
  EXPECT_NEAR(loss.item(), std::log(4.0), 1e-15);
}

TEST(CrossEntropy, DominantCorrectLogitGivesZero) {
  const int targets[] = {1};
  Tensor loss = cross_entropy(nullptr, Tensor({1, 3}, {0, 1000, 0}), targets);
  EXPECT_NEAR(loss.item(), 0.0, 1e-12);
}

TEST(CrossEntropy, MatchesScalarOracle) {
  const std::vector<std::vector<double>> logits = {{0.5, -1.25, 2.0, 0.0}, {-3.0, 0.75, 0.1, 1.5}};
  const std::vector<int> targets = {2, 0};
  Tensor t({2, 4}, {0.5, -1.25, 2.0, 0.0, -3.0, 0.75, 0.1, 1.5});
  EXPECT_NEAR(cross_entropy(nullptr, t, targets).item(), oracle::cross_entropy(logits, targets),
              1e-14);
}

TEST(CrossEntropy, OutOfRangeTargetThrows) {
  const int targets[] = {4};
  EXPECT_THROW(cross_entropy(nullptr, Tensor::zeros({1, 4}), targets), IndexError);
  const int negative[] = {-1};
  EXPECT_THROW(cross_entropy(nullptr, Tensor::zeros({1, 4}), negative), IndexError);
}

TEST(Backward, SumGivesOnes) {
  Graph g;
  Tensor x({2, 3}, uniform_values(6, -1, 1, 5), true);
  g.backward(sum(&g, x));
  for (double v : x.grad()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, SquareGivesTwoX) {
  Graph g;
  Tensor x({5}, uniform_values(5, -2, 2, 6), true);
  g.backward(sum(&g, mul(&g, x, x)));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(x.grad()[i], 2.0 * x.data()[i]);
}

TEST(Backward, NonScalarLossIsAContractError) {
  Graph g;
  Tensor x({3}, {1, 2, 3}, true);
  Tensor y = scale(&g, x, 2.0);
  EXPECT_THROW(g.backward(y), ContractError);
}

TEST(Backward, UnreachableGradientsUntouched) {
  Graph g;
  Tensor x({2}, {1, 2}, true);
  Tensor unused({2}, {3, 4}, true);
  unused.mutable_grad()[0] = 42.0;
  g.backward(sum(&g, x));
  EXPECT_EQ(unused.grad()[0], 42.0);
  EXPECT_EQ(unused.grad()[1], 0.0);
}

TEST(Backward, NothingRecordedWithoutGraphOrGrad) {
  Graph g;
  Tensor a = random_tensor(3, 3, 1);
  matmul(&g, a, a);
  EXPECT_EQ(g.size(), 0u);
}

TEST(BackwardProperty, BitIdenticalAcrossRuns) {
  auto run = [] {
    Graph g;
    Tensor w = random_tensor(6, 4, 11, true);
    Tensor x = random_tensor(5, 4, 12);
    Tensor gain({4}, {1.0, 0.5, 2.0, 1.5}, true);
    Tensor h = gelu(&g, matmul_nt(&g, rms_normalize(&g, x, gain), w));
    const int targets[] = {0, 5, 3, 2, 1};
    g.backward(cross_entropy(&g, softmax_rows(&g, h), targets));
    std::vector<double> out(w.grad().begin(), w.grad().end());
    out.insert(out.end(), gain.grad().begin(), gain.grad().end());
    return out;
  };
  EXPECT_EQ(run(), run());
}

// Central differences on each op's backward rule.
class OpGradient : public ::testing::Test {
 protected:
  template <class F>
  void check(Tensor& x, F&& f) {
    x.clear_grad();
    Graph g;
    g.backward(f(&g));
    const std::vector<double> analytic(x.grad().begin(), x.grad().end());
    auto data = x.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double keep = data[i];
      data[i] = keep + 1e-5;
      const double up = f(nullptr).item();
      data[i] = keep - 1e-5;
      const double down = f(nullptr).item();
      data[i] = keep;
      const double numeric = (up - down) / 2e-5;
      EXPECT_LT(oracle::relative_error(analytic[i], numeric, 1e-6), 1e-6)
          << "element " << i << " analytic " << analytic[i] << " numeric " << numeric;
    }
  }
  Tensor weights_ = random_tensor(4, 6, 21);
};

TEST_F(OpGradient, GeluAndMul) {
  Tensor x = random_tensor(3, 6, 22, true);
  check(x, [&](Graph* g) { return sum(g, mul(g, gelu(g, x), x)); });
}

TEST_F(OpGradient, RmsNormalizeInputAndGain) {
  Tensor x = random_tensor(3, 6, 23, true);
  Tensor gain({6}, uniform_values(6, 0.5, 1.5, 24), true);
  check(x, [&](Graph* g) { return sum(g, mul(g, rms_normalize(g, x, gain), x)); });
  check(gain, [&](Graph* g) { return sum(g, mul(g, rms_normalize(g, x, gain), x)); });
}

TEST_F(OpGradient, MaskedSoftmaxAttention) {
  Tensor s = random_tensor(4, 4, 25, true);
  const int targets[] = {0, 1, 1, 3};
  check(s, [&](Graph* g) {
    return cross_entropy(g, causal_masked_fill(g, s), targets);
  });
}

TEST_F(OpGradient, SliceConcatAndEmbedding) {
  Tensor table = random_tensor(5, 6, 26, true);
  const int ids[] = {4, 0, 4, 2};
  check(table, [&](Graph* g) {
    Tensor e = embedding_lookup(g, table, ids);
    Tensor joined = concat_cols(g, {slice_cols(g, e, 3, 3), slice_cols(g, e, 0, 3)});
    return sum(g, mul(g, joined, joined));
  });
}

TEST_F(OpGradient, MatmulBothOperands) {
  Tensor a = random_tensor(3, 4, 27, true);
  Tensor b = random_tensor(4, 6, 28, true);
  auto f = [&](Graph* g) { return sum(g, mul(g, matmul(g, a, b), matmul(g, a, b))); };
  check(a, f);
  check(b, f);
  Tensor c = random_tensor(5, 6, 29, true);
  auto nt = [&](Graph* g) { return sum(g, scale(g, gelu(g, matmul_nt(g, c, weights_)), 3.0)); };
  check(c, nt);
}

TEST(CausalMask, UpperTriangleMasked) {
  Tensor out = causal_masked_fill(nullptr, Tensor::filled({3, 3}, 0.5));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(out.at(i, j), j > i ? kMaskValue : 0.5);
}

TEST(RmsNormalize, MatchesDefinition) {
  Tensor x({1, 4}, {1, -2, 3, -4});
  Tensor gain({4}, {1, 2, 1, 0.5});
  Tensor out = rms_normalize(nullptr, x, gain);
  const double rms = std::sqrt((1 + 4 + 9 + 16) / 4.0 + kRmsEpsilon);
  const double want[] = {1 / rms, -4 / rms, 3 / rms, -2 / rms};
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(out.data()[i], want[i], 1e-15);
}

}  // namespace
}  // namespace sllab
