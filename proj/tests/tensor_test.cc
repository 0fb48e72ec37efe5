// tests/tensor_test.cc

// Copyright 2026  The clepdg Authors

// See ../COPYING for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "clepdg/tensor.h"

#include <gtest/gtest.h>

#include <cmath>

#include "clepdg/error.h"
#include "clepdg/gradcheck.h"
#include "clepdg/rng.h"

namespace clepdg {
namespace {

Tensor random_matrix(std::size_t r, std::size_t c, Rng &rng, bool grad = false) {
  std::vector<double> v(r * c);
  for (double &x : v) x = rng.uniform(-2.0, 2.0);
  return Tensor({r, c}, std::move(v), grad);
}

void expect_values(const Tensor &t, std::initializer_list<double> want, double tol = 0.0) {
  ASSERT_EQ(t.numel(), want.size());
  std::size_t i = 0;
  for (double w : want) {
    if (tol == 0.0)
      EXPECT_EQ(t[i], w) << "index " << i;
    else
      EXPECT_NEAR(t[i], w, tol) << "index " << i;
    ++i;
  }
}

TEST(Tensor, ShapeMatchesData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  EXPECT_THROW(Tensor({2, 0}, {}), ShapeError);
  Tensor t = Tensor::zeros({2, 3});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_FALSE(t.has_grad());
  EXPECT_THROW(t.grad(), ContractError);
}

TEST(Tensor, MatmulIdentity) {
  const Tensor a = Tensor::from_rows({{1, 2}, {3, 4}});
  const Tensor eye = Tensor::from_rows({{1, 0}, {0, 1}});
  expect_values(matmul(a, eye), {1, 2, 3, 4});
  expect_values(matmul(eye, a), {1, 2, 3, 4});
}

TEST(Tensor, MatmulShapeErrorNamesOp) {
  const Tensor a = Tensor::zeros({2, 3}), b = Tensor::zeros({2, 3});
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError &e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos) << msg;
  }
}

TEST(Tensor, BroadcastOnlyScalar) {
  const Tensor a = Tensor::zeros({2, 3});
  EXPECT_THROW(add(a, Tensor::zeros({3})), ShapeError);
  EXPECT_THROW(mul(a, Tensor::zeros({3, 2})), ShapeError);
  expect_values(add(Tensor::from_values({1, 2}), Tensor::scalar(3)), {4, 5});
  expect_values(sub(Tensor::scalar(3), Tensor::from_values({1, 2})), {2, 1});
}

TEST(Tensor, SoftmaxOfZerosIsUniform) { expect_values(softmax(Tensor::from_values({0, 0})), {0.5, 0.5}); }

TEST(Tensor, L2NormalizeThreeFour) {
  expect_values(l2_normalize(Tensor::from_values({3, 4})), {0.6, 0.8}, 1e-15);
}

TEST(Tensor, DomainErrors) {
  EXPECT_THROW(log(Tensor::from_values({1.0, 0.0})), DomainError);
  EXPECT_THROW(log(Tensor::from_values({-1.0})), DomainError);
  EXPECT_THROW(l2_normalize(Tensor::from_rows({{1, 1}, {0, 0}})), DomainError);
}

TEST(Tensor, BasicOps) {
  const Tensor x = Tensor::from_rows({{1, -2, 3}, {-4, 5, -6}});
  expect_values(transpose(x), {1, -4, -2, 5, 3, -6});
  EXPECT_EQ(transpose(x).shape(), (Shape{3, 2}));
  EXPECT_EQ(sum(x).item(), -3.0);
  EXPECT_EQ(mean(x).item(), -0.5);
  EXPECT_EQ(max(x).item(), 5.0);
  expect_values(relu(x), {1, 0, 3, 0, 5, 0});
  expect_values(neg(x), {-1, 2, -3, 4, -5, 6});
  expect_values(scale(x, 0.5), {0.5, -1, 1.5, -2, 2.5, -3});
  expect_values(exp(Tensor::from_values({0.0})), {1.0});
  expect_values(concat({x, x}, 0), {1, -2, 3, -4, 5, -6, 1, -2, 3, -4, 5, -6});
  expect_values(concat({x, slice(x, 1, 0, 1)}, 1), {1, -2, 3, 1, -4, 5, -6, -4});
  expect_values(slice(x, 0, 1, 2), {-4, 5, -6});
  expect_values(slice(x, 1, 1, 3), {-2, 3, 5, -6});
  EXPECT_THROW(slice(x, 1, 2, 4), ShapeError);
  EXPECT_THROW(concat({x, Tensor::zeros({2, 2})}, 0), ShapeError);
}

TEST(Tensor, TransposeTwiceIsExact) {
  Rng rng(3);
  const Tensor x = random_matrix(5, 7, rng);
  const Tensor y = transpose(transpose(x));
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Tensor, MatmulAssociativeWithIdentity) {
  Rng rng(4);
  const Tensor a = random_matrix(4, 5, rng), b = random_matrix(5, 3, rng);
  std::vector<double> eye(25, 0.0);
  for (std::size_t i = 0; i < 5; ++i) eye[i * 5 + i] = 1.0;
  const Tensor i5({5, 5}, eye);
  const Tensor lhs = matmul(matmul(a, i5), b), rhs = matmul(a, matmul(i5, b));
  for (std::size_t i = 0; i < lhs.numel(); ++i) EXPECT_EQ(lhs[i], rhs[i]);
}

TEST(Tensor, SoftmaxProperties) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_matrix(3, 6, rng);
    const Tensor p = softmax(x);
    const Tensor q = softmax(add(x, Tensor::scalar(rng.uniform(-50.0, 50.0))));
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < 6; ++c) {
        EXPECT_GE(p.at(r, c), 0.0);
        EXPECT_NEAR(p.at(r, c), q.at(r, c), 1e-9);
        s += p.at(r, c);
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(Tensor, L2NormalizeProperties) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_matrix(4, 8, rng);
    const Tensor y = l2_normalize(x);
    const Tensor z = l2_normalize(scale(x, rng.uniform(0.01, 100.0)));
    for (std::size_t r = 0; r < 4; ++r) {
      double n = 0.0;
      for (std::size_t c = 0; c < 8; ++c) {
        n += y.at(r, c) * y.at(r, c);
        EXPECT_NEAR(y.at(r, c), z.at(r, c), 1e-9);
      }
      EXPECT_NEAR(std::sqrt(n), 1.0, 1e-9);
    }
  }
}

TEST(Backward, SumOfSquares) {
  Tensor x = Tensor::from_values({1, 2, 3}, true);
  backward(sum(mul(x, x)));
  ASSERT_TRUE(x.has_grad());
  for (std::size_t i = 0; i < 3; ++i) {
    const double h = 1e-5, xi = x[i];
    const double fd = ((xi + h) * (xi + h) - (xi - h) * (xi - h)) / (2 * h);
    EXPECT_NEAR(x.grad()[i], fd, 1e-9);
  }
}

TEST(Backward, SumGivesOnes) {
  Tensor x = Tensor::zeros({2, 3, 2}, true);
  backward(sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, MeanRelu) {
  Tensor x = Tensor::from_values({-1, 2}, true);
  backward(mean(relu(x)));
  EXPECT_NEAR(x.grad()[0], 0.0, 1e-12);
  EXPECT_NEAR(x.grad()[1], 0.5, 1e-10);
}

TEST(Backward, NonScalarRootRejected) {
  Tensor x = Tensor::from_values({1, 2}, true);
  EXPECT_THROW(backward(scale(x, 2.0)), ContractError);
  Graph::current().clear();
}

TEST(Backward, AccumulatesAndClearsGraph) {
  Tensor x = Tensor::from_values({1, 2}, true);
  backward(sum(x));
  EXPECT_EQ(Graph::current().size(), 0u);
  backward(sum(scale(x, 3.0)));
  EXPECT_EQ(x.grad()[0], 4.0);
  EXPECT_EQ(x.grad()[1], 4.0);
}

TEST(Backward, EveryReachableLeafGetsGrad) {
  Tensor a = Tensor::from_values({1, 2}, true);
  Tensor b = Tensor::from_values({3, 4}, true);
  Tensor unused = Tensor::from_values({5}, true);
  backward(sum(mul(a, exp(b))));
  EXPECT_TRUE(a.has_grad());
  EXPECT_TRUE(b.has_grad());
  EXPECT_FALSE(unused.has_grad());
  EXPECT_EQ(a.grad().size(), a.numel());
}

TEST(Graph, RecordsInExecutionOrder) {
  Graph::current().clear();
  Tensor x = Tensor::from_values({1, 2}, true);
  const Tensor y = exp(x);
  const Tensor z = sum(y);
  const auto &nodes = Graph::current().nodes();
  ASSERT_EQ(nodes.size(), 2u);
  EXPECT_EQ(nodes[0].op, "exp");
  EXPECT_EQ(nodes[0].output, y.id());
  EXPECT_EQ(nodes[1].op, "sum");
  EXPECT_EQ(nodes[1].inputs.front(), y.id());
  Graph::current().clear();
}

TEST(Graph, NothingRecordedWithoutGrad) {
  Graph::current().clear();
  const Tensor x = Tensor::from_values({1, 2});
  (void)sum(exp(x));
  EXPECT_EQ(Graph::current().size(), 0u);
  Tensor y = Tensor::from_values({1, 2}, true);
  {
    NoGradGuard guard;
    (void)sum(exp(y));
  }
  EXPECT_EQ(Graph::current().size(), 0u);
}

TEST(Conv, MatchesDirectLoops) {
  Rng rng(8);
  const std::size_t b = 2, cin = 3, cout = 5, h = 6, w = 11, k = 3;
  std::vector<double> xv(b * cin * h * w), wv(cout * cin * k * k), bv(cout);
  for (double &v : xv) v = rng.uniform(-1, 1);
  for (double &v : wv) v = rng.uniform(-1, 1);
  for (double &v : bv) v = rng.uniform(-1, 1);
  const Tensor y = conv2d(Tensor({b, cin, h, w}, xv), Tensor({cout, cin, k, k}, wv),
                          Tensor({cout}, bv));
  ASSERT_EQ(y.shape(), (Shape{b, cout, h, w}));
  for (std::size_t n = 0; n < b; ++n)
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
          double s = bv[co];
          for (std::size_t ci = 0; ci < cin; ++ci)
            for (std::size_t di = 0; di < k; ++di)
              for (std::size_t dj = 0; dj < k; ++dj) {
                const long ii = static_cast<long>(i + di) - 1, jj = static_cast<long>(j + dj) - 1;
                if (ii < 0 || jj < 0 || ii >= static_cast<long>(h) || jj >= static_cast<long>(w))
                  continue;
                s += wv[((co * cin + ci) * k + di) * k + dj] *
                     xv[((n * cin + ci) * h + ii) * w + jj];
              }
          EXPECT_NEAR(y[((n * cout + co) * h + i) * w + j], s, 1e-12);
        }
}

TEST(Conv, PoolAndSpatialMean) {
  const Tensor x({1, 1, 3, 4}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  const Tensor p = avg_pool2x2(x);
  EXPECT_EQ(p.shape(), (Shape{1, 1, 1, 2}));
  expect_values(p, {3.5, 5.5});
  expect_values(spatial_mean(x), {6.5});
}

TEST(GradCheck, SumOfSquaresPasses) {
  Rng rng(9);
  const Tensor x = random_matrix(3, 4, rng);
  const auto r = finite_diff_check([](const Tensor &t) { return sum(mul(t, t)); }, x, 1e-5, 1e-4);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
  EXPECT_EQ(r.checked, 12u);
}

TEST(GradCheck, ConstantPasses) {
  const auto r = finite_diff_check([](const Tensor &) { return Tensor::scalar(4.0); },
                                   Tensor::from_values({1, 2}));
  EXPECT_TRUE(r.passed);
  EXPECT_EQ(r.max_abs_error, 0.0);
}

TEST(GradCheck, ReportsWrongGradientWithoutThrowing) {
  // detach hides the dependence from autodiff, so the analytic grad is zero.
  const auto r = finite_diff_check(
      [](const Tensor &t) { return add(sum(t), sum(mul(t.detach(), t.detach()))); },
      Tensor::from_values({1, 2}));
  EXPECT_FALSE(r.passed);
  EXPECT_GT(r.max_rel_error, 0.5);
}

}  // namespace
}  // namespace clepdg
