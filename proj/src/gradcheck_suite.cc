// src/gradcheck_suite.cc

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

#include <cmath>
#include <functional>
#include <memory>

#include "clepdg/encoders.h"
#include "clepdg/gradcheck.h"
#include "clepdg/objectives.h"
#include "clepdg/rng.h"

namespace clepdg {

namespace {

Tensor uniform(Shape shape, Rng &rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_numel(shape));
  for (double &x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

// Uniform magnitudes in [margin, 1] with random signs, keeping every element
// clear of kinks at zero.
Tensor away_from_zero(Shape shape, Rng &rng, double margin = 0.1) {
  std::vector<double> v(shape_numel(shape));
  for (double &x : v) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(margin, 1.0);
  return Tensor(std::move(shape), std::move(v));
}

// Distinct, well separated values in random order so max() has one winner.
Tensor distinct(Shape shape, Rng &rng) {
  const std::size_t n = shape_numel(shape);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 0.1 * static_cast<double>(i) - 0.05 * n;
  for (std::size_t i = n; i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  return Tensor(std::move(shape), std::move(v));
}

// sum(op(x) * r) for a fixed random r, so every output element gets its own
// upstream gradient.
ScalarFn weighted(std::function<Tensor(const std::vector<Tensor> &)> op, Rng &rng) {
  auto cache = std::make_shared<Tensor>();
  auto seed = rng.next_u64();
  return [op, cache, seed](const std::vector<Tensor> &xs) {
    Tensor y = op(xs);
    if (!cache->impl() || cache->shape() != y.shape()) {
      Rng r(seed);
      *cache = uniform(y.shape(), r, 0.5, 1.5);
    }
    return sum(mul(y, *cache));
  };
}

std::vector<int> random_labels(std::size_t n, std::size_t classes, Rng &rng) {
  std::vector<int> out(n);
  for (auto &y : out) y = static_cast<int>(rng.below(classes));
  return out;
}

double min_hinge_slack(const Tensor &text, const Tensor &prompts, const std::vector<int> &labels) {
  const Tensor t = l2_normalize(text.detach()), u = l2_normalize(prompts.detach());
  const std::size_t d = t.dim(1), c = u.dim(0);
  double slack = 1e300;
  for (std::size_t m = 0; m < t.dim(0); ++m) {
    auto sim = [&](std::size_t k) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += t.data()[m * d + j] * u.data()[k * d + j];
      return s;
    };
    const double pos = sim(static_cast<std::size_t>(labels[m]));
    for (std::size_t k = 0; k < c; ++k)
      if (static_cast<int>(k) != labels[m]) slack = std::min(slack, std::abs(1.0 - pos + sim(k)));
  }
  return slack;
}

double max_abs_cosine(const Tensor &a, const Tensor &b) {
  const Tensor x = matmul(l2_normalize(a.detach()), transpose(l2_normalize(b.detach())));
  double m = 0.0;
  for (double v : x.data()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed) {
  std::vector<GradCheckCase> out;
  Rng rng(seed);
  auto check = [&](const std::string &name, const ScalarFn &f, const std::vector<Tensor> &in) {
    out.push_back({name, finite_diff_check(f, in)});
  };
  using V = const std::vector<Tensor> &;

  // Elementwise and broadcasting.
  check("add", weighted([](V x) { return add(x[0], x[1]); }, rng),
        {uniform({3, 4}, rng), uniform({3, 4}, rng)});
  check("add_scalar", weighted([](V x) { return add(x[0], x[1]); }, rng),
        {uniform({3, 4}, rng), uniform({1}, rng)});
  check("sub", weighted([](V x) { return sub(x[0], x[1]); }, rng),
        {uniform({3, 4}, rng), uniform({3, 4}, rng)});
  check("mul", weighted([](V x) { return mul(x[0], x[1]); }, rng),
        {uniform({3, 4}, rng), uniform({3, 4}, rng)});
  check("mul_scalar", weighted([](V x) { return mul(x[1], x[0]); }, rng),
        {uniform({3, 4}, rng), uniform({1}, rng)});
  check("exp", weighted([](V x) { return exp(x[0]); }, rng), {uniform({3, 4}, rng)});
  check("log", weighted([](V x) { return log(x[0]); }, rng), {uniform({3, 4}, rng, 0.2, 2.0)});
  check("relu", weighted([](V x) { return relu(x[0]); }, rng), {away_from_zero({3, 4}, rng)});
  check("neg", weighted([](V x) { return neg(x[0]); }, rng), {uniform({3, 4}, rng)});
  check("scale", weighted([](V x) { return scale(x[0], -2.5); }, rng), {uniform({3, 4}, rng)});
  check("acos", weighted([](V x) { return acos(x[0]); }, rng),
        {uniform({3, 4}, rng, -0.95, 0.95)});
  check("cos", weighted([](V x) { return cos(x[0]); }, rng), {uniform({3, 4}, rng, -3.0, 3.0)});
  check("cos_add_angle", weighted([](V x) { return cos_add_angle(x[0], 0.3, 1e-7); }, rng),
        {uniform({3, 4}, rng, -0.95, 0.95)});
  {
    // Keep elements at least 0.05 away from the clamp bounds.
    Tensor x = uniform({3, 4}, rng, -1.0, 1.0);
    for (double &v : x.mutable_data())
      if (std::abs(std::abs(v) - 0.5) < 0.05) v += 0.1;
    check("clamp", weighted([](V x) { return clamp(x[0], -0.5, 0.5); }, rng), {x});
  }

  // Reductions.
  check("sum", [](V x) { return sum(x[0]); }, {uniform({3, 4}, rng)});
  check("mean", [](V x) { return mean(x[0]); }, {uniform({3, 4}, rng)});
  check("max", [](V x) { return scale(max(x[0]), 1.7); }, {distinct({3, 4}, rng)});

  // Linear algebra and layout.
  check("matmul", weighted([](V x) { return matmul(x[0], x[1]); }, rng),
        {uniform({3, 5}, rng), uniform({5, 2}, rng)});
  check("transpose", weighted([](V x) { return transpose(x[0]); }, rng), {uniform({3, 5}, rng)});
  check("reshape", weighted([](V x) { return reshape(x[0], {5, 3}); }, rng),
        {uniform({3, 5}, rng)});
  check("concat_rows", weighted([](V x) { return concat({x[0], x[1]}, 0); }, rng),
        {uniform({2, 3}, rng), uniform({4, 3}, rng)});
  check("concat_cols", weighted([](V x) { return concat({x[0], x[1]}, 1); }, rng),
        {uniform({2, 3}, rng), uniform({2, 2}, rng)});
  check("slice_rows", weighted([](V x) { return slice(x[0], 0, 1, 3); }, rng),
        {uniform({4, 3}, rng)});
  check("slice_cols", weighted([](V x) { return slice(x[0], 1, 1, 4); }, rng),
        {uniform({3, 5}, rng)});

  // Row-wise ops.
  check("l2_normalize", weighted([](V x) { return l2_normalize(x[0]); }, rng),
        {uniform({3, 4}, rng)});
  check("softmax", weighted([](V x) { return softmax(x[0]); }, rng), {uniform({3, 4}, rng)});
  check("log_softmax", weighted([](V x) { return log_softmax(x[0]); }, rng),
        {uniform({3, 4}, rng)});
  check("add_row", weighted([](V x) { return add_row(x[0], x[1]); }, rng),
        {uniform({3, 4}, rng), uniform({4}, rng)});
  check("mul_row", weighted([](V x) { return mul_row(x[0], x[1]); }, rng),
        {uniform({3, 4}, rng), uniform({4}, rng)});
  check("layer_norm", weighted([](V x) { return layer_norm(x[0]); }, rng),
        {uniform({3, 6}, rng)});

  // Convolution, pooling, indexing.
  check("conv2d", weighted([](V x) { return conv2d(x[0], x[1], x[2]); }, rng),
        {uniform({2, 2, 5, 6}, rng), uniform({3, 2, 3, 3}, rng), uniform({3}, rng)});
  check("conv2d_wide", weighted([](V x) { return conv2d(x[0], x[1], x[2]); }, rng),
        {uniform({1, 3, 4, 9}, rng), uniform({5, 3, 3, 3}, rng), uniform({5}, rng)});
  check("avg_pool2x2", weighted([](V x) { return avg_pool2x2(x[0]); }, rng),
        {uniform({2, 2, 5, 4}, rng)});
  check("spatial_mean", weighted([](V x) { return spatial_mean(x[0]); }, rng),
        {uniform({2, 3, 2, 4}, rng)});
  {
    const std::vector<int> ids = {3, 0, 3, 5};
    check("embedding", weighted([ids](V x) { return embedding(x[0], ids); }, rng),
          {uniform({6, 4}, rng)});
  }
  {
    const std::vector<std::size_t> idx = {2, 0, 3};
    check("pick", weighted([idx](V x) { return pick(x[0], idx); }, rng), {uniform({3, 4}, rng)});
  }

  // Losses.
  check("contrastive_loss",
        [](V x) { return contrastive_loss(l2_normalize(x[0]), l2_normalize(x[1]), x[2]); },
        {uniform({4, 5}, rng), uniform({4, 5}, rng), Tensor::scalar(std::log(0.5))});
  {
    const auto labels = random_labels(6, 3, rng);
    check("acpt_cls_loss",
          [labels](V x) {
            return acpt_cls_loss(l2_normalize(x[0]), l2_normalize(x[1]), labels, 0.07);
          },
          {uniform({6, 5}, rng), uniform({3, 5}, rng)});
  }
  {
    // Resample until every hinge is at least 1e-3 from its kink.
    std::vector<int> labels;
    Tensor t, u;
    do {
      labels = random_labels(6, 3, rng);
      t = uniform({6, 5}, rng);
      u = uniform({3, 5}, rng);
    } while (min_hinge_slack(t, u, labels) < 1e-3);
    check("acpt_rank_loss",
          [labels](V x) { return acpt_rank_loss(l2_normalize(x[0]), l2_normalize(x[1]), labels); },
          {t, u});
    check("acpt_loss",
          [labels](V x) {
            return acpt_loss(l2_normalize(x[0]), l2_normalize(x[1]), labels, 0.07);
          },
          {t, u});
  }
  {
    std::vector<int> labels;
    Tensor f, w;
    do {
      labels = random_labels(5, 3, rng);
      f = uniform({5, 4}, rng);
      w = uniform({3, 4}, rng);
    } while (max_abs_cosine(f, w) > 0.999);
    const ArcFaceConfig cfg{16.0, 0.2};
    check("arcface_loss", [labels, cfg](V x) { return arcface_loss(x[0], x[1], labels, cfg); },
          {f, w});
    check("softmax_classifier_loss",
          [labels](V x) { return softmax_classifier_loss(x[0], x[1], labels); }, {f, w});
  }

  // Encoders on tiny instances.
  {
    const ClepModel model = ClepModel::init(derive_seed(seed, 7));
    check("encode_audio", [&model](V x) { return sum(encode_audio(model, x[0])); },
          {uniform({2, 20, kNumMelBands}, rng, -3.0, 3.0)});
    std::vector<bool> attend(10, true);
    for (std::size_t i = 7; i < 10; ++i) attend[i] = false;
    check("text_encoder",
          weighted(
              [&model, attend](V x) {
                return l2_normalize(model.text_proj(model.text.forward_embedded(x[0], attend)));
              },
              rng),
          {uniform({10, kTokenDim}, rng, -0.1, 0.1)});
    const std::vector<int> happy = {token_id("happy")};
    check("encode_prompted_class",
          weighted(
              [&model, happy](V x) {
                const PromptBank bank(x[0]);
                return encode_prompted_class(model, bank, 1, happy);
              },
              rng),
          {uniform({2, 3, kTokenDim}, rng, -0.05, 0.05)});
  }
  return out;
}

}  // namespace clepdg
