// include/clepdg/tensor.h

// Copyright 2026  The clepdg Authors

// See ../../COPYING for clarification regarding multiple authors
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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace clepdg {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape &shape);
std::string shape_to_string(const Shape &shape);

namespace detail {
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::uint64_t id = 0;
};
}  // namespace detail

// Dense row-major tensor of doubles. A Tensor is a shared handle: copies
// alias the same storage, use detach() for an independent value.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows,
                          bool requires_grad = false);
  static Tensor from_values(std::initializer_list<double> values,
                            bool requires_grad = false);

  const Shape &shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double operator[](std::size_t i) const { return impl_->data[i]; }
  double at(std::size_t row, std::size_t col) const;
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool value) { impl_->requires_grad = value; }
  bool has_grad() const { return !impl_->grad.empty(); }
  // Throws ContractError when no gradient has been accumulated.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  // Drops the gradient buffer; has_grad() is false afterwards.
  void clear_grad() { impl_->grad.clear(); }

  Tensor detach() const;
  std::uint64_t id() const { return impl_->id; }
  bool same_storage(const Tensor &other) const { return impl_ == other.impl_; }

  const std::shared_ptr<detail::TensorImpl> &impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl);

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// ---------------------------------------------------------------------------
// Graph recording

struct GraphNode {
  std::string op;
  std::vector<std::uint64_t> inputs;
  std::uint64_t output = 0;
  std::function<void()> backward;
};

// Append-only tape of executed operations for the current thread. Nodes are
// recorded only while grad mode is enabled and some input requires grad.
class Graph {
 public:
  static Graph &current();
  std::size_t size() const { return nodes_.size(); }
  const std::vector<GraphNode> &nodes() const { return nodes_; }
  void record(GraphNode node) { nodes_.push_back(std::move(node)); }
  void clear() { nodes_.clear(); }

 private:
  std::vector<GraphNode> nodes_;
};

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;

 private:
  bool previous_;
};

// Reverse pass from a scalar root. Gradients are added to whatever the leaves
// already hold; the tape is cleared afterwards.
void backward(const Tensor &root);

// ---------------------------------------------------------------------------
// Operations. Elementwise binary ops accept equal shapes, or a single-element
// tensor against any shape; nothing else broadcasts implicitly.

Tensor add(const Tensor &a, const Tensor &b);
Tensor sub(const Tensor &a, const Tensor &b);
Tensor mul(const Tensor &a, const Tensor &b);
Tensor matmul(const Tensor &a, const Tensor &b);
Tensor transpose(const Tensor &a);
Tensor sum(const Tensor &a);
Tensor mean(const Tensor &a);
Tensor max(const Tensor &a);
Tensor exp(const Tensor &a);
Tensor log(const Tensor &a);
Tensor relu(const Tensor &a);
Tensor neg(const Tensor &a);
Tensor scale(const Tensor &a, double factor);
Tensor concat(const std::vector<Tensor> &parts, std::size_t axis = 0);
Tensor slice(const Tensor &a, std::size_t axis, std::size_t begin, std::size_t end);
Tensor l2_normalize(const Tensor &a);
Tensor softmax(const Tensor &a);
Tensor log_softmax(const Tensor &a);

Tensor reshape(const Tensor &a, Shape shape);
// x[..., D] + b[D] on every row.
Tensor add_row(const Tensor &x, const Tensor &b);
// x[..., D] * g[D] on every row.
Tensor mul_row(const Tensor &x, const Tensor &g);
// Zero mean, unit variance along the last axis (no affine part).
Tensor layer_norm(const Tensor &x, double eps = 1e-5);
// x[B, Cin, H, W], weight[Cout, Cin, K, K] (K odd), bias[Cout]; stride 1,
// zero "same" padding.
Tensor conv2d(const Tensor &x, const Tensor &weight, const Tensor &bias);
// Non-overlapping 2x2 mean pooling; odd trailing rows/columns are dropped.
Tensor avg_pool2x2(const Tensor &x);
// [B, C, H, W] -> [B, C]
Tensor spatial_mean(const Tensor &x);
// Rows of table[V, D] selected by ids -> [ids.size(), D].
Tensor embedding(const Tensor &table, std::span<const int> ids);
// out[i] = x[i, index[i]] for x[N, C].
Tensor pick(const Tensor &x, std::span<const std::size_t> index);
Tensor acos(const Tensor &a);
Tensor cos(const Tensor &a);
Tensor clamp(const Tensor &a, double lo, double hi);
// cos(acos(c) + angle), evaluated as c cos(angle) - sqrt(1 - c^2) sin(angle)
// with c clamped to [-1, 1]. The derivative is taken at c clamped to
// [-1 + edge, 1 - edge] so it stays finite at the ends.
Tensor cos_add_angle(const Tensor &c, double angle, double edge);

}  // namespace clepdg
