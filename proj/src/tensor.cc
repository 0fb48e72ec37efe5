// src/tensor.cc

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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <sstream>

#include "clepdg/error.h"

namespace clepdg {

using detail::TensorImpl;
using ImplPtr = std::shared_ptr<TensorImpl>;

std::size_t shape_numel(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_to_string(const Shape &shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

std::atomic<std::uint64_t> g_next_id{1};
thread_local bool t_grad_enabled = true;

ImplPtr new_impl(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size())
    throw ShapeError("tensor: shape " + shape_to_string(shape) + " holds " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(data.size()));
  for (auto d : shape)
    if (d == 0) throw ShapeError("tensor: zero-sized dimension in " + shape_to_string(shape));
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  impl->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return impl;
}

std::vector<double> &grad_of(TensorImpl &t) {
  if (t.grad.empty()) t.grad.assign(t.data.size(), 0.0);
  return t.grad;
}

// The closure sees the output tensor: its value (for ops whose derivative is
// cheapest in terms of the result) and its accumulated gradient.
using BackwardFn = std::function<void(const TensorImpl &out)>;

Tensor record_impl(const char *op, Shape shape, std::vector<double> data,
                   const std::vector<const Tensor *> &inputs, BackwardFn fn) {
  bool needs = false;
  if (t_grad_enabled)
    for (auto *in : inputs) needs = needs || in->requires_grad();
  auto out = new_impl(std::move(shape), std::move(data), needs);
  if (needs) {
    GraphNode node;
    node.op = op;
    for (auto *in : inputs) node.inputs.push_back(in->id());
    node.output = out->id;
    std::weak_ptr<TensorImpl> weak = out;
    node.backward = [weak, fn = std::move(fn)]() {
      auto o = weak.lock();
      if (o && !o->grad.empty()) fn(*o);
    };
    Graph::current().record(std::move(node));
  }
  return Tensor(out);
}

Tensor record(const char *op, Shape shape, std::vector<double> data,
              std::initializer_list<const Tensor *> inputs, BackwardFn fn) {
  return record_impl(op, std::move(shape), std::move(data),
                     std::vector<const Tensor *>(inputs), std::move(fn));
}

void require_rank(const char *op, const Tensor &t, std::size_t rank) {
  if (t.rank() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + shape_to_string(t.shape()));
}

enum class Bcast { kSame, kScalarA, kScalarB };

Bcast broadcast_kind(const char *op, const Tensor &a, const Tensor &b, Shape *out) {
  if (a.shape() == b.shape()) {
    *out = a.shape();
    return Bcast::kSame;
  }
  if (b.numel() == 1) {
    *out = a.shape();
    return Bcast::kScalarB;
  }
  if (a.numel() == 1) {
    *out = b.shape();
    return Bcast::kScalarA;
  }
  throw ShapeError(std::string(op) + ": shapes " + shape_to_string(a.shape()) +
                   " and " + shape_to_string(b.shape()) + " do not conform");
}

template <class Fwd, class DA, class DB>
Tensor binary(const char *op, const Tensor &a, const Tensor &b, Fwd fwd, DA da, DB db) {
  Shape shape;
  const Bcast kind = broadcast_kind(op, a, b, &shape);
  const std::size_t n = shape_numel(shape);
  std::vector<double> out(n);
  const double *ad = a.data().data();
  const double *bd = b.data().data();
  const std::size_t sa = kind == Bcast::kScalarA ? 0 : 1;
  const std::size_t sb = kind == Bcast::kScalarB ? 0 : 1;
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(ad[i * sa], bd[i * sb]);
  auto pa = a.impl();
  auto pb = b.impl();
  return record(op, std::move(shape), std::move(out), {&a, &b},
                [pa, pb, sa, sb, da, db](const TensorImpl &o) {
                  const auto &g = o.grad;
                  const auto &av = pa->data;
                  const auto &bv = pb->data;
                  if (pa->requires_grad) {
                    auto &ga = grad_of(*pa);
                    for (std::size_t i = 0; i < g.size(); ++i)
                      ga[i * sa] += g[i] * da(av[i * sa], bv[i * sb]);
                  }
                  if (pb->requires_grad) {
                    auto &gb = grad_of(*pb);
                    for (std::size_t i = 0; i < g.size(); ++i)
                      gb[i * sb] += g[i] * db(av[i * sa], bv[i * sb]);
                  }
                });
}

// Deriv receives (input, output).
template <class Fwd, class Deriv>
Tensor unary(const char *op, const Tensor &a, Fwd fwd, Deriv deriv) {
  std::vector<double> out(a.numel());
  auto d = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(d[i]);
  auto pa = a.impl();
  return record(op, a.shape(), std::move(out), {&a}, [pa, deriv](const TensorImpl &o) {
    auto &ga = grad_of(*pa);
    for (std::size_t i = 0; i < o.grad.size(); ++i)
      ga[i] += o.grad[i] * deriv(pa->data[i], o.data[i]);
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() : impl_(new_impl({1}, {0.0}, false)) {}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(new_impl(std::move(shape), std::move(data), requires_grad)) {}

Tensor::Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows,
                         bool requires_grad) {
  if (rows.size() == 0) throw ShapeError("from_rows: no rows");
  const std::size_t width = rows.begin()->size();
  std::vector<double> data;
  for (const auto &r : rows) {
    if (r.size() != width) throw ShapeError("from_rows: ragged rows");
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor({rows.size(), width}, std::move(data), requires_grad);
}

Tensor Tensor::from_values(std::initializer_list<double> values, bool requires_grad) {
  return Tensor({values.size()}, std::vector<double>(values), requires_grad);
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank())
    throw ShapeError("dim: axis " + std::to_string(axis) + " out of range for " +
                     shape_to_string(shape()));
  return impl_->shape[axis];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  if (rank() != 2) throw ShapeError("at: tensor is not a matrix");
  return impl_->data[row * impl_->shape[1] + col];
}

double Tensor::item() const {
  if (numel() != 1)
    throw ContractError("item: tensor of shape " + shape_to_string(shape()) +
                        " is not a scalar");
  return impl_->data[0];
}

std::span<const double> Tensor::grad() const {
  if (impl_->grad.empty()) throw ContractError("grad: no gradient has been accumulated");
  return impl_->grad;
}

std::span<double> Tensor::mutable_grad() { return grad_of(*impl_); }

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->data, false); }

// ---------------------------------------------------------------------------
// Graph

Graph &Graph::current() {
  thread_local Graph graph;
  return graph;
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

void backward(const Tensor &root) {
  if (root.numel() != 1)
    throw ContractError("backward: root must be a scalar, got shape " +
                        shape_to_string(root.shape()));
  if (!root.requires_grad())
    throw ContractError("backward: root does not depend on any tensor requiring grad");
  auto &graph = Graph::current();
  grad_of(*root.impl())[0] += 1.0;
  const auto &nodes = graph.nodes();
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) it->backward();
  graph.clear();
}

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor &a, const Tensor &b) {
  return binary("add", a, b, [](double x, double y) { return x + y; },
                [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor &a, const Tensor &b) {
  return binary("sub", a, b, [](double x, double y) { return x - y; },
                [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor &a, const Tensor &b) {
  return binary("mul", a, b, [](double x, double y) { return x * y; },
                [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor exp(const Tensor &a) {
  return unary("exp", a, [](double x) { return std::exp(x); },
               [](double, double y) { return y; });
}

Tensor log(const Tensor &a) {
  for (double v : a.data())
    if (!(v > 0.0))
      throw DomainError("log: non-positive input " + std::to_string(v));
  return unary("log", a, [](double x) { return std::log(x); },
               [](double x, double) { return 1.0 / x; });
}

Tensor relu(const Tensor &a) {
  return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor neg(const Tensor &a) {
  return unary("neg", a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor &a, double factor) {
  return unary("scale", a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Tensor acos(const Tensor &a) {
  for (double v : a.data())
    if (!(v >= -1.0 && v <= 1.0))
      throw DomainError("acos: input " + std::to_string(v) + " outside [-1, 1]");
  return unary("acos", a, [](double x) { return std::acos(x); },
               [](double x, double) { return -1.0 / std::sqrt(1.0 - x * x); });
}

Tensor cos(const Tensor &a) {
  return unary("cos", a, [](double x) { return std::cos(x); },
               [](double x, double) { return -std::sin(x); });
}

Tensor clamp(const Tensor &a, double lo, double hi) {
  if (lo > hi) throw ContractError("clamp: lo > hi");
  return unary("clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor cos_add_angle(const Tensor &c, double angle, double edge) {
  const double ca = std::cos(angle), sa = std::sin(angle);
  return unary(
      "cos_add_angle", c,
      [ca, sa](double x) {
        x = std::clamp(x, -1.0, 1.0);
        return x * ca - std::sqrt(1.0 - x * x) * sa;
      },
      [ca, sa, edge](double x, double) {
        const double xc = std::clamp(x, -1.0 + edge, 1.0 - edge);
        return ca + xc * sa / std::sqrt(1.0 - xc * xc);
      });
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum(const Tensor &a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  auto pa = a.impl();
  return record("sum", {1}, {s}, {&a}, [pa](const TensorImpl &o) {
    auto &ga = grad_of(*pa);
    for (auto &g : ga) g += o.grad[0];
  });
}

Tensor mean(const Tensor &a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  const double n = static_cast<double>(a.numel());
  auto pa = a.impl();
  return record("mean", {1}, {s / n}, {&a}, [pa, n](const TensorImpl &o) {
    auto &ga = grad_of(*pa);
    for (auto &g : ga) g += o.grad[0] / n;
  });
}

Tensor max(const Tensor &a) {
  auto d = a.data();
  const std::size_t arg = static_cast<std::size_t>(std::max_element(d.begin(), d.end()) - d.begin());
  auto pa = a.impl();
  return record("max", {1}, {d[arg]}, {&a}, [pa, arg](const TensorImpl &o) {
    grad_of(*pa)[arg] += o.grad[0];
  });
}

// ---------------------------------------------------------------------------
// Linear algebra and layout

Tensor matmul(const Tensor &a, const Tensor &b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k)
    throw ShapeError("matmul: inner dimensions differ, " + shape_to_string(a.shape()) +
                     " x " + shape_to_string(b.shape()));
  std::vector<double> out(m * n, 0.0);
  const double *ad = a.data().data();
  const double *bd = b.data().data();
  for (std::size_t i = 0; i < m; ++i) {
    double *row = out.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ad[i * k + p];
      const double *brow = bd + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  auto pa = a.impl();
  auto pb = b.impl();
  return record("matmul", {m, n}, std::move(out), {&a, &b},
                [pa, pb, m, k, n](const TensorImpl &o) {
                  const double *g = o.grad.data();
                  if (pa->requires_grad) {
                    auto &ga = grad_of(*pa);
                    const double *bd = pb->data.data();
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t p = 0; p < k; ++p) {
                        double s = 0.0;
                        for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bd[p * n + j];
                        ga[i * k + p] += s;
                      }
                  }
                  if (pb->requires_grad) {
                    auto &gb = grad_of(*pb);
                    const double *ad = pa->data.data();
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t p = 0; p < k; ++p) {
                        const double av = ad[i * k + p];
                        for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
                      }
                  }
                });
}

Tensor transpose(const Tensor &a) {
  require_rank("transpose", a, 2);
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  auto d = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = d[i * n + j];
  auto pa = a.impl();
  return record("transpose", {n, m}, std::move(out), {&a}, [pa, m, n](const TensorImpl &o) {
    auto &ga = grad_of(*pa);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += o.grad[j * m + i];
  });
}

Tensor reshape(const Tensor &a, Shape shape) {
  if (shape_numel(shape) != a.numel())
    throw ShapeError("reshape: cannot view " + shape_to_string(a.shape()) + " as " +
                     shape_to_string(shape));
  auto pa = a.impl();
  return record("reshape", std::move(shape), a.impl()->data, {&a}, [pa](const TensorImpl &o) {
    auto &ga = grad_of(*pa);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i];
  });
}

namespace {
struct AxisSplit {
  std::size_t outer, len, inner;
};
AxisSplit split_axis(const Shape &s, std::size_t axis) {
  AxisSplit r{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}
}  // namespace

Tensor concat(const std::vector<Tensor> &parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Shape &first = parts[0].shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto &p : parts) {
    bool ok = p.rank() == first.size();
    for (std::size_t i = 0; ok && i < first.size(); ++i)
      if (i != axis && p.shape()[i] != first[i]) ok = false;
    if (!ok)
      throw ShapeError("concat: shape " + shape_to_string(p.shape()) +
                       " does not conform with " + shape_to_string(first) + " on axis " +
                       std::to_string(axis));
    out_shape[axis] += p.shape()[axis];
  }
  const AxisSplit os = split_axis(out_shape, axis);
  std::vector<double> out(shape_numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto &p : parts) {
    offsets.push_back(off);
    const AxisSplit ps = split_axis(p.shape(), axis);
    auto d = p.data();
    for (std::size_t o = 0; o < os.outer; ++o)
      std::copy_n(d.begin() + o * ps.len * ps.inner, ps.len * ps.inner,
                  out.begin() + (o * os.len + off) * os.inner);
    off += ps.len;
  }
  std::vector<const Tensor *> ins;
  std::vector<ImplPtr> impls;
  for (const auto &p : parts) {
    ins.push_back(&p);
    impls.push_back(p.impl());
  }
  return record_impl("concat", std::move(out_shape), std::move(out), ins,
                     [impls, offsets, os](const TensorImpl &o) {
                       for (std::size_t k = 0; k < impls.size(); ++k) {
                         auto &pi = *impls[k];
                         if (!pi.requires_grad) continue;
                         auto &gi = grad_of(pi);
                         const std::size_t len = pi.data.size() / os.outer / os.inner;
                         for (std::size_t q = 0; q < os.outer; ++q)
                           for (std::size_t t = 0; t < len * os.inner; ++t)
                             gi[q * len * os.inner + t] +=
                                 o.grad[(q * os.len + offsets[k]) * os.inner + t];
                       }
                     });
}

Tensor slice(const Tensor &a, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= a.rank()) throw ShapeError("slice: axis out of range");
  if (begin >= end || end > a.shape()[axis])
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") invalid for axis of size " + std::to_string(a.shape()[axis]));
  const AxisSplit is = split_axis(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[axis] = end - begin;
  const std::size_t len = end - begin;
  std::vector<double> out(shape_numel(out_shape));
  auto d = a.data();
  for (std::size_t o = 0; o < is.outer; ++o)
    std::copy_n(d.begin() + (o * is.len + begin) * is.inner, len * is.inner,
                out.begin() + o * len * is.inner);
  auto pa = a.impl();
  return record("slice", std::move(out_shape), std::move(out), {&a},
                [pa, is, begin, len](const TensorImpl &o) {
                  auto &ga = grad_of(*pa);
                  for (std::size_t q = 0; q < is.outer; ++q)
                    for (std::size_t t = 0; t < len * is.inner; ++t)
                      ga[(q * is.len + begin) * is.inner + t] += o.grad[q * len * is.inner + t];
                });
}

// ---------------------------------------------------------------------------
// Row-wise ops along the last axis

Tensor l2_normalize(const Tensor &a) {
  const std::size_t w = a.shape().back(), rows = a.numel() / w;
  std::vector<double> out(a.numel());
  std::vector<double> norms(rows);
  auto d = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t j = 0; j < w; ++j) s += d[r * w + j] * d[r * w + j];
    const double nrm = std::sqrt(s);
    if (!(nrm > 0.0)) throw DomainError("l2_normalize: zero-norm row " + std::to_string(r));
    norms[r] = nrm;
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] = d[r * w + j] / nrm;
  }
  auto pa = a.impl();
  return record("l2_normalize", a.shape(), std::move(out), {&a},
                [pa, norms, w, rows](const TensorImpl &o) {
                  auto &ga = grad_of(*pa);
                  for (std::size_t r = 0; r < rows; ++r) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < w; ++j) dot += o.data[r * w + j] * o.grad[r * w + j];
                    for (std::size_t j = 0; j < w; ++j)
                      ga[r * w + j] += (o.grad[r * w + j] - o.data[r * w + j] * dot) / norms[r];
                  }
                });
}

Tensor softmax(const Tensor &a) {
  const std::size_t w = a.shape().back(), rows = a.numel() / w;
  std::vector<double> out(a.numel());
  auto d = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double *x = d.data() + r * w;
    const double mx = *std::max_element(x, x + w);
    double s = 0.0;
    for (std::size_t j = 0; j < w; ++j) s += (out[r * w + j] = std::exp(x[j] - mx));
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] /= s;
  }
  auto pa = a.impl();
  return record("softmax", a.shape(), std::move(out), {&a}, [pa, w, rows](const TensorImpl &o) {
    auto &ga = grad_of(*pa);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < w; ++j) dot += o.data[r * w + j] * o.grad[r * w + j];
      for (std::size_t j = 0; j < w; ++j)
        ga[r * w + j] += o.data[r * w + j] * (o.grad[r * w + j] - dot);
    }
  });
}

Tensor log_softmax(const Tensor &a) {
  const std::size_t w = a.shape().back(), rows = a.numel() / w;
  std::vector<double> out(a.numel());
  auto d = a.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double *x = d.data() + r * w;
    const double mx = *std::max_element(x, x + w);
    double s = 0.0;
    for (std::size_t j = 0; j < w; ++j) s += std::exp(x[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] = x[j] - lse;
  }
  auto pa = a.impl();
  return record("log_softmax", a.shape(), std::move(out), {&a},
                [pa, w, rows](const TensorImpl &o) {
                  auto &ga = grad_of(*pa);
                  for (std::size_t r = 0; r < rows; ++r) {
                    double gs = 0.0;
                    for (std::size_t j = 0; j < w; ++j) gs += o.grad[r * w + j];
                    for (std::size_t j = 0; j < w; ++j)
                      ga[r * w + j] += o.grad[r * w + j] - std::exp(o.data[r * w + j]) * gs;
                  }
                });
}

Tensor add_row(const Tensor &x, const Tensor &b) {
  const std::size_t w = x.shape().back();
  if (b.rank() != 1 || b.dim(0) != w)
    throw ShapeError("add_row: bias " + shape_to_string(b.shape()) + " does not match rows of " +
                     shape_to_string(x.shape()));
  const std::size_t rows = x.numel() / w;
  std::vector<double> out(x.data().begin(), x.data().end());
  auto bd = b.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] += bd[j];
  auto px = x.impl();
  auto pb = b.impl();
  return record("add_row", x.shape(), std::move(out), {&x, &b},
                [px, pb, w, rows](const TensorImpl &o) {
                  if (px->requires_grad) {
                    auto &gx = grad_of(*px);
                    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i];
                  }
                  if (pb->requires_grad) {
                    auto &gb = grad_of(*pb);
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t j = 0; j < w; ++j) gb[j] += o.grad[r * w + j];
                  }
                });
}

Tensor mul_row(const Tensor &x, const Tensor &g) {
  const std::size_t w = x.shape().back();
  if (g.rank() != 1 || g.dim(0) != w)
    throw ShapeError("mul_row: gain " + shape_to_string(g.shape()) + " does not match rows of " +
                     shape_to_string(x.shape()));
  const std::size_t rows = x.numel() / w;
  std::vector<double> out(x.numel());
  auto xd = x.data();
  auto gd = g.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] = xd[r * w + j] * gd[j];
  auto px = x.impl();
  auto pg = g.impl();
  return record("mul_row", x.shape(), std::move(out), {&x, &g},
                [px, pg, w, rows](const TensorImpl &o) {
                  if (px->requires_grad) {
                    auto &gx = grad_of(*px);
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t j = 0; j < w; ++j)
                        gx[r * w + j] += o.grad[r * w + j] * pg->data[j];
                  }
                  if (pg->requires_grad) {
                    auto &gg = grad_of(*pg);
                    for (std::size_t r = 0; r < rows; ++r)
                      for (std::size_t j = 0; j < w; ++j)
                        gg[j] += o.grad[r * w + j] * px->data[r * w + j];
                  }
                });
}

Tensor layer_norm(const Tensor &x, double eps) {
  const std::size_t w = x.shape().back(), rows = x.numel() / w;
  std::vector<double> out(x.numel());
  std::vector<double> inv_std(rows);
  auto d = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double *v = d.data() + r * w;
    double mu = 0.0;
    for (std::size_t j = 0; j < w; ++j) mu += v[j];
    mu /= static_cast<double>(w);
    double var = 0.0;
    for (std::size_t j = 0; j < w; ++j) var += (v[j] - mu) * (v[j] - mu);
    var /= static_cast<double>(w);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < w; ++j) out[r * w + j] = (v[j] - mu) * inv_std[r];
  }
  auto px = x.impl();
  return record("layer_norm", x.shape(), std::move(out), {&x},
                [px, inv_std, w, rows](const TensorImpl &o) {
                  auto &gx = grad_of(*px);
                  const double n = static_cast<double>(w);
                  for (std::size_t r = 0; r < rows; ++r) {
                    const double *g = o.grad.data() + r * w;
                    const double *y = o.data.data() + r * w;
                    double gmean = 0.0, gy = 0.0;
                    for (std::size_t j = 0; j < w; ++j) {
                      gmean += g[j];
                      gy += g[j] * y[j];
                    }
                    gmean /= n;
                    gy /= n;
                    for (std::size_t j = 0; j < w; ++j)
                      gx[r * w + j] += inv_std[r] * (g[j] - gmean - y[j] * gy);
                  }
                });
}

// ---------------------------------------------------------------------------
// Convolution and pooling
//
// The convolution works on a zero-padded copy of each input plane laid out
// with row stride Wp = W + K - 1. Output rows are computed with the same
// stride so every kernel tap reads a contiguous run of the padded plane; the
// K - 1 trailing columns of each output row are scratch and discarded.

namespace {

constexpr std::size_t kConvLanes = 8;  // output columns per register block

struct ConvGeom {
  std::size_t batch, cin, cout, h, w, k, pad, wp, hp, plane_pad, span, span_r;
};

ConvGeom conv_geom(const Tensor &x, const Tensor &weight) {
  ConvGeom g{};
  g.batch = x.dim(0);
  g.cin = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.cout = weight.dim(0);
  g.k = weight.dim(2);
  g.pad = g.k / 2;
  g.wp = g.w + g.k - 1;
  g.hp = g.h + g.k - 1;
  g.span = g.h * g.wp;
  g.span_r = (g.span + kConvLanes - 1) / kConvLanes * kConvLanes;
  // Slack so the last lane block of the last row may read past the final
  // padded row.
  g.plane_pad = g.hp * g.wp + g.k + kConvLanes;
  return g;
}

void pad_planes(const ConvGeom &g, std::size_t planes, const double *src,
                std::vector<double> &dst) {
  dst.assign(planes * g.plane_pad, 0.0);
  for (std::size_t c = 0; c < planes; ++c)
    for (std::size_t r = 0; r < g.h; ++r)
      std::copy_n(src + (c * g.h + r) * g.w, g.w,
                  dst.data() + c * g.plane_pad + (r + g.pad) * g.wp + g.pad);
}

// out[co] (+)= bias[co] + sum_{ci,kh,kw} w[co,ci,kh,kw] * in[ci](r+kh, c+kw)
// over padded input planes, CB output channels at a time.
template <std::size_t CB>
void conv_block(const ConvGeom &g, std::size_t cin, std::size_t co, const double *padded,
                const double *w, const double *bias, double *out, double *scratch) {
  const std::size_t kk = g.k * g.k;
  for (std::size_t s = 0; s < g.span_r; s += kConvLanes) {
    double acc[CB][kConvLanes];
    for (std::size_t q = 0; q < CB; ++q)
      for (std::size_t l = 0; l < kConvLanes; ++l) acc[q][l] = bias ? bias[co + q] : 0.0;
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const double *plane = padded + ci * g.plane_pad + s;
      for (std::size_t kh = 0; kh < g.k; ++kh)
        for (std::size_t kw = 0; kw < g.k; ++kw) {
          const double *xp = plane + kh * g.wp + kw;
          double wq[CB];
          for (std::size_t q = 0; q < CB; ++q) wq[q] = w[((co + q) * cin + ci) * kk + kh * g.k + kw];
          for (std::size_t q = 0; q < CB; ++q)
            for (std::size_t l = 0; l < kConvLanes; ++l) acc[q][l] += wq[q] * xp[l];
        }
    }
    for (std::size_t q = 0; q < CB; ++q)
      for (std::size_t l = 0; l < kConvLanes; ++l) scratch[q * g.span_r + s + l] = acc[q][l];
  }
  for (std::size_t q = 0; q < CB; ++q)
    for (std::size_t r = 0; r < g.h; ++r) {
      const double *src = scratch + q * g.span_r + r * g.wp;
      double *dst = out + ((co + q) * g.h + r) * g.w;
      for (std::size_t j = 0; j < g.w; ++j) dst[j] += src[j];
    }
}

// out[cout, h, w] += conv(padded[cin planes], w[cout, cin, k, k]) + bias
void conv_planes(const ConvGeom &g, std::size_t cin, std::size_t cout, const double *padded,
                 const double *w, const double *bias, double *out,
                 std::vector<double> &scratch) {
  scratch.resize(4 * g.span_r);
  std::size_t co = 0;
  for (; co + 4 <= cout; co += 4) conv_block<4>(g, cin, co, padded, w, bias, out, scratch.data());
  for (; co < cout; ++co) conv_block<1>(g, cin, co, padded, w, bias, out, scratch.data());
}

// gw[co,ci,kh,kw] += sum_s gout[co](s) * in[ci](s + kh*wp + kw), with gout in
// the strided layout (zeros in the scratch columns).
template <std::size_t CB>
void conv_weight_grad_block(const ConvGeom &g, std::size_t co, const double *gstrided,
                            const double *padded, double *gw) {
  const std::size_t kk = g.k * g.k;
  for (std::size_t ci = 0; ci < g.cin; ++ci)
    for (std::size_t kh = 0; kh < g.k; ++kh)
      for (std::size_t kw = 0; kw < g.k; ++kw) {
        const double *xp = padded + ci * g.plane_pad + kh * g.wp + kw;
        double acc[CB][kConvLanes] = {};
        for (std::size_t s = 0; s < g.span_r; s += kConvLanes)
          for (std::size_t q = 0; q < CB; ++q)
            for (std::size_t l = 0; l < kConvLanes; ++l)
              acc[q][l] += gstrided[(co + q) * g.span_r + s + l] * xp[s + l];
        for (std::size_t q = 0; q < CB; ++q) {
          double t = 0.0;
          for (std::size_t l = 0; l < kConvLanes; ++l) t += acc[q][l];
          gw[((co + q) * g.cin + ci) * kk + kh * g.k + kw] += t;
        }
      }
}

}  // namespace

Tensor conv2d(const Tensor &x, const Tensor &weight, const Tensor &bias) {
  require_rank("conv2d", x, 4);
  require_rank("conv2d", weight, 4);
  require_rank("conv2d", bias, 1);
  if (weight.dim(1) != x.dim(1) || weight.dim(2) != weight.dim(3) || weight.dim(2) % 2 == 0 ||
      bias.dim(0) != weight.dim(0))
    throw ShapeError("conv2d: input " + shape_to_string(x.shape()) + ", weight " +
                     shape_to_string(weight.shape()) + ", bias " +
                     shape_to_string(bias.shape()) + " do not conform");
  const ConvGeom g = conv_geom(x, weight);
  const std::size_t in_plane = g.cin * g.h * g.w, out_plane = g.cout * g.h * g.w;
  std::vector<double> out(g.batch * out_plane, 0.0);
  std::vector<double> padded, scratch;
  const double *xd = x.data().data();
  for (std::size_t b = 0; b < g.batch; ++b) {
    pad_planes(g, g.cin, xd + b * in_plane, padded);
    conv_planes(g, g.cin, g.cout, padded.data(), weight.data().data(), bias.data().data(),
                out.data() + b * out_plane, scratch);
  }
  auto px = x.impl();
  auto pw = weight.impl();
  auto pb = bias.impl();
  return record(
      "conv2d", {g.batch, g.cout, g.h, g.w}, std::move(out), {&x, &weight, &bias},
      [px, pw, pb, g, in_plane, out_plane](const TensorImpl &o) {
        double *gw = pw->requires_grad ? grad_of(*pw).data() : nullptr;
        double *gb = pb->requires_grad ? grad_of(*pb).data() : nullptr;
        double *gx = px->requires_grad ? grad_of(*px).data() : nullptr;
        const std::size_t kk = g.k * g.k;
        // Input gradient is a forward convolution of the output gradient with
        // the spatially flipped, channel-transposed kernel.
        std::vector<double> wflip;
        if (gx) {
          wflip.resize(pw->data.size());
          for (std::size_t co = 0; co < g.cout; ++co)
            for (std::size_t ci = 0; ci < g.cin; ++ci)
              for (std::size_t t = 0; t < kk; ++t)
                wflip[(ci * g.cout + co) * kk + (kk - 1 - t)] = pw->data[(co * g.cin + ci) * kk + t];
        }
        std::vector<double> padded, gstrided, gpadded, scratch;
        for (std::size_t b = 0; b < g.batch; ++b) {
          const double *go = o.grad.data() + b * out_plane;
          if (gb)
            for (std::size_t co = 0; co < g.cout; ++co) {
              double s = 0.0;
              for (std::size_t i = 0; i < g.h * g.w; ++i) s += go[co * g.h * g.w + i];
              gb[co] += s;
            }
          if (gw) {
            pad_planes(g, g.cin, px->data.data() + b * in_plane, padded);
            gstrided.assign(g.cout * g.span_r, 0.0);
            for (std::size_t co = 0; co < g.cout; ++co)
              for (std::size_t r = 0; r < g.h; ++r)
                std::copy_n(go + (co * g.h + r) * g.w, g.w,
                            gstrided.data() + co * g.span_r + r * g.wp);
            std::size_t co = 0;
            for (; co + 4 <= g.cout; co += 4)
              conv_weight_grad_block<4>(g, co, gstrided.data(), padded.data(), gw);
            for (; co < g.cout; ++co)
              conv_weight_grad_block<1>(g, co, gstrided.data(), padded.data(), gw);
          }
          if (gx) {
            pad_planes(g, g.cout, go, gpadded);
            conv_planes(g, g.cout, g.cin, gpadded.data(), wflip.data(), nullptr,
                        gx + b * in_plane, scratch);
          }
        }
      });
}

Tensor avg_pool2x2(const Tensor &x) {
  require_rank("avg_pool2x2", x, 4);
  const std::size_t nb = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = h / 2, ow = w / 2;
  if (oh == 0 || ow == 0)
    throw ShapeError("avg_pool2x2: input " + shape_to_string(x.shape()) + " too small");
  std::vector<double> out(nb * oh * ow);
  auto d = x.data();
  for (std::size_t p = 0; p < nb; ++p)
    for (std::size_t r = 0; r < oh; ++r)
      for (std::size_t c = 0; c < ow; ++c) {
        const double *s = d.data() + p * h * w + 2 * r * w + 2 * c;
        out[(p * oh + r) * ow + c] = 0.25 * ((s[0] + s[1]) + (s[w] + s[w + 1]));
      }
  auto px = x.impl();
  return record("avg_pool2x2", {x.dim(0), x.dim(1), oh, ow}, std::move(out), {&x},
                [px, nb, h, w, oh, ow](const TensorImpl &o) {
                  auto &gx = grad_of(*px);
                  for (std::size_t p = 0; p < nb; ++p)
                    for (std::size_t r = 0; r < oh; ++r)
                      for (std::size_t c = 0; c < ow; ++c) {
                        const double gq = 0.25 * o.grad[(p * oh + r) * ow + c];
                        double *t = gx.data() + p * h * w + 2 * r * w + 2 * c;
                        t[0] += gq;
                        t[1] += gq;
                        t[w] += gq;
                        t[w + 1] += gq;
                      }
                });
}

Tensor spatial_mean(const Tensor &x) {
  require_rank("spatial_mean", x, 4);
  const std::size_t nb = x.dim(0) * x.dim(1), area = x.dim(2) * x.dim(3);
  std::vector<double> out(nb);
  auto d = x.data();
  for (std::size_t p = 0; p < nb; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < area; ++i) s += d[p * area + i];
    out[p] = s / static_cast<double>(area);
  }
  auto px = x.impl();
  return record("spatial_mean", {x.dim(0), x.dim(1)}, std::move(out), {&x},
                [px, nb, area](const TensorImpl &o) {
                  auto &gx = grad_of(*px);
                  for (std::size_t p = 0; p < nb; ++p) {
                    const double gq = o.grad[p] / static_cast<double>(area);
                    for (std::size_t i = 0; i < area; ++i) gx[p * area + i] += gq;
                  }
                });
}

// ---------------------------------------------------------------------------
// Indexing

Tensor embedding(const Tensor &table, std::span<const int> ids) {
  require_rank("embedding", table, 2);
  const std::size_t v = table.dim(0), d = table.dim(1);
  if (ids.empty()) throw ShapeError("embedding: empty id list");
  std::vector<double> out(ids.size() * d);
  auto td = table.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v)
      throw ContractError("embedding: token id " + std::to_string(ids[i]) +
                          " outside vocabulary of size " + std::to_string(v));
    std::copy_n(td.begin() + ids[i] * d, d, out.begin() + i * d);
  }
  auto pt = table.impl();
  std::vector<int> idv(ids.begin(), ids.end());
  return record("embedding", {ids.size(), d}, std::move(out), {&table},
                [pt, idv, d](const TensorImpl &o) {
                  auto &gt = grad_of(*pt);
                  for (std::size_t i = 0; i < idv.size(); ++i)
                    for (std::size_t j = 0; j < d; ++j) gt[idv[i] * d + j] += o.grad[i * d + j];
                });
}

Tensor pick(const Tensor &x, std::span<const std::size_t> index) {
  require_rank("pick", x, 2);
  const std::size_t n = x.dim(0), c = x.dim(1);
  if (index.size() != n)
    throw ShapeError("pick: " + std::to_string(index.size()) + " indices for " +
                     std::to_string(n) + " rows");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (index[i] >= c)
      throw ContractError("pick: index " + std::to_string(index[i]) + " >= " + std::to_string(c));
    out[i] = x.data()[i * c + index[i]];
  }
  auto px = x.impl();
  std::vector<std::size_t> idx(index.begin(), index.end());
  return record("pick", {n}, std::move(out), {&x}, [px, idx, c](const TensorImpl &o) {
    auto &gx = grad_of(*px);
    for (std::size_t i = 0; i < idx.size(); ++i) gx[i * c + idx[i]] += o.grad[i];
  });
}

}  // namespace clepdg
