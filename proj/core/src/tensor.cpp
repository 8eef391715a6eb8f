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

#include "sllab/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

#include "sllab/errors.hpp"

namespace sllab {

namespace {

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

bool tracks(Graph* g, std::initializer_list<const Tensor*> inputs) {
  if (g == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor* t) { return t->requires_grad(); });
}

void require_2d(const Tensor& t, const char* op) {
  if (t.ndim() != 2) {
    throw ShapeError(std::string(op) + ": expected a 2-D tensor, got " +
                     shape_to_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     shape_to_string(a.shape()) + " vs " +
                     shape_to_string(b.shape()));
  }
}

double dot(const double* x, const double* y, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += x[i] * y[i];
    s1 += x[i + 1] * y[i + 1];
    s2 += x[i + 2] * y[i + 2];
    s3 += x[i + 3] * y[i + 3];
  }
  for (; i < n; ++i) s0 += x[i] * y[i];
  return (s0 + s1) + (s2 + s3);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// Four doubles; lowered to two SSE registers when AVX is unavailable.
typedef double Vec4 __attribute__((vector_size(32)));

#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wpsabi"

[[gnu::always_inline]] inline Vec4 load4(const double* p) {
  Vec4 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

[[gnu::always_inline]] inline void add_store4(double* p, Vec4 v) {
  v += load4(p);
  std::memcpy(p, &v, sizeof v);
}

// c[m x n] += a[m x k] * b[k x n]. The body works on 4 x 8 register tiles of
// c; edges fall back to scalar dot products.
#if defined(__GNUC__) && defined(__x86_64__) && !defined(__clang__)
[[gnu::target_clones("avx2", "default")]]
#endif
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  auto scalar = [&](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (std::size_t p = 0; p < k; ++p) s += a[i * k + p] * b[p * n + j];
    c[i * n + j] += s;
  };
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* a0 = a + i * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      Vec4 c00 = {}, c01 = {}, c10 = {}, c11 = {}, c20 = {}, c21 = {}, c30 = {}, c31 = {};
      for (std::size_t p = 0; p < k; ++p) {
        const double* bp = b + p * n + j;
        const Vec4 b0 = load4(bp);
        const Vec4 b1 = load4(bp + 4);
        c00 += a0[p] * b0;
        c01 += a0[p] * b1;
        c10 += a1[p] * b0;
        c11 += a1[p] * b1;
        c20 += a2[p] * b0;
        c21 += a2[p] * b1;
        c30 += a3[p] * b0;
        c31 += a3[p] * b1;
      }
      double* cij = c + i * n + j;
      add_store4(cij, c00);
      add_store4(cij + 4, c01);
      add_store4(cij + n, c10);
      add_store4(cij + n + 4, c11);
      add_store4(cij + 2 * n, c20);
      add_store4(cij + 2 * n + 4, c21);
      add_store4(cij + 3 * n, c30);
      add_store4(cij + 3 * n + 4, c31);
    }
    for (; j < n; ++j) {
      for (std::size_t r = 0; r < 4; ++r) scalar(i + r, j);
    }
  }
  for (; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) scalar(i, j);
  }
}

#pragma GCC diagnostic pop

std::vector<double> transposed(const double* x, std::size_t rows, std::size_t cols) {
  std::vector<double> t(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) t[c * rows + r] = x[r * cols + c];
  }
  return t;
}

// c[m x n] += a[m x k] * b[n x k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  const std::vector<double> bt = transposed(b, n, k);
  gemm_nn(a, bt.data(), c, m, k, n);
}

// c[k x n] += a[m x k]^T * b[m x n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m,
             std::size_t k, std::size_t n) {
  const std::vector<double> at = transposed(a, m, k);
  gemm_nn(at.data(), b, c, k, m, n);
}

}  // namespace

std::string shape_to_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  if (shape.empty()) shape = {1};
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive");
  }
  if (product(shape) != data.size()) {
    throw ShapeError("tensor of shape " + shape_to_string(shape) + " given " +
                     std::to_string(data.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return filled(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  const std::size_t n = product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::size() const { return impl_->data.size(); }

std::size_t Tensor::rows() const {
  return impl_->shape.size() == 1 ? 1 : impl_->shape[0];
}

std::size_t Tensor::cols() const { return impl_->shape.back(); }

std::span<const double> Tensor::data() const { return impl_->data; }
std::span<double> Tensor::mutable_data() { return impl_->data; }

double Tensor::item() const {
  if (size() != 1) {
    throw ContractError("item() on a tensor of shape " +
                        shape_to_string(shape()));
  }
  return impl_->data[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
  return impl_->data[r * cols() + c];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }
void Tensor::set_requires_grad(bool value) { impl_->requires_grad = value; }

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }
std::span<const double> Tensor::grad() const { return impl_->grad; }

std::span<double> Tensor::mutable_grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

void Tensor::clear_grad() {
  impl_->grad.clear();
  impl_->grad.shrink_to_fit();
}

Tensor Tensor::clone() const {
  if (!impl_) return {};
  Tensor copy(impl_->shape, impl_->data, impl_->requires_grad);
  copy.impl_->grad = impl_->grad;
  return copy;
}

void Graph::record(Tensor output, std::function<void()> backward_rule) {
  output.set_requires_grad(true);
  nodes_.push_back({std::move(output), std::move(backward_rule)});
}

void Graph::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward requires a scalar loss");
  }
  Tensor seed = loss;
  seed.mutable_grad()[0] = 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    it->backward_rule();
  }
}

void backward(Graph& graph, const Tensor& loss) { graph.backward(loss); }

Tensor matmul(Graph* g, const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul");
  require_2d(b, "matmul");
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " +
                     shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = Tensor::zeros({m, n});
  gemm_nn(a.data().data(), b.data().data(), out.mutable_data().data(), m, k, n);
  if (tracks(g, {&a, &b})) {
    g->record(out, [a, b, out, m, k, n]() mutable {
      const double* dc = out.grad().data();
      if (a.requires_grad()) {
        // da = dc * b^T
        gemm_nt(dc, b.data().data(), a.mutable_grad().data(), m, n, k);
      }
      if (b.requires_grad()) {
        gemm_tn(a.data().data(), dc, b.mutable_grad().data(), m, k, n);
      }
    });
  }
  return out;
}

Tensor matmul_nt(Graph* g, const Tensor& a, const Tensor& b) {
  require_2d(a, "matmul_nt");
  require_2d(b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt: inner dimensions differ, " +
                     shape_to_string(a.shape()) + " x " +
                     shape_to_string(b.shape()) + "^T");
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor out = Tensor::zeros({m, n});
  gemm_nt(a.data().data(), b.data().data(), out.mutable_data().data(), m, k, n);
  if (tracks(g, {&a, &b})) {
    g->record(out, [a, b, out, m, k, n]() mutable {
      const double* dc = out.grad().data();
      if (a.requires_grad()) {
        gemm_nn(dc, b.data().data(), a.mutable_grad().data(), m, n, k);
      }
      if (b.requires_grad()) {
        // db = dc^T * a
        gemm_tn(dc, a.data().data(), b.mutable_grad().data(), m, n, k);
      }
    });
  }
  return out;
}

Tensor add(Graph* g, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> values(a.size());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = x[i] + y[i];
  Tensor out(a.shape(), std::move(values));
  if (tracks(g, {&a, &b})) {
    g->record(out, [a, b, out]() mutable {
      const auto dc = out.grad();
      for (const Tensor* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto dt = t->mutable_grad();
        for (std::size_t i = 0; i < dt.size(); ++i) dt[i] += dc[i];
      }
    });
  }
  return out;
}

Tensor scale(Graph* g, const Tensor& a, double factor) {
  std::vector<double> values(a.data().begin(), a.data().end());
  for (double& v : values) v *= factor;
  Tensor out(a.shape(), std::move(values));
  if (tracks(g, {&a})) {
    g->record(out, [a, out, factor]() mutable {
      const auto dc = out.grad();
      auto da = a.mutable_grad();
      for (std::size_t i = 0; i < da.size(); ++i) da[i] += factor * dc[i];
    });
  }
  return out;
}

Tensor mul(Graph* g, const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> values(a.size());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = x[i] * y[i];
  Tensor out(a.shape(), std::move(values));
  if (tracks(g, {&a, &b})) {
    g->record(out, [a, b, out]() mutable {
      const auto dc = out.grad();
      if (a.requires_grad()) {
        auto da = a.mutable_grad();
        const auto y = b.data();
        for (std::size_t i = 0; i < da.size(); ++i) da[i] += dc[i] * y[i];
      }
      if (b.requires_grad()) {
        auto db = b.mutable_grad();
        const auto x = a.data();
        for (std::size_t i = 0; i < db.size(); ++i) db[i] += dc[i] * x[i];
      }
    });
  }
  return out;
}

Tensor sum(Graph* g, const Tensor& a) {
  const auto x = a.data();
  Tensor out = Tensor::scalar(std::accumulate(x.begin(), x.end(), 0.0));
  if (tracks(g, {&a})) {
    g->record(out, [a, out]() mutable {
      const double dc = out.grad()[0];
      for (double& d : a.mutable_grad()) d += dc;
    });
  }
  return out;
}

Tensor gelu(Graph* g, const Tensor& a) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  constexpr double kK = 0.044715;
  const auto x = a.data();
  std::vector<double> values(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    values[i] = 0.5 * v * (1.0 + std::tanh(kC * (v + kK * v * v * v)));
  }
  Tensor out(a.shape(), std::move(values));
  if (tracks(g, {&a})) {
    g->record(out, [a, out]() mutable {
      const auto dc = out.grad();
      const auto x = a.data();
      auto da = a.mutable_grad();
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        const double t = std::tanh(kC * (v + kK * v * v * v));
        const double dt = (1.0 - t * t) * kC * (1.0 + 3.0 * kK * v * v);
        da[i] += dc[i] * (0.5 * (1.0 + t) + 0.5 * v * dt);
      }
    });
  }
  return out;
}

Tensor softmax_rows(Graph* g, const Tensor& x) {
  require_2d(x, "softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  const auto in = x.data();
  std::vector<double> values(in.size());
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = in.data() + i * n;
    double* y = values.data() + i * n;
    const double peak = *std::max_element(row, row + n);
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      y[j] = std::exp(row[j] - peak);
      total += y[j];
    }
    const double inv = 1.0 / total;
    for (std::size_t j = 0; j < n; ++j) y[j] *= inv;
  }
  Tensor out(x.shape(), std::move(values));
  if (tracks(g, {&x})) {
    g->record(out, [x, out, m, n]() mutable {
      const auto dy = out.grad();
      const auto y = out.data();
      auto dx = x.mutable_grad();
      for (std::size_t i = 0; i < m; ++i) {
        const double inner = dot(dy.data() + i * n, y.data() + i * n, n);
        for (std::size_t j = 0; j < n; ++j) {
          dx[i * n + j] += y[i * n + j] * (dy[i * n + j] - inner);
        }
      }
    });
  }
  return out;
}

Tensor embedding_lookup(Graph* g, const Tensor& table, std::span<const int> ids) {
  require_2d(table, "embedding_lookup");
  if (ids.empty()) throw ContractError("embedding_lookup: no ids");
  const std::size_t vocab = table.rows(), d = table.cols();
  std::vector<double> values(ids.size() * d);
  const auto src = table.data();
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] < 0 || static_cast<std::size_t>(ids[t]) >= vocab) {
      throw IndexError("embedding_lookup: id " + std::to_string(ids[t]) +
                       " outside vocabulary of " + std::to_string(vocab));
    }
    std::copy_n(src.data() + static_cast<std::size_t>(ids[t]) * d, d,
                values.data() + t * d);
  }
  Tensor out({ids.size(), d}, std::move(values));
  if (tracks(g, {&table})) {
    std::vector<int> saved(ids.begin(), ids.end());
    g->record(out, [table, out, saved = std::move(saved), d]() mutable {
      const auto dy = out.grad();
      auto dt = table.mutable_grad();
      for (std::size_t t = 0; t < saved.size(); ++t) {
        axpy(1.0, dy.data() + t * d,
             dt.data() + static_cast<std::size_t>(saved[t]) * d, d);
      }
    });
  }
  return out;
}

Tensor rms_normalize(Graph* g, const Tensor& x, const Tensor& gain) {
  require_2d(x, "rms_normalize");
  if (gain.size() != x.cols()) {
    throw ShapeError("rms_normalize: gain " + shape_to_string(gain.shape()) +
                     " does not match rows of " + shape_to_string(x.shape()));
  }
  const std::size_t m = x.rows(), n = x.cols();
  const auto in = x.data();
  const auto w = gain.data();
  std::vector<double> inv_rms(m);
  std::vector<double> values(in.size());
  for (std::size_t i = 0; i < m; ++i) {
    const double* row = in.data() + i * n;
    const double ms = dot(row, row, n) / static_cast<double>(n);
    inv_rms[i] = 1.0 / std::sqrt(ms + kRmsEpsilon);
    for (std::size_t j = 0; j < n; ++j) {
      values[i * n + j] = row[j] * inv_rms[i] * w[j];
    }
  }
  Tensor out(x.shape(), std::move(values));
  if (tracks(g, {&x, &gain})) {
    g->record(out, [x, gain, out, inv_rms = std::move(inv_rms), m, n]() mutable {
      const auto dy = out.grad();
      const auto in = x.data();
      const auto w = gain.data();
      std::vector<double> xhat(n), dxhat(n);
      for (std::size_t i = 0; i < m; ++i) {
        const double r = inv_rms[i];
        for (std::size_t j = 0; j < n; ++j) {
          xhat[j] = in[i * n + j] * r;
          dxhat[j] = dy[i * n + j] * w[j];
        }
        if (gain.requires_grad()) {
          auto dg = gain.mutable_grad();
          for (std::size_t j = 0; j < n; ++j) dg[j] += dy[i * n + j] * xhat[j];
        }
        if (x.requires_grad()) {
          auto dx = x.mutable_grad();
          const double proj = dot(dxhat.data(), xhat.data(), n) / static_cast<double>(n);
          for (std::size_t j = 0; j < n; ++j) {
            dx[i * n + j] += r * (dxhat[j] - xhat[j] * proj);
          }
        }
      }
    });
  }
  return out;
}

Tensor causal_masked_fill(Graph* g, const Tensor& scores) {
  require_2d(scores, "causal_masked_fill");
  if (scores.rows() != scores.cols()) {
    throw ShapeError("causal_masked_fill: scores must be square, got " +
                     shape_to_string(scores.shape()));
  }
  const std::size_t n = scores.rows();
  std::vector<double> values(scores.data().begin(), scores.data().end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) values[i * n + j] = kMaskValue;
  }
  Tensor out(scores.shape(), std::move(values));
  if (tracks(g, {&scores})) {
    g->record(out, [scores, out, n]() mutable {
      const auto dy = out.grad();
      auto dx = scores.mutable_grad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) dx[i * n + j] += dy[i * n + j];
      }
    });
  }
  return out;
}

Tensor slice_cols(Graph* g, const Tensor& x, std::size_t begin, std::size_t count) {
  require_2d(x, "slice_cols");
  if (count == 0 || begin + count > x.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " +
                     shape_to_string(x.shape()));
  }
  const std::size_t m = x.rows(), n = x.cols();
  std::vector<double> values(m * count);
  const auto in = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(in.data() + i * n + begin, count, values.data() + i * count);
  }
  Tensor out({m, count}, std::move(values));
  if (tracks(g, {&x})) {
    g->record(out, [x, out, m, n, begin, count]() mutable {
      const auto dy = out.grad();
      auto dx = x.mutable_grad();
      for (std::size_t i = 0; i < m; ++i) {
        axpy(1.0, dy.data() + i * count, dx.data() + i * n + begin, count);
      }
    });
  }
  return out;
}

Tensor concat_cols(Graph* g, const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: nothing to concatenate");
  const std::size_t m = parts.front().rows();
  std::size_t n = 0;
  bool any_grad = false;
  for (const Tensor& p : parts) {
    require_2d(p, "concat_cols");
    if (p.rows() != m) {
      throw ShapeError("concat_cols: row count mismatch " +
                       shape_to_string(parts.front().shape()) + " vs " +
                       shape_to_string(p.shape()));
    }
    n += p.cols();
    any_grad = any_grad || p.requires_grad();
  }
  std::vector<double> values(m * n);
  std::size_t offset = 0;
  for (const Tensor& p : parts) {
    const auto in = p.data();
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < m; ++i) {
      std::copy_n(in.data() + i * w, w, values.data() + i * n + offset);
    }
    offset += w;
  }
  Tensor out({m, n}, std::move(values));
  if (g != nullptr && any_grad) {
    g->record(out, [parts, out, m, n]() mutable {
      const auto dy = out.grad();
      std::size_t offset = 0;
      for (const Tensor& p : parts) {
        const std::size_t w = p.cols();
        if (p.requires_grad()) {
          auto dp = p.mutable_grad();
          for (std::size_t i = 0; i < m; ++i) {
            axpy(1.0, dy.data() + i * n + offset, dp.data() + i * w, w);
          }
        }
        offset += w;
      }
    });
  }
  return out;
}

Tensor cross_entropy(Graph* g, const Tensor& logits, std::span<const int> targets) {
  require_2d(logits, "cross_entropy");
  const std::size_t t_len = logits.rows(), vocab = logits.cols();
  if (targets.size() != t_len) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) +
                     " targets for logits " + shape_to_string(logits.shape()));
  }
  for (int id : targets) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw IndexError("cross_entropy: target " + std::to_string(id) +
                       " outside vocabulary of " + std::to_string(vocab));
    }
  }
  const auto z = logits.data();
  std::vector<double> probs(z.size());
  double total = 0.0;
  for (std::size_t t = 0; t < t_len; ++t) {
    const double* row = z.data() + t * vocab;
    double* p = probs.data() + t * vocab;
    const double peak = *std::max_element(row, row + vocab);
    double denom = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) {
      p[j] = std::exp(row[j] - peak);
      denom += p[j];
    }
    const double log_denom = std::log(denom) + peak;
    total += log_denom - row[static_cast<std::size_t>(targets[t])];
    const double inv = 1.0 / denom;
    for (std::size_t j = 0; j < vocab; ++j) p[j] *= inv;
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(t_len));
  if (tracks(g, {&logits})) {
    std::vector<int> saved(targets.begin(), targets.end());
    g->record(out, [logits, out, probs = std::move(probs), saved = std::move(saved),
                    t_len, vocab]() mutable {
      const double scale_by = out.grad()[0] / static_cast<double>(t_len);
      auto dz = logits.mutable_grad();
      for (std::size_t t = 0; t < t_len; ++t) {
        const double* p = probs.data() + t * vocab;
        double* d = dz.data() + t * vocab;
        for (std::size_t j = 0; j < vocab; ++j) d[j] += scale_by * p[j];
        d[static_cast<std::size_t>(saved[t])] -= scale_by;
      }
    });
  }
  return out;
}

}  // namespace sllab
