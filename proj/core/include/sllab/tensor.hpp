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

// Dense float64 tensors with a reverse-mode tape.
//
// A Tensor is a shared handle: copying it aliases the same storage, the way
// parameters are referenced from both the model and the tape. Use clone() for
// an independent copy.
//
// Every op takes a `Graph*`. When it is null, or when no input requires a
// gradient, nothing is recorded and the op is a plain forward computation.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sllab {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const;
  std::size_t ndim() const { return shape().size(); }
  std::size_t size() const;
  // Row/column counts of a 2-D tensor (a 1-D tensor is one row).
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);

  bool has_grad() const;
  std::span<const double> grad() const;
  // Allocates a zero gradient on first use. Const because the gradient
  // belongs to the shared storage, not to this handle.
  std::span<double> mutable_grad() const;
  void zero_grad();
  void clear_grad();

  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

// Ordered tape of recorded operations for one forward pass.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  void record(Tensor output, std::function<void()> backward_rule);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded rule in exact reverse
  // order. Throws ContractError unless loss is a single element.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor output;
    std::function<void()> backward_rule;
  };
  std::vector<Node> nodes_;
};

void backward(Graph& graph, const Tensor& loss);

// -inf stand-in used by the causal mask.
inline constexpr double kMaskValue = -1e30;
inline constexpr double kRmsEpsilon = 1e-5;

Tensor matmul(Graph* g, const Tensor& a, const Tensor& b);
// a[m x k] * b[n x k]^T -> [m x n]; the layout used by linear layers whose
// weights are stored as [out x in].
Tensor matmul_nt(Graph* g, const Tensor& a, const Tensor& b);
Tensor add(Graph* g, const Tensor& a, const Tensor& b);
Tensor scale(Graph* g, const Tensor& a, double factor);
Tensor mul(Graph* g, const Tensor& a, const Tensor& b);
Tensor sum(Graph* g, const Tensor& a);
Tensor gelu(Graph* g, const Tensor& a);
Tensor softmax_rows(Graph* g, const Tensor& x);
Tensor embedding_lookup(Graph* g, const Tensor& table, std::span<const int> ids);
// x / sqrt(mean(x^2) + 1e-5) per row, times a learned per-column gain.
Tensor rms_normalize(Graph* g, const Tensor& x, const Tensor& gain);
// Square score matrix; entries with column > row become kMaskValue.
Tensor causal_masked_fill(Graph* g, const Tensor& scores);
Tensor slice_cols(Graph* g, const Tensor& x, std::size_t begin, std::size_t count);
Tensor concat_cols(Graph* g, const std::vector<Tensor>& parts);
// Mean over rows of -log softmax(logits)[target].
Tensor cross_entropy(Graph* g, const Tensor& logits, std::span<const int> targets);

}  // namespace sllab
