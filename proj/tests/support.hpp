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


// Shared fixtures: small configurations, scratch directories and the
// finite-difference gradient check.

#pragma once

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sllab/config.hpp"
#include "sllab/lora.hpp"
#include "sllab/model.hpp"

namespace sllab::testing {

// 2,664 parameters: well under the gradient-check budget.
inline ModelConfig gradcheck_config(std::uint32_t seed = 7) {
  ModelConfig c;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.context_len = 8;
  c.d_ff = 16;
  c.seed = seed;
  return c;
}

// Seconds-scale end-to-end configuration.
inline ExperimentConfig small_experiment(const std::filesystem::path& out) {
  ExperimentConfig c;
  c.model.d_model = 16;
  c.model.n_layers = 1;
  c.model.n_heads = 2;
  c.model.context_len = 64;
  c.model.d_ff = 32;
  c.rounds = 2;
  c.chunk_size = 4;
  c.optimizer.learning_rate = 3e-3;
  c.optimizer.steps_per_chunk = 6;
  c.optimizer.microbatch_size = 2;
  c.warmup_steps = 10;
  c.eval_set_size = 3;
  c.max_answer_tokens = 12;
  c.eval_threads = 2;
  c.synthetic_records = 40;
  c.seed = 3;
  c.output_dir = out.string();
  return c;
}

class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("sllab_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Spreads every parameter over N(0, std) so no gradient is degenerate.
inline void randomize(const std::vector<Tensor>& params, double std, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, std);
  for (Tensor t : params)
    for (double& v : t.mutable_data()) v = dist(rng);
}

inline std::vector<Tensor> tensors_of(const Model& m) {
  std::vector<Tensor> out;
  for (const NamedTensor& p : m.parameters()) out.push_back(p.tensor);
  return out;
}

struct GradCheck {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::string worst;
};

// Next-token loss of ids[0..n-1] -> ids[1..n] on the (optionally adapted)
// model, compared parameter by parameter against central differences.
inline GradCheck finite_difference_check(const Model& model, const ProjectionHook* hook,
                                         const std::vector<NamedTensor>& params,
                                         const std::vector<int>& ids, double eps,
                                         double floor) {
  const std::span<const int> all(ids);
  const auto inputs = all.first(all.size() - 1);
  const auto targets = all.subspan(1);
  auto loss_at = [&](Graph* g) { return cross_entropy(g, model.forward(inputs, g, hook), targets); };

  for (const NamedTensor& p : params) {
    Tensor t = p.tensor;
    t.clear_grad();
  }
  Graph g;
  g.backward(loss_at(&g));

  GradCheck out;
  for (const NamedTensor& p : params) {
    Tensor t = p.tensor;
    const std::vector<double> analytic(t.grad().begin(), t.grad().end());
    auto data = t.mutable_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double keep = data[i];
      data[i] = keep + eps;
      const double up = loss_at(nullptr).item();
      data[i] = keep - eps;
      const double down = loss_at(nullptr).item();
      data[i] = keep;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = oracle::relative_error(analytic[i], numeric, floor);
      ++out.checked;
      if (err > out.max_relative_error) {
        out.max_relative_error = err;
        out.worst = p.name + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic[i]) +
                    " numeric " + std::to_string(numeric);
      }
    }
  }
  return out;
}

}  // namespace sllab::testing
