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

#include "sllab/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "sllab/binary_io.hpp"
#include "sllab/errors.hpp"

namespace sllab {

Adam::Adam(std::vector<Tensor> params, const OptimizerConfig& config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Tensor& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

void Adam::step() {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_[i];
    if (!p.has_grad()) continue;
    auto w = p.mutable_data();
    const auto g = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double m_hat = m[j] / c1;
      const double v_hat = v[j] / c2;
      w[j] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (Tensor& p : params_) p.zero_grad();
}

std::string Adam::serialize() const {
  ByteWriter w;
  w.u64(t_);
  w.u64(params_.size());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    w.u64(m_[i].size());
    w.f64s(m_[i]);
    w.f64s(v_[i]);
  }
  return w.take();
}

void Adam::restore(const std::string& bytes) {
  ByteReader r(bytes);
  const std::uint64_t t = r.u64();
  if (r.u64() != params_.size()) throw CheckpointError("optimizer: parameter count mismatch");
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (r.u64() != params_[i].size()) throw CheckpointError("optimizer: parameter size mismatch");
    r.f64s(m_[i]);
    r.f64s(v_[i]);
  }
  if (!r.done()) throw CheckpointError("optimizer: trailing bytes");
  t_ = t;
}

Tensor microbatch_loss(const Model& model, const ProjectionHook* hook,
                       const std::vector<const QARecord*>& records, Graph& g) {
  Tensor total;
  std::size_t tokens = 0;
  for (const QARecord* rec : records) {
    const TokenSequence ids = tokenize(format_training_text(rec->question, rec->answer));
    for (std::span<const int> window : context_windows(ids, model.config().context_len)) {
      const std::size_t n = window.size() - 1;
      Tensor logits = model.forward(window.first(n), &g, hook);
      Tensor loss = scale(&g, cross_entropy(&g, logits, window.subspan(1)), static_cast<double>(n));
      total = total.defined() ? add(&g, total, loss) : loss;
      tokens += n;
    }
  }
  if (!total.defined()) throw ContractError("microbatch_loss: no tokens");
  return scale(&g, total, 1.0 / static_cast<double>(tokens));
}

namespace {

TrainResult run_steps(const Model& model, const ProjectionHook* hook,
                      const std::vector<QARecord>& batch, const OptimizerConfig& config,
                      Adam& optimizer, Rng& rng) {
  if (batch.empty()) throw ContractError("train_on_chunk: empty batch");
  if (config.microbatch_size == 0) throw ConfigError("microbatch_size must be >= 1");
  using Clock = std::chrono::steady_clock;

  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  std::vector<double> history;
  history.reserve(config.steps_per_chunk);
  const auto start = Clock::now();
  for (std::uint32_t step = 0; step < config.steps_per_chunk; ++step) {
    std::vector<const QARecord*> micro;
    const std::size_t take = std::min<std::size_t>(config.microbatch_size, batch.size());
    for (std::size_t i = 0; i < take; ++i) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      micro.push_back(&batch[order[cursor++]]);
    }
    Graph g;
    Tensor loss = microbatch_loss(model, hook, micro, g);
    const double value = loss.item();
    history.push_back(value);
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << "non-finite training loss at step " << step << "; loss history:";
      for (double h : history) msg << ' ' << h;
      throw NumericError(msg.str());
    }
    g.backward(loss);
    optimizer.step();
  }
  const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();

  TrainResult result;
  result.steps = config.steps_per_chunk;
  if (!history.empty()) {
    result.avg_loss = std::accumulate(history.begin(), history.end(), 0.0) /
                      static_cast<double>(history.size());
    result.time_per_step_s =
        std::max(elapsed, 1e-9) / static_cast<double>(config.steps_per_chunk);
  }
  return result;
}

}  // namespace

TrainResult train_on_chunk(AdaptedModel& model, const std::vector<QARecord>& batch,
                           const OptimizerConfig& config, Adam& optimizer, Rng& rng) {
  return run_steps(model.base(), &model, batch, config, optimizer, rng);
}

TrainResult train_model(Model& model, const std::vector<QARecord>& batch,
                        const OptimizerConfig& config, Adam& optimizer, Rng& rng) {
  return run_steps(model, nullptr, batch, config, optimizer, rng);
}

}  // namespace sllab
