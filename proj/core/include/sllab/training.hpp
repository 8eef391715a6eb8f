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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sllab/lora.hpp"
#include "sllab/stream.hpp"

namespace sllab {

struct OptimizerConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint32_t steps_per_chunk = 100;
  std::uint32_t microbatch_size = 4;
};

// Adam with bias correction over a fixed, ordered parameter list.
class Adam {
 public:
  Adam() = default;
  Adam(std::vector<Tensor> params, const OptimizerConfig& config);

  // Applies one update from the current gradients, then zeroes them.
  void step();
  void zero_grad();

  std::uint64_t steps() const { return t_; }
  const std::vector<Tensor>& params() const { return params_; }

  // Moments and step count; parameter values live in the model checkpoint.
  std::string serialize() const;
  void restore(const std::string& bytes);

 private:
  std::vector<Tensor> params_;
  OptimizerConfig config_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

struct TrainResult {
  double avg_loss = 0.0;
  double time_per_step_s = 0.0;
  std::uint32_t steps = 0;
};

// Token-weighted next-token loss of one microbatch, recorded on g.
Tensor microbatch_loss(const Model& model, const ProjectionHook* hook,
                       const std::vector<const QARecord*>& records, Graph& g);

// steps_per_chunk Adam steps over shuffled microbatches drawn cyclically from
// batch. Only the optimizer's parameters move. Throws NumericError with the
// step index and loss history on a non-finite loss.
TrainResult train_on_chunk(AdaptedModel& model, const std::vector<QARecord>& batch,
                           const OptimizerConfig& config, Adam& optimizer, Rng& rng);

// Full-parameter training of a plain model (base warm-up and tests).
TrainResult train_model(Model& model, const std::vector<QARecord>& batch,
                        const OptimizerConfig& config, Adam& optimizer, Rng& rng);

}  // namespace sllab
