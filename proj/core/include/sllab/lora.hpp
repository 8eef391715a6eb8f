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

// Low-rank adapters on attention projections.
//
// A wrapped weight W [d_out x d_in] is used as W + (alpha / rank) * B * A with
// A [rank x d_in] and B [d_out x rank]. B starts at zero, so a freshly
// attached model computes exactly what its base computes. The base is frozen
// and never written to while adapters are attached.

#pragma once

#include <cstdint>
#include <vector>

#include "sllab/model.hpp"

namespace sllab {

struct LoraTarget {
  std::uint32_t layer = 0;
  AttnProj proj = AttnProj::kQuery;

  bool operator==(const LoraTarget&) const = default;
};

struct LoraAdapter {
  LoraTarget target;
  Tensor a;  // [rank x d_in]
  Tensor b;  // [d_out x rank]
  std::uint32_t rank = 0;
  double alpha = 0.0;

  double scaling() const { return alpha / static_cast<double>(rank); }
};

struct LoraConfig {
  std::uint32_t rank = 4;
  double alpha = 8.0;
  std::vector<AttnProj> projections = {AttnProj::kQuery, AttnProj::kValue};
};

// Every layer of the model crossed with the given projections, layer-major.
std::vector<LoraTarget> targets_for(const Model& model, const std::vector<AttnProj>& projections);

// W + (alpha / rank) * B * A. Records on g when the adapter requires grad.
Tensor effective_weight(const Tensor& w, const LoraAdapter& adapter, Graph* g = nullptr);

class AdaptedModel final : public ProjectionHook {
 public:
  AdaptedModel() = default;
  // Takes its own copy of the base and freezes it.
  explicit AdaptedModel(const Model& base);
  // Deep, like Model.
  AdaptedModel(const AdaptedModel& other);
  AdaptedModel& operator=(const AdaptedModel& other);
  AdaptedModel(AdaptedModel&&) noexcept = default;
  AdaptedModel& operator=(AdaptedModel&&) noexcept = default;

  const Model& base() const { return base_; }
  const ModelConfig& config() const { return base_.config(); }
  const std::vector<LoraAdapter>& adapters() const { return adapters_; }
  std::vector<LoraAdapter>& adapters() { return adapters_; }

  // Throws ConfigError on a duplicate target or an invalid rank.
  void add_adapter(LoraAdapter adapter);

  // A then B for each adapter, in (layer, projection) order.
  std::vector<Tensor> trainable_parameters() const;
  std::size_t trainable_count() const;

  Tensor forward(std::span<const int> ids, Graph* g = nullptr) const;

  Tensor attention_weight(std::size_t layer, AttnProj proj, const Tensor& base,
                          Graph* g) const override;

 private:
  Model base_;
  std::vector<LoraAdapter> adapters_;
};

// A ~ N(0, 1/rank) drawn from seed, B = 0, for each target.
AdaptedModel attach(const Model& model, std::uint32_t rank, double alpha,
                    const std::vector<LoraTarget>& targets, std::uint64_t seed);
AdaptedModel attach(const Model& model, const LoraConfig& config, std::uint64_t seed);

// Folds every adapter into a plain copy of the base.
Model merge(const AdaptedModel& adapted);

double avg_nll(const AdaptedModel& model, std::string_view text);
NllTotal nll_total(const AdaptedModel& model, std::string_view text);
std::string generate_greedy(const AdaptedModel& model, std::string_view prompt, int max_new);

}  // namespace sllab
