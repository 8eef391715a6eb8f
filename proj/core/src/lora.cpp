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

#include "sllab/lora.hpp"

#include <algorithm>
#include <random>

#include "sllab/errors.hpp"

namespace sllab {

std::vector<LoraTarget> targets_for(const Model& model,
                                    const std::vector<AttnProj>& projections) {
  std::vector<LoraTarget> targets;
  for (std::uint32_t l = 0; l < model.config().n_layers; ++l) {
    for (AttnProj p : projections) targets.push_back({l, p});
  }
  return targets;
}

Tensor effective_weight(const Tensor& w, const LoraAdapter& adapter, Graph* g) {
  if (adapter.b.rows() != w.rows() || adapter.a.cols() != w.cols() ||
      adapter.a.rows() != adapter.rank || adapter.b.cols() != adapter.rank) {
    throw ShapeError("effective_weight: adapter A" + shape_to_string(adapter.a.shape()) +
                     " B" + shape_to_string(adapter.b.shape()) + " incompatible with W" +
                     shape_to_string(w.shape()));
  }
  return add(g, w, scale(g, matmul(g, adapter.b, adapter.a), adapter.scaling()));
}

AdaptedModel::AdaptedModel(const Model& base) : base_(base) { base_.set_frozen(true); }

AdaptedModel::AdaptedModel(const AdaptedModel& other) : base_(other.base_) {
  adapters_.reserve(other.adapters_.size());
  for (const LoraAdapter& ad : other.adapters_) {
    LoraAdapter copy = ad;
    copy.a = ad.a.clone();
    copy.b = ad.b.clone();
    adapters_.push_back(std::move(copy));
  }
}

AdaptedModel& AdaptedModel::operator=(const AdaptedModel& other) {
  if (this != &other) *this = AdaptedModel(other);
  return *this;
}

void AdaptedModel::add_adapter(LoraAdapter adapter) {
  const ModelConfig& cfg = base_.config();
  if (adapter.target.layer >= cfg.n_layers) {
    throw ConfigError("lora: layer " + std::to_string(adapter.target.layer) +
                      " does not exist");
  }
  const Tensor& w = base_.layers()[adapter.target.layer].projection(adapter.target.proj);
  const std::size_t limit = std::min(w.rows(), w.cols());
  if (adapter.rank < 1 || adapter.rank > limit) {
    throw ConfigError("lora: rank " + std::to_string(adapter.rank) +
                      " outside [1, " + std::to_string(limit) + "]");
  }
  for (const LoraAdapter& existing : adapters_) {
    if (existing.target == adapter.target) {
      throw ConfigError("lora: layer " + std::to_string(adapter.target.layer) +
                        " projection " + to_string(adapter.target.proj) +
                        " is already wrapped");
    }
  }
  adapter.a.set_requires_grad(true);
  adapter.b.set_requires_grad(true);
  adapters_.push_back(std::move(adapter));
  std::stable_sort(adapters_.begin(), adapters_.end(),
                   [](const LoraAdapter& x, const LoraAdapter& y) {
                     if (x.target.layer != y.target.layer) return x.target.layer < y.target.layer;
                     return x.target.proj < y.target.proj;
                   });
}

std::vector<Tensor> AdaptedModel::trainable_parameters() const {
  std::vector<Tensor> params;
  params.reserve(adapters_.size() * 2);
  for (const LoraAdapter& ad : adapters_) {
    params.push_back(ad.a);
    params.push_back(ad.b);
  }
  return params;
}

std::size_t AdaptedModel::trainable_count() const {
  std::size_t n = 0;
  for (const LoraAdapter& ad : adapters_) n += ad.a.size() + ad.b.size();
  return n;
}

Tensor AdaptedModel::forward(std::span<const int> ids, Graph* g) const {
  return base_.forward(ids, g, this);
}

Tensor AdaptedModel::attention_weight(std::size_t layer, AttnProj proj,
                                      const Tensor& base, Graph* g) const {
  for (const LoraAdapter& ad : adapters_) {
    if (ad.target.layer == layer && ad.target.proj == proj) {
      return effective_weight(base, ad, g);
    }
  }
  return base;
}

AdaptedModel attach(const Model& model, std::uint32_t rank, double alpha,
                    const std::vector<LoraTarget>& targets, std::uint64_t seed) {
  AdaptedModel adapted(model);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0 / std::max(1.0, static_cast<double>(rank)));
  for (const LoraTarget& t : targets) {
    if (t.layer >= model.config().n_layers) {
      throw ConfigError("lora: layer " + std::to_string(t.layer) + " does not exist");
    }
    const Tensor& w = model.layers()[t.layer].projection(t.proj);
    const std::size_t d_out = w.rows(), d_in = w.cols();
    if (rank < 1 || rank > std::min(d_in, d_out)) {
      throw ConfigError("lora: rank " + std::to_string(rank) + " outside [1, " +
                        std::to_string(std::min(d_in, d_out)) + "]");
    }
    std::vector<double> a(rank * d_in);
    for (double& v : a) v = normal(rng);
    LoraAdapter ad;
    ad.target = t;
    ad.a = Tensor({rank, d_in}, std::move(a), true);
    ad.b = Tensor::zeros({d_out, rank}, true);
    ad.rank = rank;
    ad.alpha = alpha;
    adapted.add_adapter(std::move(ad));
  }
  return adapted;
}

AdaptedModel attach(const Model& model, const LoraConfig& config, std::uint64_t seed) {
  return attach(model, config.rank, config.alpha, targets_for(model, config.projections), seed);
}

Model merge(const AdaptedModel& adapted) {
  Model merged = adapted.base();
  for (const LoraAdapter& ad : adapted.adapters()) {
    Tensor& w = merged.layers()[ad.target.layer].projection(ad.target.proj);
    const bool frozen = !w.requires_grad();
    w = effective_weight(w, ad);
    w.set_requires_grad(!frozen);
  }
  return merged;
}

double avg_nll(const AdaptedModel& model, std::string_view text) {
  return avg_nll(model.base(), text, &model);
}

NllTotal nll_total(const AdaptedModel& model, std::string_view text) {
  return nll_total(model.base(), text, &model);
}

std::string generate_greedy(const AdaptedModel& model, std::string_view prompt, int max_new) {
  return generate_greedy(model.base(), prompt, max_new, &model);
}

}  // namespace sllab
