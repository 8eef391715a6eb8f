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

// Tiny decoder-only transformer over a byte alphabet.
//
// Pre-norm blocks: x += Attn(RMS(x)); x += FFN(RMS(x)); final RMS norm, then
// logits against the (tied) token embedding table. Learned absolute position
// embeddings. Linear weights are stored [out x in].

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sllab/tensor.hpp"

namespace sllab {

inline constexpr int kByteVocab = 256;
inline constexpr int kBosId = 256;
inline constexpr int kEosId = 257;
inline constexpr int kVocabSize = 258;

using TokenSequence = std::vector<int>;

// BOS + one id per byte + EOS.
TokenSequence tokenize(std::string_view text);
// Inverse of tokenize; special ids are dropped.
std::string detokenize(std::span<const int> ids);

struct ModelConfig {
  std::uint32_t vocab_size = kVocabSize;
  std::uint32_t d_model = 64;
  std::uint32_t n_layers = 2;
  std::uint32_t n_heads = 2;
  std::uint32_t context_len = 128;
  std::uint32_t d_ff = 256;
  std::uint32_t seed = 0;

  // Throws ConfigError.
  void validate() const;
  std::size_t parameter_count() const;

  bool operator==(const ModelConfig&) const = default;
};

enum class AttnProj : std::uint32_t { kQuery = 0, kKey = 1, kValue = 2, kOutput = 3 };

const char* to_string(AttnProj proj);

struct LayerWeights {
  Tensor attn_norm;  // [d_model]
  Tensor wq, wk, wv, wo;  // [d_model x d_model]
  Tensor ffn_norm;  // [d_model]
  Tensor w1;  // [d_ff x d_model]
  Tensor w2;  // [d_model x d_ff]

  const Tensor& projection(AttnProj proj) const;
  Tensor& projection(AttnProj proj);
};

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Lets an adapter layer substitute the attention projection used during a
// forward pass without touching the stored base weight.
class ProjectionHook {
 public:
  virtual ~ProjectionHook() = default;
  virtual Tensor attention_weight(std::size_t layer, AttnProj proj,
                                  const Tensor& base, Graph* g) const = 0;
};

class Model {
 public:
  Model() = default;
  explicit Model(const ModelConfig& config);
  // Copies are deep; parameters() hands out aliasing handles.
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  const ModelConfig& config() const { return config_; }

  Tensor& token_embedding() { return token_embedding_; }
  const Tensor& token_embedding() const { return token_embedding_; }
  Tensor& position_embedding() { return position_embedding_; }
  const Tensor& position_embedding() const { return position_embedding_; }
  std::vector<LayerWeights>& layers() { return layers_; }
  const std::vector<LayerWeights>& layers() const { return layers_; }
  Tensor& final_norm() { return final_norm_; }
  const Tensor& final_norm() const { return final_norm_; }

  // Declaration order; also the checkpoint order.
  std::vector<NamedTensor> parameters() const;
  std::size_t parameter_count() const;
  void set_frozen(bool frozen);

  // Logits [T x vocab] for T = ids.size() <= context_len.
  Tensor forward(std::span<const int> ids, Graph* g = nullptr,
                 const ProjectionHook* hook = nullptr) const;

 private:
  ModelConfig config_;
  Tensor token_embedding_;  // [vocab x d_model]; also the output projection
  Tensor position_embedding_;  // [context_len x d_model]
  std::vector<LayerWeights> layers_;
  Tensor final_norm_;
};

// Weights ~ N(0, 0.02 / sqrt(n_layers)) from config.seed; gains = 1.
Model init_model(const ModelConfig& config);

// Splits a token sequence into context-sized windows that share one boundary
// token, so every next-token target is scored exactly once.
std::vector<std::span<const int>> context_windows(std::span<const int> ids,
                                                  std::size_t context_len);

struct NllTotal {
  double sum = 0.0;
  std::size_t tokens = 0;

  double mean() const { return sum / static_cast<double>(tokens); }
};

// Summed next-token NLL over all windows of tokenize(text).
NllTotal nll_total(const Model& model, std::string_view text,
                   const ProjectionHook* hook = nullptr);
double avg_nll(const Model& model, std::string_view text,
               const ProjectionHook* hook = nullptr);

// Argmax decoding (ties go to the lowest id) until EOS or max_new tokens.
// Returns only the generated continuation.
std::string generate_greedy(const Model& model, std::string_view prompt,
                            int max_new, const ProjectionHook* hook = nullptr);

// Q&A text layouts shared by training and evaluation.
std::string format_training_text(std::string_view question, std::string_view answer);
std::string format_prompt(std::string_view question);

}  // namespace sllab
