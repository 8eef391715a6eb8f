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

#include "sllab/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <utility>

#include "sllab/errors.hpp"

namespace sllab {

TokenSequence tokenize(std::string_view text) {
  TokenSequence ids;
  ids.reserve(text.size() + 2);
  ids.push_back(kBosId);
  for (char c : text) ids.push_back(static_cast<unsigned char>(c));
  ids.push_back(kEosId);
  return ids;
}

std::string detokenize(std::span<const int> ids) {
  std::string text;
  text.reserve(ids.size());
  for (int id : ids) {
    if (id >= 0 && id < kByteVocab) text.push_back(static_cast<char>(id));
  }
  return text;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("model config: " + what); };
  if (vocab_size != static_cast<std::uint32_t>(kVocabSize)) {
    fail("vocab_size must be " + std::to_string(kVocabSize));
  }
  if (d_model == 0 || n_layers == 0 || n_heads == 0 || d_ff == 0) {
    fail("dimensions must be positive");
  }
  if (d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (context_len < 2) fail("context_len must be at least 2");
}

std::size_t ModelConfig::parameter_count() const {
  const std::size_t d = d_model;
  const std::size_t per_layer = 2 * d + 4 * d * d + 2 * d * d_ff;
  return vocab_size * d + context_len * d + n_layers * per_layer + d;
}

const char* to_string(AttnProj proj) {
  switch (proj) {
    case AttnProj::kQuery: return "q";
    case AttnProj::kKey: return "k";
    case AttnProj::kValue: return "v";
    case AttnProj::kOutput: return "o";
  }
  return "?";
}

const Tensor& LayerWeights::projection(AttnProj proj) const {
  switch (proj) {
    case AttnProj::kQuery: return wq;
    case AttnProj::kKey: return wk;
    case AttnProj::kValue: return wv;
    case AttnProj::kOutput: return wo;
  }
  throw ContractError("unknown attention projection");
}

Tensor& LayerWeights::projection(AttnProj proj) {
  return const_cast<Tensor&>(std::as_const(*this).projection(proj));
}

Model::Model(const ModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t d = config.d_model;
  token_embedding_ = Tensor::zeros({config.vocab_size, d}, true);
  position_embedding_ = Tensor::zeros({config.context_len, d}, true);
  layers_.resize(config.n_layers);
  for (LayerWeights& layer : layers_) {
    layer.attn_norm = Tensor::filled({d}, 1.0, true);
    layer.wq = Tensor::zeros({d, d}, true);
    layer.wk = Tensor::zeros({d, d}, true);
    layer.wv = Tensor::zeros({d, d}, true);
    layer.wo = Tensor::zeros({d, d}, true);
    layer.ffn_norm = Tensor::filled({d}, 1.0, true);
    layer.w1 = Tensor::zeros({config.d_ff, d}, true);
    layer.w2 = Tensor::zeros({d, config.d_ff}, true);
  }
  final_norm_ = Tensor::filled({d}, 1.0, true);
}

std::vector<NamedTensor> Model::parameters() const {
  std::vector<NamedTensor> out;
  out.push_back({"tok_emb", token_embedding_});
  out.push_back({"pos_emb", position_embedding_});
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    const LayerWeights& w = layers_[l];
    out.push_back({p + "attn_norm", w.attn_norm});
    out.push_back({p + "wq", w.wq});
    out.push_back({p + "wk", w.wk});
    out.push_back({p + "wv", w.wv});
    out.push_back({p + "wo", w.wo});
    out.push_back({p + "ffn_norm", w.ffn_norm});
    out.push_back({p + "w1", w.w1});
    out.push_back({p + "w2", w.w2});
  }
  out.push_back({"final_norm", final_norm_});
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const NamedTensor& p : parameters()) n += p.tensor.size();
  return n;
}

void Model::set_frozen(bool frozen) {
  for (NamedTensor& p : parameters()) p.tensor.set_requires_grad(!frozen);
}

Model::Model(const Model& other)
    : config_(other.config_),
      token_embedding_(other.token_embedding_.clone()),
      position_embedding_(other.position_embedding_.clone()),
      final_norm_(other.final_norm_.clone()) {
  layers_.reserve(other.layers_.size());
  for (const LayerWeights& w : other.layers_) {
    layers_.push_back({w.attn_norm.clone(), w.wq.clone(), w.wk.clone(),
                       w.wv.clone(), w.wo.clone(), w.ffn_norm.clone(),
                       w.w1.clone(), w.w2.clone()});
  }
}

Model& Model::operator=(const Model& other) {
  if (this != &other) *this = Model(other);
  return *this;
}

namespace {

// Final normalized hidden states [T x d_model].
Tensor hidden_states(const Model& model, std::span<const int> ids, Graph* g,
                     const ProjectionHook* hook) {
  const ModelConfig& cfg = model.config();
  if (ids.empty()) throw ContractError("forward: empty token sequence");
  if (ids.size() > cfg.context_len) {
    throw ContractError("forward: " + std::to_string(ids.size()) +
                        " tokens exceed context_len " +
                        std::to_string(cfg.context_len));
  }
  const std::size_t n_heads = cfg.n_heads;
  const std::size_t head_dim = cfg.d_model / n_heads;
  const double score_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));

  std::vector<int> positions(ids.size());
  std::iota(positions.begin(), positions.end(), 0);
  Tensor x = add(g, embedding_lookup(g, model.token_embedding(), ids),
                 embedding_lookup(g, model.position_embedding(), positions));

  auto weight = [&](std::size_t layer, AttnProj proj) {
    const Tensor& base = model.layers()[layer].projection(proj);
    return hook ? hook->attention_weight(layer, proj, base, g) : base;
  };

  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const LayerWeights& w = model.layers()[l];
    Tensor h = rms_normalize(g, x, w.attn_norm);
    Tensor q = matmul_nt(g, h, weight(l, AttnProj::kQuery));
    Tensor k = matmul_nt(g, h, weight(l, AttnProj::kKey));
    Tensor v = matmul_nt(g, h, weight(l, AttnProj::kValue));
    std::vector<Tensor> heads;
    heads.reserve(n_heads);
    for (std::size_t hd = 0; hd < n_heads; ++hd) {
      const std::size_t off = hd * head_dim;
      Tensor scores = matmul_nt(g, slice_cols(g, q, off, head_dim),
                                slice_cols(g, k, off, head_dim));
      scores = causal_masked_fill(g, scale(g, scores, score_scale));
      heads.push_back(matmul(g, softmax_rows(g, scores), slice_cols(g, v, off, head_dim)));
    }
    Tensor attn = n_heads == 1 ? heads.front() : concat_cols(g, heads);
    x = add(g, x, matmul_nt(g, attn, weight(l, AttnProj::kOutput)));

    Tensor f = rms_normalize(g, x, w.ffn_norm);
    f = gelu(g, matmul_nt(g, f, w.w1));
    x = add(g, x, matmul_nt(g, f, w.w2));
  }
  return rms_normalize(g, x, model.final_norm());
}

}  // namespace

Tensor Model::forward(std::span<const int> ids, Graph* g,
                      const ProjectionHook* hook) const {
  return matmul_nt(g, hidden_states(*this, ids, g, hook), token_embedding_);
}

Model init_model(const ModelConfig& config) {
  Model model(config);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(
      0.0, 0.02 / std::sqrt(static_cast<double>(config.n_layers)));
  for (NamedTensor& p : model.parameters()) {
    if (p.name.ends_with("norm")) continue;
    for (double& v : p.tensor.mutable_data()) v = normal(rng);
  }
  return model;
}

std::vector<std::span<const int>> context_windows(std::span<const int> ids,
                                                  std::size_t context_len) {
  std::vector<std::span<const int>> windows;
  if (ids.size() < 2) return windows;
  std::size_t start = 0;
  while (start + 1 < ids.size()) {
    const std::size_t len = std::min(context_len, ids.size() - start);
    windows.push_back(ids.subspan(start, len));
    start += len - 1;
  }
  return windows;
}

NllTotal nll_total(const Model& model, std::string_view text,
                   const ProjectionHook* hook) {
  if (text.empty()) throw ContractError("avg_nll: empty text");
  const TokenSequence ids = tokenize(text);
  NllTotal total;
  for (std::span<const int> window : context_windows(ids, model.config().context_len)) {
    const std::size_t n = window.size() - 1;
    Tensor logits = model.forward(window.first(n), nullptr, hook);
    total.sum += cross_entropy(nullptr, logits, window.subspan(1)).item() *
                 static_cast<double>(n);
    total.tokens += n;
  }
  return total;
}

double avg_nll(const Model& model, std::string_view text, const ProjectionHook* hook) {
  return nll_total(model, text, hook).mean();
}

namespace {

// Incremental single-sequence decoder. Keys and values of earlier positions are
// kept per layer so each new token costs one row of work.
class Decoder {
 public:
  Decoder(const Model& model, const ProjectionHook* hook) : model_(model) {
    const std::size_t n_layers = model.layers().size();
    weights_.resize(n_layers);
    keys_.resize(n_layers);
    values_.resize(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
      for (AttnProj p : {AttnProj::kQuery, AttnProj::kKey, AttnProj::kValue, AttnProj::kOutput}) {
        const Tensor& base = model.layers()[l].projection(p);
        weights_[l][static_cast<std::size_t>(p)] =
            hook ? hook->attention_weight(l, p, base, nullptr) : base;
      }
    }
  }

  std::size_t length() const { return length_; }

  // Logits [1 x vocab] for the next token after appending id.
  Tensor push(int id) {
    const ModelConfig& cfg = model_.config();
    const std::size_t d = cfg.d_model;
    const std::size_t n_heads = cfg.n_heads;
    const std::size_t head_dim = d / n_heads;
    const double score_scale = 1.0 / std::sqrt(static_cast<double>(head_dim));
    const int pos = static_cast<int>(length_);
    Tensor x = add(nullptr, embedding_lookup(nullptr, model_.token_embedding(), {&id, 1}),
                   embedding_lookup(nullptr, model_.position_embedding(), {&pos, 1}));
    for (std::size_t l = 0; l < model_.layers().size(); ++l) {
      const LayerWeights& w = model_.layers()[l];
      const auto& wt = weights_[l];
      const Tensor h = rms_normalize(nullptr, x, w.attn_norm);
      const Tensor q = matmul_nt(nullptr, h, wt[0]);
      const Tensor k = matmul_nt(nullptr, h, wt[1]);
      const Tensor v = matmul_nt(nullptr, h, wt[2]);
      keys_[l].insert(keys_[l].end(), k.data().begin(), k.data().end());
      values_[l].insert(values_[l].end(), v.data().begin(), v.data().end());
      const std::size_t t = length_ + 1;
      std::vector<double> attn(d, 0.0);
      std::vector<double> p(t);
      const auto qd = q.data();
      for (std::size_t hd = 0; hd < n_heads; ++hd) {
        const std::size_t off = hd * head_dim;
        double max_score = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < t; ++j) {
          const double* kj = keys_[l].data() + j * d + off;
          double s = 0.0;
          for (std::size_t c = 0; c < head_dim; ++c) s += qd[off + c] * kj[c];
          p[j] = s * score_scale;
          max_score = std::max(max_score, p[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < t; ++j) {
          p[j] = std::exp(p[j] - max_score);
          z += p[j];
        }
        for (std::size_t j = 0; j < t; ++j) {
          const double* vj = values_[l].data() + j * d + off;
          const double pj = p[j] / z;
          for (std::size_t c = 0; c < head_dim; ++c) attn[off + c] += pj * vj[c];
        }
      }
      x = add(nullptr, x, matmul_nt(nullptr, Tensor({1, d}, std::move(attn)), wt[3]));
      Tensor f = rms_normalize(nullptr, x, w.ffn_norm);
      f = gelu(nullptr, matmul_nt(nullptr, f, w.w1));
      x = add(nullptr, x, matmul_nt(nullptr, f, w.w2));
    }
    ++length_;
    return matmul_nt(nullptr, rms_normalize(nullptr, x, model_.final_norm()),
                     model_.token_embedding());
  }

 private:
  const Model& model_;
  std::vector<std::array<Tensor, 4>> weights_;
  std::vector<std::vector<double>> keys_, values_;
  std::size_t length_ = 0;
};

Tensor last_logits(const Model& model, std::span<const int> ids, const ProjectionHook* hook) {
  const Tensor h = hidden_states(model, ids, nullptr, hook);
  const std::size_t d = h.cols();
  const auto hd = h.data();
  Tensor last({1, d}, std::vector<double>(hd.end() - static_cast<std::ptrdiff_t>(d), hd.end()));
  return matmul_nt(nullptr, last, model.token_embedding());
}

}  // namespace

std::string generate_greedy(const Model& model, std::string_view prompt, int max_new,
                            const ProjectionHook* hook) {
  if (max_new < 1) throw ContractError("generate_greedy: max_new must be >= 1");
  TokenSequence ids = tokenize(prompt);
  ids.pop_back();  // drop EOS; the prompt is open-ended
  const std::size_t ctx = model.config().context_len;
  Decoder decoder(model, hook);
  Tensor logits;
  if (ids.size() <= ctx) {
    for (int id : ids) logits = decoder.push(id);
  }
  std::string out;
  for (int step = 0; step < max_new; ++step) {
    if (ids.size() > ctx) {
      // Past the context the window slides, which invalidates cached positions.
      logits = last_logits(model, std::span<const int>(ids).last(ctx), hook);
    }
    const auto z = logits.data();
    // max_element returns the first maximum, i.e. the lowest id on ties.
    const int next = static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
    if (next == kEosId || next == kBosId) break;
    out.push_back(static_cast<char>(next));
    ids.push_back(next);
    if (ids.size() <= ctx) logits = decoder.push(next);
  }
  return out;
}

std::string format_training_text(std::string_view question, std::string_view answer) {
  std::string text = "Q: ";
  text.append(question);
  text.append("\nA: ");
  text.append(answer);
  return text;
}

std::string format_prompt(std::string_view question) {
  std::string text = "Q: ";
  text.append(question);
  text.append("\nA:");
  return text;
}

}  // namespace sllab
