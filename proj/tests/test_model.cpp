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


#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sllab/errors.hpp"
#include "sllab/model.hpp"
#include "sllab/training.hpp"
#include "support.hpp"

namespace sllab {
namespace {

std::vector<int> random_ids(std::size_t n, std::uint64_t seed, int vocab = kVocabSize) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dist(0, vocab - 1);
  std::vector<int> ids(n);
  for (int& id : ids) id = dist(rng);
  return ids;
}

std::vector<double> flat_parameters(const Model& m) {
  std::vector<double> out;
  for (const NamedTensor& p : m.parameters()) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

bool bit_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

TEST(Tokenizer, EmptyText) { EXPECT_EQ(tokenize(""), (TokenSequence{256, 257})); }

TEST(Tokenizer, ByteIdentity) { EXPECT_EQ(tokenize("AB"), (TokenSequence{256, 65, 66, 257})); }

TEST(TokenizerProperty, RoundTripsRandomBytes) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> len(0, 64), byte(0, 255);
  for (int trial = 0; trial < 1000; ++trial) {
    std::string s(static_cast<std::size_t>(len(rng)), '\0');
    for (char& c : s) c = static_cast<char>(byte(rng));
    const TokenSequence ids = tokenize(s);
    ASSERT_EQ(ids.size(), s.size() + 2);
    for (int id : ids) ASSERT_LT(id, kVocabSize);
    ASSERT_EQ(detokenize(ids), s);
  }
}

TEST(ModelConfig, ValidatesDimensions) {
  ModelConfig c;
  EXPECT_NO_THROW(c.validate());
  c.n_heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig{};
  c.context_len = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig{};
  c.d_ff = 0;
  EXPECT_THROW(init_model(c), ConfigError);
}

TEST(InitModel, ClosedFormParameterCount) {
  ModelConfig c;  // 258, 64, 2 layers, 2 heads, 128, 256
  const std::size_t want = oracle::decoder_parameter_count(258, 64, 2, 128, 256);
  EXPECT_EQ(want, 123328u);
  EXPECT_EQ(c.parameter_count(), want);
  EXPECT_EQ(init_model(c).parameter_count(), want);
}

TEST(InitModel, SameSeedIsBitIdentical) {
  ModelConfig c = testing::gradcheck_config(5);
  const auto a = flat_parameters(init_model(c));
  const auto b = flat_parameters(init_model(c));
  EXPECT_TRUE(bit_equal(a, b));
}

TEST(InitModel, DifferentSeedsDiffer) {
  ModelConfig c = testing::gradcheck_config(5);
  ModelConfig d = c;
  d.seed = 6;
  EXPECT_NE(flat_parameters(init_model(c)), flat_parameters(init_model(d)));
}

TEST(InitModel, GainsOneAndWeightScale) {
  ModelConfig c;
  const Model m = init_model(c);
  for (double v : m.final_norm().data()) EXPECT_EQ(v, 1.0);
  const auto w = m.layers()[0].wq.data();
  double ss = 0.0;
  for (double v : w) ss += v * v;
  const double std = std::sqrt(ss / static_cast<double>(w.size()));
  EXPECT_NEAR(std, 0.02 / std::sqrt(2.0), 0.001);
}

TEST(Forward, EmptyInputIsAContractError) {
  const Model m = init_model(testing::gradcheck_config());
  EXPECT_THROW(m.forward({}), ContractError);
}

TEST(Forward, LongerThanContextIsAContractError) {
  const Model m = init_model(testing::gradcheck_config());
  const auto ids = random_ids(9, 1);
  EXPECT_THROW(m.forward(ids), ContractError);
}

TEST(ForwardProperty, CausalityIsExact) {
  ModelConfig c;
  c.context_len = 32;
  Model m = init_model(c);
  testing::randomize(testing::tensors_of(m), 0.2, 3);
  auto ids = random_ids(32, 2);
  const Tensor before = m.forward(ids);
  for (std::size_t t : {0u, 7u, 31u}) {
    auto changed = ids;
    changed[t] = (changed[t] + 1) % kVocabSize;
    const Tensor after = m.forward(changed);
    const std::size_t v = kVocabSize;
    EXPECT_TRUE(bit_equal(before.data().first(t * v), after.data().first(t * v))) << t;
    EXPECT_FALSE(bit_equal(before.data().subspan(t * v, v), after.data().subspan(t * v, v))) << t;
  }
}

TEST(ForwardProperty, Deterministic) {
  const Model m = init_model(ModelConfig{});
  const auto ids = random_ids(40, 3);
  EXPECT_TRUE(bit_equal(m.forward(ids).data(), m.forward(ids).data()));
}

TEST(ForwardProperty, FiniteOnRandomInputs) {
  ModelConfig c;
  const Model m = init_model(c);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Tensor logits = m.forward(random_ids(64, s));
    ASSERT_EQ(logits.shape(), (Shape{64, kVocabSize}));
    for (double v : logits.data()) ASSERT_TRUE(std::isfinite(v));
  }
}

TEST(ForwardProperty, MatchesFiniteDifferences) {
  Model m = init_model(testing::gradcheck_config());
  ASSERT_LE(m.parameter_count(), 5000u);
  testing::randomize(testing::tensors_of(m), 0.3, 11);
  for (NamedTensor& p : m.parameters())
    if (p.name.ends_with("norm"))
      for (double& v : p.tensor.mutable_data()) v = 1.0 + 0.1 * v;
  const auto ids = random_ids(9, 4);
  const auto r = testing::finite_difference_check(m, nullptr, m.parameters(), ids, 1e-4, 1e-6);
  EXPECT_EQ(r.checked, m.parameter_count());
  EXPECT_LT(r.max_relative_error, 1e-4) << r.worst;
}

TEST(AvgNll, UntrainedModelIsNearUniform) {
  const Model m = init_model(ModelConfig{});
  EXPECT_NEAR(avg_nll(m, "Q: which remedy relieves fever?\nA: paracetamol relieves fever."),
              std::log(258.0), 0.06);
}

TEST(AvgNll, EmptyTextIsAContractError) {
  const Model m = init_model(testing::gradcheck_config());
  EXPECT_THROW(avg_nll(m, ""), ContractError);
}

TEST(AvgNll, RecomputedFromForwardLogits) {
  ModelConfig c;
  c.context_len = 64;
  Model m = init_model(c);
  testing::randomize(testing::tensors_of(m), 0.1, 5);
  const std::string text = "Q: define tort.\nA: tort denotes civil wrong causing injury.";
  const TokenSequence ids = tokenize(text);
  ASSERT_LE(ids.size(), 64u);
  const Tensor logits = m.forward(std::span<const int>(ids).first(ids.size() - 1));
  std::vector<std::vector<double>> rows;
  for (std::size_t t = 0; t + 1 < ids.size(); ++t)
    rows.emplace_back(logits.data().begin() + t * kVocabSize,
                      logits.data().begin() + (t + 1) * kVocabSize);
  const std::vector<int> targets(ids.begin() + 1, ids.end());
  EXPECT_NEAR(avg_nll(m, text), oracle::cross_entropy(rows, targets), 1e-10);
}

TEST(AvgNll, WindowedScoringIsTokenWeighted) {
  ModelConfig c = testing::gradcheck_config();
  Model m = init_model(c);
  testing::randomize(testing::tensors_of(m), 0.3, 6);
  const std::string text = "a longer text than the eight-token context";
  const TokenSequence ids = tokenize(text);
  double sum = 0.0;
  std::size_t n = 0;
  for (auto w : context_windows(ids, c.context_len)) {
    const auto inputs = w.first(w.size() - 1);
    sum += cross_entropy(nullptr, m.forward(inputs), w.subspan(1)).item() *
           static_cast<double>(inputs.size());
    n += inputs.size();
  }
  EXPECT_EQ(n, ids.size() - 1);
  EXPECT_NEAR(avg_nll(m, text), sum / static_cast<double>(n), 1e-12);
  const NllTotal total = nll_total(m, text);
  EXPECT_EQ(total.tokens, ids.size() - 1);
  EXPECT_NEAR(total.sum, sum, 1e-10);
}

TEST(ContextWindows, EveryTargetScoredOnce) {
  std::vector<int> ids(30);
  for (int i = 0; i < 30; ++i) ids[i] = i;
  std::vector<int> targets;
  for (auto w : context_windows(ids, 8)) {
    EXPECT_LE(w.size(), 8u);
    targets.insert(targets.end(), w.begin() + 1, w.end());
  }
  ASSERT_EQ(targets.size(), 29u);
  for (int i = 0; i < 29; ++i) EXPECT_EQ(targets[i], i + 1);
}

TEST(Generate, DeterministicAndPure) {
  Model m = init_model(ModelConfig{});
  testing::randomize(testing::tensors_of(m), 0.1, 8);
  const auto before = flat_parameters(m);
  const std::string a = generate_greedy(m, "Q: locate gene CFTR.\nA:", 20);
  const std::string b = generate_greedy(m, "Q: locate gene CFTR.\nA:", 20);
  EXPECT_EQ(a, b);
  avg_nll(m, "anything at all");
  EXPECT_TRUE(bit_equal(before, flat_parameters(m)));
}

TEST(Generate, ArgmaxTieGoesToLowestId) {
  Model m = init_model(testing::gradcheck_config());
  for (NamedTensor& p : m.parameters())
    if (!p.name.ends_with("norm")) std::fill(p.tensor.mutable_data().begin(), p.tensor.mutable_data().end(), 0.0);
  // All logits are exactly zero, so every step picks id 0.
  EXPECT_EQ(generate_greedy(m, "x", 3), std::string(3, '\0'));
}

TEST(Generate, StopsAtMaxNew) {
  Model m = init_model(testing::gradcheck_config());
  testing::randomize(testing::tensors_of(m), 0.3, 9);
  EXPECT_LE(generate_greedy(m, "abc", 5).size(), 5u);
  EXPECT_THROW(generate_greedy(m, "abc", 0), ContractError);
}

// The incremental decoder must reproduce full recomputation, including once
// the sequence slides past the context length.
TEST(Generate, MatchesFullRecompute) {
  ModelConfig c;
  c.context_len = 16;
  c.d_model = 16;
  c.d_ff = 32;
  Model m = init_model(c);
  testing::randomize(testing::tensors_of(m), 0.4, 10);
  const std::string prompt = "Q: hello\nA:";
  TokenSequence ids = tokenize(prompt);
  ids.pop_back();
  std::string want;
  for (int step = 0; step < 30; ++step) {
    const std::size_t start = ids.size() > c.context_len ? ids.size() - c.context_len : 0;
    const Tensor logits = m.forward(std::span<const int>(ids).subspan(start));
    const auto last = logits.data().last(kVocabSize);
    const int next = static_cast<int>(std::max_element(last.begin(), last.end()) - last.begin());
    if (next == kEosId || next == kBosId) break;
    want.push_back(static_cast<char>(next));
    ids.push_back(next);
  }
  EXPECT_EQ(generate_greedy(m, prompt, 30), want);
}

TEST(Generate, OverfitModelAnswersItsQuestion) {
  Model m = init_model(ModelConfig{});
  const std::vector<QARecord> rec = {{"medical", "which remedy relieves fever?", "paracetamol relieves fever.", 0}};
  OptimizerConfig oc;
  oc.learning_rate = 3e-3;
  oc.steps_per_chunk = 200;
  Adam adam(testing::tensors_of(m), oc);
  Rng rng(0);
  train_model(m, rec, oc, adam, rng);
  EXPECT_LT(avg_nll(m, format_training_text(rec[0].question, rec[0].answer)), 0.5);
  EXPECT_EQ(generate_greedy(m, format_prompt(rec[0].question), 60), " " + rec[0].answer);
}

TEST(Formats, TrainingTextAndPrompt) {
  EXPECT_EQ(format_training_text("x", "y"), "Q: x\nA: y");
  EXPECT_EQ(format_prompt("x"), "Q: x\nA:");
}

}  // namespace
}  // namespace sllab
