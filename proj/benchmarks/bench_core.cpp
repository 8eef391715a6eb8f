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


#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "sllab/lora.hpp"
#include "sllab/model.hpp"
#include "sllab/stream.hpp"
#include "sllab/synth.hpp"
#include "sllab/tensor.hpp"
#include "sllab/training.hpp"

namespace {

sllab::Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> data(r * c);
  for (double& x : data) x = dist(rng);
  return sllab::Tensor({r, c}, std::move(data));
}

void BM_MatmulNT(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const sllab::Tensor a = random_matrix(n, n, 1);
  const sllab::Tensor b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(sllab::matmul_nt(nullptr, a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_MatmulNT)->Arg(64)->Arg(128)->Arg(256);

void BM_Forward(benchmark::State& state) {
  const sllab::Model m = sllab::init_model(sllab::ModelConfig{});
  const auto len = static_cast<std::size_t>(state.range(0));
  std::vector<int> ids(len);
  for (std::size_t i = 0; i < len; ++i) ids[i] = static_cast<int>(97 + i % 26);
  for (auto _ : state) benchmark::DoNotOptimize(m.forward(ids));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(len));
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(128);

void BM_LoraTrainStep(benchmark::State& state) {
  const sllab::Model base = sllab::init_model(sllab::ModelConfig{});
  sllab::AdaptedModel adapted = sllab::attach(base, sllab::LoraConfig{}, 7);
  const std::vector<sllab::QARecord> batch = sllab::generate_synthetic("medical", 16, 7);
  sllab::OptimizerConfig oc;
  oc.steps_per_chunk = 1;
  sllab::Adam adam(adapted.trainable_parameters(), oc);
  sllab::Rng rng(7);
  for (auto _ : state) benchmark::DoNotOptimize(sllab::train_on_chunk(adapted, batch, oc, adam, rng));
}
BENCHMARK(BM_LoraTrainStep)->Unit(benchmark::kMillisecond);

void BM_GreedyDecode(benchmark::State& state) {
  const sllab::Model m = sllab::init_model(sllab::ModelConfig{});
  for (auto _ : state)
    benchmark::DoNotOptimize(sllab::generate_greedy(m, "Q: which remedy relieves fever?\nA:", 32));
}
BENCHMARK(BM_GreedyDecode)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
