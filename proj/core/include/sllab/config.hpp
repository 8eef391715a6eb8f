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
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sllab/lora.hpp"
#include "sllab/training.hpp"

namespace sllab {

struct ExperimentConfig {
  ModelConfig model;
  LoraConfig lora;

  std::vector<std::string> domains = {"medical", "genetic", "legal"};
  std::uint32_t rounds = 2;
  std::uint32_t chunk_size = 16;
  double buffer_ratio = 1.0;
  double replay_fraction = 0.25;

  OptimizerConfig optimizer;

  // Full-parameter warm-up of the base on corpus records that are neither
  // streamed nor held out. 0 disables it.
  std::uint32_t warmup_steps = 400;
  double warmup_learning_rate = 3e-3;

  std::uint32_t eval_set_size = 16;
  std::uint32_t max_answer_tokens = 72;
  std::uint32_t eval_threads = 0;  // 0: hardware concurrency

  // Directory holding {domain}.jsonl. Empty: generate synthetic corpora.
  std::string corpus_dir;
  std::uint32_t synthetic_records = 200;

  std::uint64_t seed = 0;
  std::string output_dir = "runs/demo";
  // Write ckpt_chunk{k}.bin after every n-th chunk; 0 disables.
  std::uint32_t checkpoint_every = 0;

  // Throws ConfigError naming the offending field.
  void validate() const;
  // The model config with the experiment seed applied.
  ModelConfig model_config() const;
  std::size_t resolved_eval_threads() const;

  bool operator==(const ExperimentConfig&) const;
};

// Flat "key = value" text; '#' starts a comment. Unknown or repeated keys and
// malformed values throw ConfigError with the line number.
ExperimentConfig parse_config(std::string_view text);
// Throws ConfigError naming the path when it cannot be read.
ExperimentConfig load_config(const std::filesystem::path& path);
// Lossless: parse_config(to_config_text(c)) == c.
std::string to_config_text(const ExperimentConfig& config);
std::string to_config_json(const ExperimentConfig& config);

// Applies one "key=value" override as if it were a config line.
void apply_config_override(ExperimentConfig& config, std::string_view key, std::string_view value);

std::string to_string(const std::vector<AttnProj>& projections);

}  // namespace sllab
