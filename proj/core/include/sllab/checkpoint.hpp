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

// Binary checkpoint container.
//
//   "SLLAB1"
//   u32 x 7   vocab_size d_model n_layers n_heads context_len d_ff seed
//   u32       flags: 1 base, 2 adapters, 4 run state
//   base      u64 element count, then every parameter in declaration order
//   adapters  u32 count; per adapter u32 layer, u32 proj, u32 rank, f64 alpha,
//             A [rank x d_in], B [d_out x rank]
//   run       u64 length, opaque bytes owned by the experiment
//   "END1"
//
// Integers are little-endian, reals are IEEE-754 binary64 little-endian.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sllab/lora.hpp"

namespace sllab {

struct CheckpointData {
  ModelConfig config;
  std::optional<Model> base;
  std::optional<std::vector<LoraAdapter>> adapters;
  std::optional<std::string> run_state;
};

std::string encode_checkpoint(const ModelConfig& config, const Model* base,
                              const std::vector<LoraAdapter>* adapters,
                              const std::string* run_state);
// Throws CheckpointError on a bad magic, truncation or inconsistent sizes.
CheckpointData decode_checkpoint(std::string_view bytes);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

// Base plus adapters.
void save_adapted(const std::filesystem::path& path, const AdaptedModel& model);
AdaptedModel load_adapted(const std::filesystem::path& path);

// Adapter-only files, restorable onto any base with the same config.
void save_adapters(const std::filesystem::path& path, const AdaptedModel& model);
AdaptedModel load_adapters(const std::filesystem::path& path, const Model& base);

}  // namespace sllab
