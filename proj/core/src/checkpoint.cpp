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

#include "sllab/checkpoint.hpp"

#include "sllab/binary_io.hpp"
#include "sllab/errors.hpp"

namespace sllab {

namespace {

constexpr std::string_view kMagic = "SLLAB1";
constexpr std::string_view kEnd = "END1";
constexpr std::uint32_t kHasBase = 1;
constexpr std::uint32_t kHasAdapters = 2;
constexpr std::uint32_t kHasRun = 4;

void write_config(ByteWriter& w, const ModelConfig& c) {
  for (std::uint32_t v : {c.vocab_size, c.d_model, c.n_layers, c.n_heads, c.context_len, c.d_ff,
                          c.seed}) {
    w.u32(v);
  }
}

ModelConfig read_config(ByteReader& r) {
  ModelConfig c;
  c.vocab_size = r.u32();
  c.d_model = r.u32();
  c.n_layers = r.u32();
  c.n_heads = r.u32();
  c.context_len = r.u32();
  c.d_ff = r.u32();
  c.seed = r.u32();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint: invalid model config: ") + e.what());
  }
  return c;
}

}  // namespace

std::string encode_checkpoint(const ModelConfig& config, const Model* base,
                              const std::vector<LoraAdapter>* adapters,
                              const std::string* run_state) {
  ByteWriter w;
  w.bytes(kMagic);
  write_config(w, config);
  std::uint32_t flags = 0;
  if (base != nullptr) flags |= kHasBase;
  if (adapters != nullptr) flags |= kHasAdapters;
  if (run_state != nullptr) flags |= kHasRun;
  w.u32(flags);
  if (base != nullptr) {
    if (!(base->config() == config)) throw ContractError("checkpoint: base config mismatch");
    w.u64(base->parameter_count());
    for (const NamedTensor& p : base->parameters()) w.f64s(p.tensor.data());
  }
  if (adapters != nullptr) {
    w.u32(static_cast<std::uint32_t>(adapters->size()));
    for (const LoraAdapter& a : *adapters) {
      w.u32(a.target.layer);
      w.u32(static_cast<std::uint32_t>(a.target.proj));
      w.u32(a.rank);
      w.f64(a.alpha);
      w.f64s(a.a.data());
      w.f64s(a.b.data());
    }
  }
  if (run_state != nullptr) w.str(*run_state);
  w.bytes(kEnd);
  return w.take();
}

CheckpointData decode_checkpoint(std::string_view bytes) {
  ByteReader r(bytes);
  if (bytes.size() < kMagic.size() || r.bytes(kMagic.size()) != kMagic) {
    throw CheckpointError("checkpoint: bad magic (expected SLLAB1)");
  }
  CheckpointData out;
  out.config = read_config(r);
  const std::uint32_t flags = r.u32();
  if ((flags & ~(kHasBase | kHasAdapters | kHasRun)) != 0) {
    throw CheckpointError("checkpoint: unknown flags");
  }
  const ModelConfig& cfg = out.config;
  if ((flags & kHasBase) != 0) {
    Model m(cfg);
    if (r.u64() != m.parameter_count()) throw CheckpointError("checkpoint: parameter count mismatch");
    for (NamedTensor& p : m.parameters()) r.f64s(p.tensor.mutable_data());
    out.base = std::move(m);
  }
  if ((flags & kHasAdapters) != 0) {
    const std::uint32_t n = r.u32();
    std::vector<LoraAdapter> adapters;
    const std::size_t d = cfg.d_model;
    for (std::uint32_t i = 0; i < n; ++i) {
      LoraAdapter a;
      a.target.layer = r.u32();
      const std::uint32_t proj = r.u32();
      if (proj > 3) throw CheckpointError("checkpoint: bad adapter projection");
      a.target.proj = static_cast<AttnProj>(proj);
      a.rank = r.u32();
      a.alpha = r.f64();
      if (a.target.layer >= cfg.n_layers || a.rank == 0 || a.rank > d) {
        throw CheckpointError("checkpoint: bad adapter header");
      }
      a.a = Tensor::zeros({a.rank, d});
      a.b = Tensor::zeros({d, a.rank});
      r.f64s(a.a.mutable_data());
      r.f64s(a.b.mutable_data());
      adapters.push_back(std::move(a));
    }
    out.adapters = std::move(adapters);
  }
  if ((flags & kHasRun) != 0) out.run_state = r.str();
  if (r.remaining() != kEnd.size() || r.bytes(kEnd.size()) != kEnd) {
    throw CheckpointError("checkpoint: missing end marker");
  }
  return out;
}

void save_model(const std::filesystem::path& path, const Model& model) {
  write_file_atomic(path, encode_checkpoint(model.config(), &model, nullptr, nullptr));
}

Model load_model(const std::filesystem::path& path) {
  CheckpointData data = decode_checkpoint(read_file(path));
  if (!data.base) throw CheckpointError(path.string() + ": no base parameters");
  return std::move(*data.base);
}

namespace {

AdaptedModel rebuild(const Model& base, std::vector<LoraAdapter> adapters) {
  AdaptedModel out(base);
  for (LoraAdapter& a : adapters) {
    try {
      out.add_adapter(std::move(a));
    } catch (const ConfigError& e) {
      throw CheckpointError(std::string("checkpoint: ") + e.what());
    }
  }
  return out;
}

}  // namespace

void save_adapted(const std::filesystem::path& path, const AdaptedModel& model) {
  write_file_atomic(path, encode_checkpoint(model.config(), &model.base(), &model.adapters(),
                                            nullptr));
}

AdaptedModel load_adapted(const std::filesystem::path& path) {
  CheckpointData data = decode_checkpoint(read_file(path));
  if (!data.base || !data.adapters) {
    throw CheckpointError(path.string() + ": needs both base and adapter sections");
  }
  return rebuild(*data.base, std::move(*data.adapters));
}

void save_adapters(const std::filesystem::path& path, const AdaptedModel& model) {
  write_file_atomic(path, encode_checkpoint(model.config(), nullptr, &model.adapters(), nullptr));
}

AdaptedModel load_adapters(const std::filesystem::path& path, const Model& base) {
  CheckpointData data = decode_checkpoint(read_file(path));
  if (!data.adapters) throw CheckpointError(path.string() + ": no adapter section");
  if (!(data.config == base.config())) {
    throw CheckpointError(path.string() + ": adapters were saved for a different model config");
  }
  return rebuild(base, std::move(*data.adapters));
}

}  // namespace sllab
