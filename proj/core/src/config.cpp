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

#include "sllab/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "sllab/binary_io.hpp"
#include "sllab/errors.hpp"
#include "sllab/synth.hpp"

namespace sllab {

namespace {

std::string trim(std::string_view s) {
  const char* ws = " \t\r\n";
  const std::size_t b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const std::size_t e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const std::size_t comma = s.find(',', start);
    const std::size_t end = comma == std::string_view::npos ? s.size() : comma;
    std::string item = trim(s.substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_uint(std::string_view key, std::string_view v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" +
                      std::string(v) + "'");
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty() || !std::isfinite(out)) {
    throw ConfigError(std::string(key) + ": expected a finite number, got '" +
                      std::string(v) + "'");
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

AttnProj parse_projection(std::string_view name) {
  if (name == "q") return AttnProj::kQuery;
  if (name == "k") return AttnProj::kKey;
  if (name == "v") return AttnProj::kValue;
  if (name == "o") return AttnProj::kOutput;
  throw ConfigError("lora.targets: unknown projection '" + std::string(name) +
                    "' (expected q, k, v or o)");
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (const std::string& s : items) {
    if (!out.empty()) out += ',';
    out += s;
  }
  return out;
}

struct Field {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

#define SLLAB_U32(name, member)                                                  \
  Field {                                                                        \
    name, [](const ExperimentConfig& c) { return std::to_string(c.member); },    \
        [](ExperimentConfig& c, std::string_view v) {                            \
          c.member = parse_uint<std::uint32_t>(name, v);                         \
        }                                                                        \
  }
#define SLLAB_F64(name, member)                                                  \
  Field {                                                                        \
    name, [](const ExperimentConfig& c) { return format_double(c.member); },     \
        [](ExperimentConfig& c, std::string_view v) { c.member = parse_double(name, v); } \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      SLLAB_U32("model.vocab_size", model.vocab_size),
      SLLAB_U32("model.d_model", model.d_model),
      SLLAB_U32("model.n_layers", model.n_layers),
      SLLAB_U32("model.n_heads", model.n_heads),
      SLLAB_U32("model.context_len", model.context_len),
      SLLAB_U32("model.d_ff", model.d_ff),
      SLLAB_U32("lora.rank", lora.rank),
      SLLAB_F64("lora.alpha", lora.alpha),
      Field{"lora.targets",
            [](const ExperimentConfig& c) { return to_string(c.lora.projections); },
            [](ExperimentConfig& c, std::string_view v) {
              c.lora.projections.clear();
              for (const std::string& p : split_list(v)) {
                c.lora.projections.push_back(parse_projection(p));
              }
            }},
      Field{"stream.domains", [](const ExperimentConfig& c) { return join(c.domains); },
            [](ExperimentConfig& c, std::string_view v) { c.domains = split_list(v); }},
      SLLAB_U32("stream.rounds", rounds),
      SLLAB_U32("stream.chunk_size", chunk_size),
      SLLAB_F64("stream.buffer_ratio", buffer_ratio),
      SLLAB_F64("stream.replay_fraction", replay_fraction),
      SLLAB_F64("optim.learning_rate", optimizer.learning_rate),
      SLLAB_F64("optim.beta1", optimizer.beta1),
      SLLAB_F64("optim.beta2", optimizer.beta2),
      SLLAB_F64("optim.epsilon", optimizer.epsilon),
      SLLAB_U32("optim.steps_per_chunk", optimizer.steps_per_chunk),
      SLLAB_U32("optim.microbatch_size", optimizer.microbatch_size),
      SLLAB_U32("warmup.steps", warmup_steps),
      SLLAB_F64("warmup.learning_rate", warmup_learning_rate),
      SLLAB_U32("eval.set_size", eval_set_size),
      SLLAB_U32("eval.max_answer_tokens", max_answer_tokens),
      SLLAB_U32("eval.threads", eval_threads),
      Field{"data.corpus_dir", [](const ExperimentConfig& c) { return c.corpus_dir; },
            [](ExperimentConfig& c, std::string_view v) { c.corpus_dir = std::string(v); }},
      SLLAB_U32("data.synthetic_records", synthetic_records),
      Field{"seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
            [](ExperimentConfig& c, std::string_view v) {
              c.seed = parse_uint<std::uint64_t>("seed", v);
            }},
      Field{"output_dir", [](const ExperimentConfig& c) { return c.output_dir; },
            [](ExperimentConfig& c, std::string_view v) { c.output_dir = std::string(v); }},
      SLLAB_U32("checkpoint_every", checkpoint_every),
  };
  return table;
}

#undef SLLAB_U32
#undef SLLAB_F64

const Field* find_field(std::string_view key) {
  for (const Field& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

std::string to_string(const std::vector<AttnProj>& projections) {
  std::string out;
  for (AttnProj p : projections) {
    if (!out.empty()) out += ',';
    out += "qkvo"[static_cast<std::size_t>(p)];
  }
  return out;
}

void ExperimentConfig::validate() const {
  model.validate();
  require(model.vocab_size == kVocabSize,
          "model.vocab_size must be " + std::to_string(kVocabSize) + " for the byte tokenizer");
  require(lora.rank >= 1 && lora.rank <= model.d_model,
          "lora.rank must be in [1, model.d_model]");
  require(lora.alpha > 0.0, "lora.alpha must be positive");
  require(!lora.projections.empty(), "lora.targets must name at least one projection");
  require(std::set<AttnProj>(lora.projections.begin(), lora.projections.end()).size() ==
              lora.projections.size(),
          "lora.targets has a duplicate projection");
  require(!domains.empty(), "stream.domains is empty");
  require(std::set<std::string>(domains.begin(), domains.end()).size() == domains.size(),
          "stream.domains has a duplicate domain");
  require(rounds >= 1, "stream.rounds must be >= 1");
  require(chunk_size >= 1, "stream.chunk_size must be >= 1");
  require(buffer_ratio >= 0.0, "stream.buffer_ratio must be >= 0");
  require(replay_fraction >= 0.0 && replay_fraction <= 1.0,
          "stream.replay_fraction must be in [0, 1]");
  require(optimizer.learning_rate >= 0.0, "optim.learning_rate must be >= 0");
  require(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0, "optim.beta1 must be in [0, 1)");
  require(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0, "optim.beta2 must be in [0, 1)");
  require(optimizer.epsilon > 0.0, "optim.epsilon must be positive");
  require(optimizer.steps_per_chunk >= 1, "optim.steps_per_chunk must be >= 1");
  require(optimizer.microbatch_size >= 1, "optim.microbatch_size must be >= 1");
  require(warmup_learning_rate >= 0.0, "warmup.learning_rate must be >= 0");
  require(eval_set_size >= 1, "eval.set_size must be >= 1");
  require(max_answer_tokens >= 1, "eval.max_answer_tokens must be >= 1");
  require(synthetic_records >= 1, "data.synthetic_records must be >= 1");
  if (corpus_dir.empty()) {
    for (const std::string& d : domains) {
      const auto& known = synthetic_domains();
      require(std::find(known.begin(), known.end(), d) != known.end(),
              "stream.domains: '" + d + "' has no synthetic generator; set data.corpus_dir");
    }
  }
}

ModelConfig ExperimentConfig::model_config() const {
  ModelConfig m = model;
  m.seed = static_cast<std::uint32_t>(seed);
  return m;
}

std::size_t ExperimentConfig::resolved_eval_threads() const {
  if (eval_threads > 0) return eval_threads;
  return std::max(1u, std::thread::hardware_concurrency());
}

bool ExperimentConfig::operator==(const ExperimentConfig& other) const {
  return to_config_text(*this) == to_config_text(other);
}

void apply_config_override(ExperimentConfig& config, std::string_view key, std::string_view value) {
  const Field* f = find_field(key);
  if (f == nullptr) throw ConfigError("unknown config key '" + std::string(key) + "'");
  f->set(config, trim(value));
}

ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig config;
  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const std::size_t eq = body.find('=');
    auto fail = [&](const std::string& what) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + what);
    };
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (!seen.insert(key).second) fail("repeated key '" + key + "'");
    try {
      apply_config_override(config, key, value);
    } catch (const ConfigError& e) {
      fail(e.what());
    }
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  try {
    return parse_config(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string to_config_text(const ExperimentConfig& config) {
  std::string out;
  for (const Field& f : fields()) {
    out += f.key;
    out += " = ";
    out += f.get(config);
    out += '\n';
  }
  return out;
}

std::string to_config_json(const ExperimentConfig& config) {
  nlohmann::ordered_json j;
  for (const Field& f : fields()) {
    const std::string v = f.get(config);
    const char* end = v.data() + v.size();
    std::uint64_t u = 0;
    double d = 0.0;
    if (!v.empty() && std::from_chars(v.data(), end, u).ptr == end) {
      j[f.key] = u;
    } else if (!v.empty() && std::from_chars(v.data(), end, d).ptr == end) {
      j[f.key] = d;
    } else {
      j[f.key] = v;
    }
  }
  return j.dump(2);
}

}  // namespace sllab
