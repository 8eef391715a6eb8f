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

#include "sllab/experiment.hpp"

#include <chrono>
#include <ctime>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sllab/binary_io.hpp"
#include "sllab/checkpoint.hpp"
#include "sllab/errors.hpp"
#include "sllab/synth.hpp"

#ifndef SLLAB_VERSION
#define SLLAB_VERSION "unknown"
#endif
#ifndef SLLAB_GIT_REVISION
#define SLLAB_GIT_REVISION "unknown"
#endif

namespace sllab {

const char* version_string() { return SLLAB_VERSION; }
const char* git_revision() { return SLLAB_GIT_REVISION; }

namespace {

// Independent streams from one experiment seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t{out[0]} << 32) | out[1];
}

constexpr std::uint64_t kBufferStream = 1;
constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kWarmupStream = 3;

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void fnv1a(std::uint64_t& h, std::span<const double> values) {
  const auto* p = reinterpret_cast<const unsigned char*>(values.data());
  for (std::size_t i = 0; i < values.size_bytes(); ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

void write_row(ByteWriter& w, const MetricsRow& r) {
  w.u64(r.chunk);
  w.str(r.trained_domain);
  w.str(r.eval_domain);
  w.f64(r.perplexity);
  w.f64(r.avg_loss);
  w.f64(r.similarity);
  w.f64(r.judge_rating);
  w.f64(r.time_per_step_s);
  w.u64(r.steps);
}

MetricsRow read_row(ByteReader& r) {
  MetricsRow m;
  m.chunk = r.u64();
  m.trained_domain = r.str();
  m.eval_domain = r.str();
  m.perplexity = r.f64();
  m.avg_loss = r.f64();
  m.similarity = r.f64();
  m.judge_rating = r.f64();
  m.time_per_step_s = r.f64();
  m.steps = r.u64();
  return m;
}

}  // namespace

StreamData prepare_stream(const ExperimentConfig& config) {
  config.validate();
  StreamData data;
  CorpusMap pools;
  const std::size_t streamed = std::size_t{config.rounds} * config.chunk_size;
  for (const std::string& domain : config.domains) {
    std::vector<QARecord> records;
    if (config.corpus_dir.empty()) {
      records = generate_synthetic(domain, config.synthetic_records, config.seed);
    } else {
      const std::filesystem::path path =
          std::filesystem::path(config.corpus_dir) / (domain + ".jsonl");
      records = load_corpus(path);
      for (const QARecord& r : records) {
        if (r.domain != domain) {
          throw CorpusError(path.string() + ": record " + std::to_string(r.id) +
                            " is tagged '" + r.domain + "'");
        }
      }
    }
    const std::size_t n = records.size();
    if (n < config.eval_set_size + 1) {
      throw CorpusError("domain '" + domain + "' has " + std::to_string(n) +
                        " records; eval.set_size is " + std::to_string(config.eval_set_size));
    }
    const std::size_t eval_begin = n - config.eval_set_size;
    data.eval_sets.push_back(
        {domain, std::vector<QARecord>(records.begin() + static_cast<std::ptrdiff_t>(eval_begin),
                                       records.end())});
    if (streamed < eval_begin) {
      data.warmup_pool.insert(data.warmup_pool.end(),
                              records.begin() + static_cast<std::ptrdiff_t>(streamed),
                              records.begin() + static_cast<std::ptrdiff_t>(eval_begin));
    }
    records.resize(eval_begin);
    pools[domain] = std::move(records);
  }
  data.schedule = make_schedule(config.domains, pools, config.rounds, config.chunk_size);
  return data;
}

Model build_base(const ExperimentConfig& config, const StreamData& data) {
  Model base = init_model(config.model_config());
  if (config.warmup_steps == 0) return base;
  if (data.warmup_pool.empty()) {
    throw CorpusError(
        "warm-up needs records beyond the streamed and held-out ones; add records or set "
        "warmup.steps = 0");
  }
  OptimizerConfig oc = config.optimizer;
  oc.learning_rate = config.warmup_learning_rate;
  oc.steps_per_chunk = config.warmup_steps;
  std::vector<Tensor> params;
  for (const NamedTensor& p : base.parameters()) params.push_back(p.tensor);
  base.set_frozen(false);
  Adam adam(params, oc);
  Rng rng(derive_seed(config.seed, kWarmupStream));
  train_model(base, data.warmup_pool, oc, adam, rng);
  for (Tensor& p : params) p.clear_grad();
  return base;
}

std::uint64_t parameter_hash(const Model& model) {
  std::uint64_t h = kFnvOffset;
  for (const NamedTensor& p : model.parameters()) fnv1a(h, p.tensor.data());
  return h;
}

std::uint64_t parameter_hash(const AdaptedModel& model) {
  std::uint64_t h = parameter_hash(model.base());
  for (const Tensor& t : model.trainable_parameters()) fnv1a(h, t.data());
  return h;
}

Experiment::Experiment(ExperimentConfig config, std::shared_ptr<const JudgeClient> judge)
    : Experiment(config, prepare_stream(config), nullptr, std::move(judge)) {}

Experiment::Experiment(ExperimentConfig config, const Model& base,
                       std::shared_ptr<const JudgeClient> judge)
    : Experiment(config, prepare_stream(config), &base, std::move(judge)) {}

Experiment::Experiment(ExperimentConfig config, StreamData data, const Model* base,
                       std::shared_ptr<const JudgeClient> judge)
    : config_(std::move(config)),
      data_(std::move(data)),
      judge_(judge ? std::move(judge) : std::make_shared<MockJudge>()),
      buffer_(replay_capacity(config_.buffer_ratio, config_.chunk_size),
              derive_seed(config_.seed, kBufferStream)),
      rng_(derive_seed(config_.seed, kBatchStream)),
      started_utc_(utc_now()) {
  if (base == nullptr) {
    model_ = attach(build_base(config_, data_), config_.lora, config_.seed);
  } else {
    if (!(base->config() == config_.model_config())) {
      throw ConfigError("supplied base model does not match the experiment's model config");
    }
    model_ = attach(*base, config_.lora, config_.seed);
  }
  optimizer_ = Adam(model_.trainable_parameters(), config_.optimizer);
  if (!config_.output_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(config_.output_dir, ec);
    if (ec) throw IoError("cannot create output directory " + config_.output_dir + ": " + ec.message());
    write_echo();
  }
}

std::unique_ptr<Experiment> Experiment::resume(const std::filesystem::path& checkpoint,
                                               const std::string& output_dir,
                                               std::shared_ptr<const JudgeClient> judge) {
  CheckpointData ck = decode_checkpoint(read_file(checkpoint));
  if (!ck.base || !ck.adapters || !ck.run_state) {
    throw CheckpointError(checkpoint.string() + ": not an experiment checkpoint");
  }
  ByteReader r(*ck.run_state);
  ExperimentConfig config;
  try {
    config = parse_config(r.str());
  } catch (const ConfigError& e) {
    throw CheckpointError(checkpoint.string() + ": stored config is invalid: " + e.what());
  }
  if (!output_dir.empty()) config.output_dir = output_dir;
  if (!(config.model_config() == ck.config)) {
    throw CheckpointError(checkpoint.string() + ": model config does not match stored experiment");
  }
  StreamData data = prepare_stream(config);
  // The warmed-up base comes from the checkpoint.
  std::unique_ptr<Experiment> exp(new Experiment(config, std::move(data), &*ck.base, std::move(judge)));

  AdaptedModel model(*ck.base);
  for (LoraAdapter& a : *ck.adapters) model.add_adapter(std::move(a));
  exp->model_ = std::move(model);
  exp->optimizer_ = Adam(exp->model_.trainable_parameters(), config.optimizer);

  exp->next_chunk_ = static_cast<std::size_t>(r.u64());
  exp->optimizer_.restore(r.str());
  exp->buffer_ = ReplayBuffer::deserialize(r.str());
  std::istringstream rng_text(r.str());
  rng_text >> exp->rng_;
  if (!rng_text) throw CheckpointError(checkpoint.string() + ": bad rng state");
  if (r.u8() != 0) exp->baseline_ = BaselineSnapshot::deserialize(r.str());
  const std::uint64_t n_rows = r.u64();
  exp->rows_.clear();
  for (std::uint64_t i = 0; i < n_rows; ++i) exp->rows_.push_back(read_row(r));
  exp->started_utc_ = r.str();
  if (!r.done()) throw CheckpointError(checkpoint.string() + ": trailing run-state bytes");
  if (exp->next_chunk_ > exp->data_.schedule.size()) {
    throw CheckpointError(checkpoint.string() + ": chunk index beyond the schedule");
  }
  if (!config.output_dir.empty()) exp->write_echo();
  return exp;
}

std::filesystem::path Experiment::out_path(const std::string& name) const {
  return std::filesystem::path(config_.output_dir) / name;
}

void Experiment::run_chunk() {
  if (finished()) throw ContractError("run_chunk: schedule already complete");
  const auto start = std::chrono::steady_clock::now();
  const Chunk& chunk = data_.schedule[next_chunk_];
  const std::vector<QARecord> batch =
      compose_batch(chunk, buffer_, config_.replay_fraction, rng_);
  const TrainResult train = train_on_chunk(model_, batch, config_.optimizer, optimizer_, rng_);
  buffer_.update(chunk);
  evaluate(chunk, train);
  ++next_chunk_;
  wall_seconds_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (config_.output_dir.empty()) return;
  flush_log();
  if (config_.checkpoint_every > 0 && next_chunk_ % config_.checkpoint_every == 0) {
    save_checkpoint(out_path("ckpt_chunk" + std::to_string(chunk.index) + ".bin"));
  }
  if (finished()) {
    save_checkpoint(out_path("ckpt_final.bin"));
    write_echo();
  }
}

void Experiment::run(std::size_t stop_before) {
  while (!finished() && next_chunk_ < stop_before) run_chunk();
}

void Experiment::evaluate(const Chunk& chunk, const TrainResult& train) {
  const std::uint64_t before = parameter_hash(model_);
  const std::size_t threads = config_.resolved_eval_threads();
  const int max_new = static_cast<int>(config_.max_answer_tokens);

  std::vector<std::vector<std::string>> answers;
  for (const EvalSet& set : data_.eval_sets) {
    answers.push_back(answer_prompts(model_, set, max_new, threads));
  }
  if (baseline_.empty()) {
    baseline_ = make_baseline(model_.base(), data_.eval_sets, answers);
    if (!config_.output_dir.empty()) baseline_.save(out_path("baseline.bin"));
  }
  for (std::size_t s = 0; s < data_.eval_sets.size(); ++s) {
    const EvalSet& set = data_.eval_sets[s];
    const PerplexityResult ppl = perplexity(model_, set, threads);
    MetricsRow row;
    row.chunk = chunk.index;
    row.trained_domain = chunk.domain;
    row.eval_domain = set.domain;
    row.perplexity = ppl.perplexity;
    row.avg_loss = ppl.avg_loss;
    row.similarity = drift_similarity(model_.base(), baseline_, set, answers[s]);
    row.judge_rating = judge_score(*judge_, baseline_, set, answers[s], threads);
    row.time_per_step_s = train.time_per_step_s;
    row.steps = train.steps;
    rows_.push_back(std::move(row));
  }
  if (parameter_hash(model_) != before) {
    throw ContractError("evaluation changed model parameters at chunk " +
                        std::to_string(chunk.index));
  }
}

std::string Experiment::checkpoint_bytes() const {
  ByteWriter w;
  w.str(to_config_text(config_));
  w.u64(next_chunk_);
  w.str(optimizer_.serialize());
  w.str(buffer_.serialize());
  std::ostringstream rng_text;
  rng_text << rng_;
  w.str(rng_text.str());
  w.u8(baseline_.empty() ? 0 : 1);
  if (!baseline_.empty()) w.str(baseline_.serialize());
  w.u64(rows_.size());
  for (const MetricsRow& r : rows_) write_row(w, r);
  w.str(started_utc_);
  const std::string run = w.take();
  return encode_checkpoint(model_.config(), &model_.base(), &model_.adapters(), &run);
}

void Experiment::save_checkpoint(const std::filesystem::path& path) const {
  write_file_atomic(path, checkpoint_bytes());
}

void Experiment::flush_log() const {
  if (config_.output_dir.empty()) return;
  write_file_atomic(out_path("log.csv"), to_log_csv(rows_));
  write_file_atomic(out_path("series_perplexity.csv"), series_csv(rows_, SeriesMetric::kPerplexity));
  write_file_atomic(out_path("series_similarity.csv"), series_csv(rows_, SeriesMetric::kSimilarity));
  write_file_atomic(out_path("series_rating.csv"), series_csv(rows_, SeriesMetric::kRating));
}

void Experiment::write_echo() const {
  nlohmann::ordered_json j;
  j["config"] = nlohmann::ordered_json::parse(to_config_json(config_));
  j["version"] = version_string();
  j["git_revision"] = git_revision();
  j["started_utc"] = started_utc_;
  j["finished_utc"] = finished() ? utc_now() : "";
  j["wall_seconds"] = wall_seconds_;
  j["chunks_completed"] = next_chunk_;
  write_file_atomic(out_path("config.echo.json"), j.dump(2) + "\n");
}

ExperimentLog Experiment::log() const {
  ExperimentLog out;
  out.config = config_;
  out.rows = rows_;
  out.baseline = baseline_;
  out.version = version_string();
  out.git_revision = git_revision();
  out.started_utc = started_utc_;
  out.finished_utc = finished() ? utc_now() : "";
  out.wall_seconds = wall_seconds_;
  return out;
}

ExperimentLog run_stream(const ExperimentConfig& config, std::shared_ptr<const JudgeClient> judge) {
  Experiment exp(config, std::move(judge));
  try {
    exp.run();
  } catch (...) {
    try {
      exp.flush_log();
    } catch (...) {
    }
    throw;
  }
  return exp.log();
}

}  // namespace sllab
