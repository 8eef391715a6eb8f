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

// The streaming protocol: warm up a base, attach adapters, then for every
// scheduled chunk compose a batch, train, update the replay buffer, evaluate
// all domains and log. The baseline snapshot is taken once, after chunk 0.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "sllab/config.hpp"
#include "sllab/metrics.hpp"
#include "sllab/results.hpp"
#include "sllab/stream.hpp"
#include "sllab/training.hpp"

namespace sllab {

const char* version_string();
const char* git_revision();

// Corpora cut into the schedule, held-out eval sets (the last eval_set_size
// records of each domain) and the warm-up pool (everything in between).
struct StreamData {
  Schedule schedule;
  std::vector<EvalSet> eval_sets;
  std::vector<QARecord> warmup_pool;
};

// Throws CorpusError / ParseError / IoError / ScheduleError on bad data.
StreamData prepare_stream(const ExperimentConfig& config);

// init_model from the experiment seed, then the configured warm-up.
Model build_base(const ExperimentConfig& config, const StreamData& data);

// FNV-1a over the raw bytes of every parameter, in declaration order.
std::uint64_t parameter_hash(const Model& model);
std::uint64_t parameter_hash(const AdaptedModel& model);

struct ExperimentLog {
  ExperimentConfig config;
  std::vector<MetricsRow> rows;
  BaselineSnapshot baseline;
  std::string version;
  std::string git_revision;
  std::string started_utc;
  std::string finished_utc;
  double wall_seconds = 0.0;
};

class Experiment {
 public:
  // An empty judge means the mock judge.
  explicit Experiment(ExperimentConfig config, std::shared_ptr<const JudgeClient> judge = nullptr);
  // Reuses an already warmed-up base (its config must match).
  Experiment(ExperimentConfig config, const Model& base,
             std::shared_ptr<const JudgeClient> judge = nullptr);
  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;

  // Restores the state saved by checkpoint_bytes(). A non-empty output_dir
  // replaces the stored one.
  static std::unique_ptr<Experiment> resume(const std::filesystem::path& checkpoint,
                                            const std::string& output_dir = {},
                                            std::shared_ptr<const JudgeClient> judge = nullptr);

  const ExperimentConfig& config() const { return config_; }
  const StreamData& data() const { return data_; }
  const AdaptedModel& model() const { return model_; }
  const ReplayBuffer& buffer() const { return buffer_; }
  const BaselineSnapshot& baseline() const { return baseline_; }
  bool has_baseline() const { return !baseline_.empty(); }
  const std::vector<MetricsRow>& rows() const { return rows_; }
  std::size_t next_chunk() const { return next_chunk_; }
  bool finished() const { return next_chunk_ >= data_.schedule.size(); }

  // Trains and evaluates the next scheduled chunk, then writes outputs.
  void run_chunk();
  // Runs chunks until `stop_before` (default: the end of the schedule).
  void run(std::size_t stop_before = static_cast<std::size_t>(-1));

  std::string checkpoint_bytes() const;
  void save_checkpoint(const std::filesystem::path& path) const;

  // Rewrites log.csv and the series files from the rows so far.
  void flush_log() const;
  ExperimentLog log() const;

 private:
  // A null base is built with build_base().
  Experiment(ExperimentConfig config, StreamData data, const Model* base,
             std::shared_ptr<const JudgeClient> judge);
  void evaluate(const Chunk& chunk, const TrainResult& train);
  void write_echo() const;
  std::filesystem::path out_path(const std::string& name) const;

  ExperimentConfig config_;
  StreamData data_;
  std::shared_ptr<const JudgeClient> judge_;
  AdaptedModel model_;
  Adam optimizer_;
  ReplayBuffer buffer_;
  Rng rng_;
  BaselineSnapshot baseline_;
  std::vector<MetricsRow> rows_;
  std::size_t next_chunk_ = 0;
  std::string started_utc_;
  double wall_seconds_ = 0.0;
};

// Runs the whole schedule. On failure the partial log is flushed before the
// error propagates.
ExperimentLog run_stream(const ExperimentConfig& config,
                         std::shared_ptr<const JudgeClient> judge = nullptr);

}  // namespace sllab
