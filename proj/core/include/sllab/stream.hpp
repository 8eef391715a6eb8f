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

// Domain corpora, the round-robin chunk schedule, and the replay buffer.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace sllab {

using Rng = std::mt19937_64;

struct QARecord {
  std::string domain;
  std::string question;
  std::string answer;
  std::uint64_t id = 0;

  bool operator==(const QARecord&) const = default;
};

struct Chunk {
  std::size_t index = 0;
  std::string domain;
  std::vector<QARecord> records;
};

using Schedule = std::vector<Chunk>;
using CorpusMap = std::map<std::string, std::vector<QARecord>>;

// JSON Lines with exactly the keys "domain", "question", "answer". Ids are
// assigned 0..n-1 in file order. Throws ParseError (with the line number),
// CorpusError for an empty file, IoError when unreadable.
std::vector<QARecord> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const std::vector<QARecord>& records);

// Chunk k trains on domains[k % domains.size()], taking the next chunk_size
// unseen records of that domain in corpus order. Throws ScheduleError when a
// domain runs out before the schedule ends.
Schedule make_schedule(const std::vector<std::string>& domains, const CorpusMap& pools,
                       std::size_t rounds, std::size_t chunk_size);

std::size_t replay_capacity(double buffer_ratio, std::size_t chunk_size);

// Per-domain reservoirs (Algorithm R) over everything streamed so far.
class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  ReplayBuffer(std::size_t capacity_per_domain, std::uint64_t seed);

  // Offers every record of an already-trained chunk to its domain reservoir.
  void update(const Chunk& chunk);
  void offer(const QARecord& record);

  std::size_t capacity_per_domain() const { return capacity_; }
  const std::map<std::string, std::vector<QARecord>>& reservoirs() const { return reservoirs_; }
  std::size_t seen(const std::string& domain) const;
  std::size_t size() const;
  bool empty() const { return size() == 0; }

  // Binary state for checkpoints (includes the rng).
  std::string serialize() const;
  static ReplayBuffer deserialize(const std::string& bytes);

  bool operator==(const ReplayBuffer& other) const;

 private:
  std::size_t capacity_ = 0;
  std::map<std::string, std::vector<QARecord>> reservoirs_;
  std::map<std::string, std::size_t> seen_;
  Rng rng_;
};

// All chunk records, then ceil(replay_fraction * |chunk|) records drawn
// without replacement from the other domains' reservoirs (the chunk's own
// domain when those are empty, nothing when both are).
std::vector<QARecord> compose_batch(const Chunk& chunk, const ReplayBuffer& buffer,
                                    double replay_fraction, Rng& rng);

}  // namespace sllab
