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

#include "sllab/stream.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sllab/binary_io.hpp"
#include "sllab/errors.hpp"

namespace sllab {

namespace {

QARecord parse_record(const std::string& line, std::size_t line_no) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
  }
  if (!obj.is_object()) throw ParseError("expected a JSON object", line_no);
  for (const auto& item : obj.items()) {
    if (item.key() != "domain" && item.key() != "question" && item.key() != "answer") {
      throw ParseError("unknown key \"" + item.key() + "\"", line_no);
    }
  }
  QARecord rec;
  for (const char* key : {"domain", "question", "answer"}) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(std::string("missing key \"") + key + "\"", line_no);
    if (!it->is_string()) throw ParseError(std::string("key \"") + key + "\" must be a string", line_no);
    const std::string value = it->get<std::string>();
    if (value.empty()) throw ParseError(std::string("key \"") + key + "\" is empty", line_no);
    if (std::string_view(key) == "domain") rec.domain = value;
    else if (std::string_view(key) == "question") rec.question = value;
    else rec.answer = value;
  }
  return rec;
}

}  // namespace

std::vector<QARecord> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus " + path.string());
  std::vector<QARecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    QARecord rec = parse_record(line, line_no);
    rec.id = records.size();
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw CorpusError("corpus " + path.string() + " is empty");
  return records;
}

void save_corpus(const std::filesystem::path& path, const std::vector<QARecord>& records) {
  std::string out;
  for (const QARecord& rec : records) {
    nlohmann::ordered_json obj;
    obj["domain"] = rec.domain;
    obj["question"] = rec.question;
    obj["answer"] = rec.answer;
    out += obj.dump();
    out += '\n';
  }
  write_file_atomic(path, out);
}

Schedule make_schedule(const std::vector<std::string>& domains, const CorpusMap& pools,
                       std::size_t rounds, std::size_t chunk_size) {
  if (domains.empty()) throw ScheduleError("schedule needs at least one domain");
  if (rounds < 1) throw ScheduleError("rounds must be >= 1");
  if (chunk_size < 1) throw ScheduleError("chunk_size must be >= 1");
  std::map<std::string, std::size_t> cursor;
  Schedule schedule;
  const std::size_t total = rounds * domains.size();
  for (std::size_t k = 0; k < total; ++k) {
    const std::string& domain = domains[k % domains.size()];
    auto pool = pools.find(domain);
    if (pool == pools.end()) throw ScheduleError("no corpus for domain " + domain);
    std::size_t& next = cursor[domain];
    const std::size_t left = pool->second.size() - next;
    if (left < chunk_size) {
      throw ScheduleError("domain " + domain + " exhausted at chunk " + std::to_string(k) +
                          ": " + std::to_string(left) + " records left, " +
                          std::to_string(chunk_size) + " needed");
    }
    Chunk chunk;
    chunk.index = k;
    chunk.domain = domain;
    chunk.records.assign(pool->second.begin() + static_cast<std::ptrdiff_t>(next),
                         pool->second.begin() + static_cast<std::ptrdiff_t>(next + chunk_size));
    next += chunk_size;
    schedule.push_back(std::move(chunk));
  }
  return schedule;
}

std::size_t replay_capacity(double buffer_ratio, std::size_t chunk_size) {
  if (!(buffer_ratio >= 0.0)) throw ConfigError("buffer_ratio must be >= 0");
  return static_cast<std::size_t>(std::ceil(buffer_ratio * static_cast<double>(chunk_size)));
}

ReplayBuffer::ReplayBuffer(std::size_t capacity_per_domain, std::uint64_t seed)
    : capacity_(capacity_per_domain), rng_(seed) {}

void ReplayBuffer::update(const Chunk& chunk) {
  for (const QARecord& rec : chunk.records) offer(rec);
}

void ReplayBuffer::offer(const QARecord& record) {
  const std::size_t n = ++seen_[record.domain];
  std::vector<QARecord>& reservoir = reservoirs_[record.domain];
  if (reservoir.size() < capacity_) {
    reservoir.push_back(record);
    return;
  }
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const std::size_t j = pick(rng_);
  if (j < capacity_) reservoir[j] = record;
}

std::size_t ReplayBuffer::seen(const std::string& domain) const {
  auto it = seen_.find(domain);
  return it == seen_.end() ? 0 : it->second;
}

std::size_t ReplayBuffer::size() const {
  std::size_t n = 0;
  for (const auto& [domain, reservoir] : reservoirs_) n += reservoir.size();
  return n;
}

std::string ReplayBuffer::serialize() const {
  ByteWriter w;
  w.u64(capacity_);
  w.u64(reservoirs_.size());
  for (const auto& [domain, reservoir] : reservoirs_) {
    w.str(domain);
    w.u64(seen(domain));
    w.u64(reservoir.size());
    for (const QARecord& rec : reservoir) {
      w.str(rec.domain);
      w.str(rec.question);
      w.str(rec.answer);
      w.u64(rec.id);
    }
  }
  std::ostringstream rng_state;
  rng_state << rng_;
  w.str(rng_state.str());
  return w.take();
}

ReplayBuffer ReplayBuffer::deserialize(const std::string& bytes) {
  ByteReader r(bytes);
  ReplayBuffer buf;
  buf.capacity_ = r.u64();
  const std::uint64_t domains = r.u64();
  for (std::uint64_t d = 0; d < domains; ++d) {
    const std::string domain = r.str();
    buf.seen_[domain] = r.u64();
    const std::uint64_t n = r.u64();
    std::vector<QARecord>& reservoir = buf.reservoirs_[domain];
    for (std::uint64_t i = 0; i < n; ++i) {
      QARecord rec;
      rec.domain = r.str();
      rec.question = r.str();
      rec.answer = r.str();
      rec.id = r.u64();
      reservoir.push_back(std::move(rec));
    }
  }
  std::istringstream rng_state(r.str());
  rng_state >> buf.rng_;
  if (!rng_state) throw CheckpointError("replay buffer: corrupt rng state");
  if (!r.done()) throw CheckpointError("replay buffer: trailing bytes");
  return buf;
}

bool ReplayBuffer::operator==(const ReplayBuffer& other) const {
  return capacity_ == other.capacity_ && reservoirs_ == other.reservoirs_ &&
         seen_ == other.seen_ && rng_ == other.rng_;
}

std::vector<QARecord> compose_batch(const Chunk& chunk, const ReplayBuffer& buffer,
                                    double replay_fraction, Rng& rng) {
  if (!(replay_fraction >= 0.0 && replay_fraction <= 1.0)) {
    throw ConfigError("replay_fraction must lie in [0, 1]");
  }
  std::vector<QARecord> batch = chunk.records;
  const auto wanted = static_cast<std::size_t>(
      std::ceil(replay_fraction * static_cast<double>(chunk.records.size())));
  if (wanted == 0) return batch;

  std::vector<const QARecord*> candidates;
  for (const auto& [domain, reservoir] : buffer.reservoirs()) {
    if (domain == chunk.domain) continue;
    for (const QARecord& rec : reservoir) candidates.push_back(&rec);
  }
  if (candidates.empty()) {
    auto own = buffer.reservoirs().find(chunk.domain);
    if (own != buffer.reservoirs().end()) {
      for (const QARecord& rec : own->second) candidates.push_back(&rec);
    }
  }
  const std::size_t take = std::min(wanted, candidates.size());
  // Partial Fisher-Yates: the first `take` slots end up a uniform sample.
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, candidates.size() - 1);
    std::swap(candidates[i], candidates[pick(rng)]);
    batch.push_back(*candidates[i]);
  }
  return batch;
}

}  // namespace sllab
