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

#include "sllab/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "sllab/binary_io.hpp"
#include "sllab/errors.hpp"

namespace sllab {

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

PerplexityResult perplexity(const AdaptedModel& model, const EvalSet& eval_set,
                            std::size_t threads) {
  if (eval_set.prompts.empty()) {
    throw ContractError("perplexity: empty eval set for domain '" + eval_set.domain + "'");
  }
  std::vector<NllTotal> parts(eval_set.prompts.size());
  parallel_for(parts.size(), threads, [&](std::size_t i) {
    const QARecord& r = eval_set.prompts[i];
    parts[i] = nll_total(model, format_training_text(r.question, r.answer));
  });
  double sum = 0.0;
  std::size_t tokens = 0;
  for (const NllTotal& p : parts) {
    sum += p.sum;
    tokens += p.tokens;
  }
  PerplexityResult out;
  out.avg_loss = sum / static_cast<double>(tokens);
  out.perplexity = std::exp(out.avg_loss);
  out.tokens = tokens;
  return out;
}

std::vector<double> embed(std::string_view text, const Model& base) {
  if (text.empty()) throw ContractError("embed: empty text");
  const Tensor& table = base.token_embedding();
  const std::size_t d = table.cols();
  const auto rows = table.data();
  std::vector<double> v(d, 0.0);
  for (char c : text) {
    const std::size_t id = static_cast<unsigned char>(c);
    for (std::size_t j = 0; j < d; ++j) v[j] += rows[id * d + j];
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (!(norm > 0.0)) throw NumericError("embed: zero-norm embedding");
  for (double& x : v) x /= norm;
  return v;
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ShapeError("cosine_similarity: length " + std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()));
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) dot += u[i] * v[i];
  return std::clamp(dot, -1.0, 1.0);
}

std::string trim_answer(std::string_view text) {
  auto space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!text.empty() && space(text.front())) text.remove_prefix(1);
  while (!text.empty() && space(text.back())) text.remove_suffix(1);
  return std::string(text);
}

std::vector<std::string> answer_prompts(const AdaptedModel& model, const EvalSet& eval_set,
                                        int max_new, std::size_t threads) {
  std::vector<std::string> answers(eval_set.prompts.size());
  parallel_for(answers.size(), threads, [&](std::size_t i) {
    answers[i] = trim_answer(
        generate_greedy(model, format_prompt(eval_set.prompts[i].question), max_new));
  });
  return answers;
}

BaselineSnapshot::BaselineSnapshot(std::vector<BaselineEntry> entries)
    : entries_(std::move(entries)) {}

const BaselineEntry& BaselineSnapshot::find(const std::string& domain, std::uint64_t id) const {
  for (const BaselineEntry& e : entries_) {
    if (e.id == id && e.domain == domain) return e;
  }
  throw ContractError("baseline snapshot has no entry for " + domain + " prompt " +
                      std::to_string(id));
}

namespace {
constexpr std::string_view kBaselineMagic = "SLBASE1";
}

std::string BaselineSnapshot::serialize() const {
  ByteWriter w;
  w.bytes(kBaselineMagic);
  w.u64(entries_.size());
  for (const BaselineEntry& e : entries_) {
    w.str(e.domain);
    w.u64(e.id);
    w.str(e.question);
    w.str(e.answer);
    w.u64(e.embedding.size());
    w.f64s(e.embedding);
  }
  return w.take();
}

BaselineSnapshot BaselineSnapshot::deserialize(std::string_view bytes) {
  ByteReader r(bytes);
  if (r.remaining() < kBaselineMagic.size() || r.bytes(kBaselineMagic.size()) != kBaselineMagic) {
    throw CheckpointError("baseline: bad magic");
  }
  const std::uint64_t n = r.u64();
  std::vector<BaselineEntry> entries;
  for (std::uint64_t i = 0; i < n; ++i) {
    BaselineEntry e;
    e.domain = r.str();
    e.id = r.u64();
    e.question = r.str();
    e.answer = r.str();
    const std::uint64_t d = r.u64();
    if (d > r.remaining() / 8) throw CheckpointError("truncated data");
    e.embedding.resize(static_cast<std::size_t>(d));
    r.f64s(e.embedding);
    entries.push_back(std::move(e));
  }
  if (!r.done()) throw CheckpointError("baseline: trailing bytes");
  return BaselineSnapshot(std::move(entries));
}

void BaselineSnapshot::save(const std::filesystem::path& path) const {
  write_file_atomic(path, serialize());
}

BaselineSnapshot BaselineSnapshot::load(const std::filesystem::path& path) {
  return deserialize(read_file(path));
}

BaselineSnapshot make_baseline(const Model& base, const std::vector<EvalSet>& eval_sets,
                               const std::vector<std::vector<std::string>>& answers) {
  if (answers.size() != eval_sets.size()) throw ContractError("make_baseline: answer sets mismatch");
  std::vector<BaselineEntry> entries;
  for (std::size_t s = 0; s < eval_sets.size(); ++s) {
    const EvalSet& set = eval_sets[s];
    if (answers[s].size() != set.prompts.size()) {
      throw ContractError("make_baseline: answer count does not match prompts");
    }
    for (std::size_t i = 0; i < set.prompts.size(); ++i) {
      const QARecord& r = set.prompts[i];
      BaselineEntry e{set.domain, r.id, r.question, answers[s][i], {}};
      if (!e.answer.empty()) e.embedding = embed(e.answer, base);
      entries.push_back(std::move(e));
    }
  }
  return BaselineSnapshot(std::move(entries));
}

BaselineSnapshot capture_baseline(const AdaptedModel& model, const std::vector<EvalSet>& eval_sets,
                                  int max_new, std::size_t threads) {
  std::vector<std::vector<std::string>> answers;
  for (const EvalSet& set : eval_sets) answers.push_back(answer_prompts(model, set, max_new, threads));
  return make_baseline(model.base(), eval_sets, answers);
}

double answer_similarity(const std::string& answer, const BaselineEntry& baseline,
                         const Model& base) {
  if (answer.empty() || baseline.answer.empty()) {
    return answer.empty() && baseline.answer.empty() ? 1.0 : 0.0;
  }
  return cosine_similarity(embed(answer, base), baseline.embedding);
}

double drift_similarity(const Model& base, const BaselineSnapshot& snapshot,
                        const EvalSet& eval_set, const std::vector<std::string>& answers) {
  if (eval_set.prompts.empty()) throw ContractError("drift_similarity: empty eval set");
  if (answers.size() != eval_set.prompts.size()) {
    throw ContractError("drift_similarity: answer count does not match prompts");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < answers.size(); ++i) {
    const QARecord& r = eval_set.prompts[i];
    total += answer_similarity(answers[i], snapshot.find(eval_set.domain, r.id), base);
  }
  return total / static_cast<double>(answers.size());
}

double drift_similarity(const AdaptedModel& model, const BaselineSnapshot& snapshot,
                        const EvalSet& eval_set, int max_new, std::size_t threads) {
  return drift_similarity(model.base(), snapshot, eval_set,
                          answer_prompts(model, eval_set, max_new, threads));
}

namespace {

std::set<std::string_view> whitespace_tokens(std::string_view s) {
  std::set<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.insert(s.substr(i, j - i));
    i = j;
  }
  return out;
}

void check_rating(int rating) {
  if (rating < 1 || rating > 10) {
    throw JudgeError("judge rating " + std::to_string(rating) + " outside 1..10");
  }
}

}  // namespace

double token_jaccard(std::string_view a, std::string_view b) {
  const auto ta = whitespace_tokens(a);
  const auto tb = whitespace_tokens(b);
  if (ta.empty() && tb.empty()) return 1.0;
  std::size_t common = 0;
  for (std::string_view t : ta) common += tb.count(t);
  return static_cast<double>(common) / static_cast<double>(ta.size() + tb.size() - common);
}

JudgeVerdict MockJudge::rate(const std::string&, const std::string& answer,
                             const std::string& baseline) const {
  if (trim_answer(answer).empty()) return {1, "empty answer"};
  if (answer == baseline) return {10, "matches baseline"};
  const double j = token_jaccard(answer, baseline);
  const int rating = std::clamp(1 + static_cast<int>(std::lround(9.0 * j)), 1, 10);
  return {rating, "token jaccard " + std::to_string(j)};
}

HttpJudge::HttpJudge(std::string base_url, double timeout_s)
    : base_url_(std::move(base_url)), timeout_s_(timeout_s) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
  if (base_url_.empty()) throw ConfigError("judge url is empty");
}

JudgeVerdict HttpJudge::rate(const std::string& question, const std::string& answer,
                             const std::string& baseline) const {
  httplib::Client client(base_url_);
  if (!client.is_valid()) throw JudgeError("judge url not usable: " + base_url_);
  const auto secs = static_cast<time_t>(timeout_s_);
  const auto usecs = static_cast<time_t>((timeout_s_ - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  const nlohmann::json body = {{"question", question}, {"answer", answer}, {"baseline", baseline}};
  const httplib::Result res = client.Post("/rate", body.dump(), "application/json");
  if (!res) {
    throw JudgeError("judge request to " + base_url_ + "/rate failed: " +
                     httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw JudgeError("judge returned HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  JudgeVerdict verdict;
  try {
    const nlohmann::json reply = nlohmann::json::parse(res->body);
    const nlohmann::json& rating = reply.at("rating");
    if (!rating.is_number_integer()) throw JudgeError("judge rating is not an integer");
    verdict.rating = rating.get<int>();
    if (reply.contains("rationale") && reply["rationale"].is_string()) {
      verdict.rationale = reply["rationale"].get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw JudgeError(std::string("judge reply is not valid: ") + e.what());
  }
  check_rating(verdict.rating);
  return verdict;
}

JudgeVerdict judge_rate(const JudgeClient& judge, const std::string& question,
                        const std::string& answer, const std::string& baseline_answer) {
  if (question.empty()) throw ContractError("judge_rate: empty question");
  JudgeVerdict v = judge.rate(question, answer, baseline_answer);
  check_rating(v.rating);
  return v;
}

double judge_score(const JudgeClient& judge, const BaselineSnapshot& snapshot,
                   const EvalSet& eval_set, const std::vector<std::string>& answers,
                   std::size_t threads) {
  if (eval_set.prompts.empty()) throw ContractError("judge_score: empty eval set");
  if (answers.size() != eval_set.prompts.size()) {
    throw ContractError("judge_score: answer count does not match prompts");
  }
  std::vector<int> ratings(answers.size());
  parallel_for(answers.size(), threads, [&](std::size_t i) {
    const QARecord& r = eval_set.prompts[i];
    ratings[i] = judge_rate(judge, r.question, answers[i],
                            snapshot.find(eval_set.domain, r.id).answer).rating;
  });
  double total = 0.0;
  for (int r : ratings) total += r;
  return total / static_cast<double>(ratings.size());
}

}  // namespace sllab
