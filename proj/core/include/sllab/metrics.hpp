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

// Evaluation signals: held-out perplexity, drift of greedy answers against a
// frozen baseline, and 1-10 judge ratings.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sllab/lora.hpp"
#include "sllab/stream.hpp"

namespace sllab {

struct EvalSet {
  std::string domain;
  std::vector<QARecord> prompts;
};

struct PerplexityResult {
  double perplexity = 0.0;
  double avg_loss = 0.0;
  std::size_t tokens = 0;
};

// Token-weighted mean NLL over formatted "Q: ...\nA: ..." texts;
// perplexity is exp(avg_loss). Throws ContractError on an empty set.
PerplexityResult perplexity(const AdaptedModel& model, const EvalSet& eval_set,
                            std::size_t threads = 1);

// Unit-norm mean of the frozen base token-embedding rows of the text's bytes.
std::vector<double> embed(std::string_view text, const Model& base);

double cosine_similarity(std::span<const double> u, std::span<const double> v);

// Strips surrounding ASCII whitespace from a generated answer.
std::string trim_answer(std::string_view text);

// Trimmed greedy answers to every prompt, in prompt order.
std::vector<std::string> answer_prompts(const AdaptedModel& model, const EvalSet& eval_set,
                                        int max_new, std::size_t threads = 1);

struct BaselineEntry {
  std::string domain;
  std::uint64_t id = 0;
  std::string question;
  std::string answer;
  std::vector<double> embedding;  // empty when the answer is empty

  bool operator==(const BaselineEntry&) const = default;
};

class BaselineSnapshot {
 public:
  BaselineSnapshot() = default;
  explicit BaselineSnapshot(std::vector<BaselineEntry> entries);

  const std::vector<BaselineEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  // Throws ContractError when the prompt was never captured.
  const BaselineEntry& find(const std::string& domain, std::uint64_t id) const;

  std::string serialize() const;
  static BaselineSnapshot deserialize(std::string_view bytes);
  void save(const std::filesystem::path& path) const;
  static BaselineSnapshot load(const std::filesystem::path& path);

  bool operator==(const BaselineSnapshot&) const = default;

 private:
  std::vector<BaselineEntry> entries_;
};

// Snapshot from answers already generated for each eval set, in set order.
BaselineSnapshot make_baseline(const Model& base, const std::vector<EvalSet>& eval_sets,
                               const std::vector<std::vector<std::string>>& answers);
BaselineSnapshot capture_baseline(const AdaptedModel& model, const std::vector<EvalSet>& eval_sets,
                                  int max_new, std::size_t threads = 1);

// Cosine of one answer against its baseline entry. An empty answer scores 0,
// or 1 when the baseline answer is empty too.
double answer_similarity(const std::string& answer, const BaselineEntry& baseline,
                         const Model& base);

// Mean answer_similarity over prompts for already generated answers.
double drift_similarity(const Model& base, const BaselineSnapshot& snapshot,
                        const EvalSet& eval_set, const std::vector<std::string>& answers);
double drift_similarity(const AdaptedModel& model, const BaselineSnapshot& snapshot,
                        const EvalSet& eval_set, int max_new, std::size_t threads = 1);

struct JudgeVerdict {
  int rating = 1;
  std::string rationale;
};

class JudgeClient {
 public:
  virtual ~JudgeClient() = default;
  // Must be safe to call from several threads at once.
  virtual JudgeVerdict rate(const std::string& question, const std::string& answer,
                            const std::string& baseline) const = 0;
};

// Jaccard index of the whitespace-separated token sets; 1 when both are empty.
double token_jaccard(std::string_view a, std::string_view b);

// Empty answer -> 1, exact match -> 10, else clamp(1 + round(9 J), 1, 10).
class MockJudge final : public JudgeClient {
 public:
  JudgeVerdict rate(const std::string& question, const std::string& answer,
                    const std::string& baseline) const override;
};

// POST {base_url}/rate with {"question","answer","baseline"}; expects
// {"rating": 1..10, "rationale": optional}. Throws JudgeError otherwise.
class HttpJudge final : public JudgeClient {
 public:
  explicit HttpJudge(std::string base_url, double timeout_s = 30.0);
  JudgeVerdict rate(const std::string& question, const std::string& answer,
                    const std::string& baseline) const override;

 private:
  std::string base_url_;
  double timeout_s_;
};

JudgeVerdict judge_rate(const JudgeClient& judge, const std::string& question,
                        const std::string& answer, const std::string& baseline_answer);

// Mean rating over prompts. At most `threads` requests are in flight.
double judge_score(const JudgeClient& judge, const BaselineSnapshot& snapshot,
                   const EvalSet& eval_set, const std::vector<std::string>& answers,
                   std::size_t threads = 1);

// Runs fn(i) for i in [0, n) on up to `threads` workers; rethrows the first
// failure by index after all workers join.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

}  // namespace sllab
