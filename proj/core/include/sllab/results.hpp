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

// Long-format run log (one row per chunk and evaluated domain), its CSV
// forms, and the views derived from it.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sllab {

struct MetricsRow {
  std::uint64_t chunk = 0;
  std::string trained_domain;
  std::string eval_domain;
  double perplexity = 0.0;
  double avg_loss = 0.0;
  double similarity = 0.0;
  double judge_rating = 0.0;
  double time_per_step_s = 0.0;
  std::uint64_t steps = 0;

  bool operator==(const MetricsRow&) const = default;
};

// Equality with the wall-clock column ignored.
bool same_except_timing(const MetricsRow& a, const MetricsRow& b);
bool same_except_timing(const std::vector<MetricsRow>& a, const std::vector<MetricsRow>& b);

inline constexpr std::string_view kLogHeader =
    "chunk,trained_domain,eval_domain,perplexity,avg_loss,similarity,judge_rating,"
    "time_per_step_s,steps";

std::string to_log_csv(const std::vector<MetricsRow>& rows);
// Throws ParseError with the line number on a malformed log.
std::vector<MetricsRow> parse_log_csv(std::string_view text);
std::vector<MetricsRow> read_log_csv(const std::filesystem::path& path);

enum class SeriesMetric { kPerplexity, kSimilarity, kRating };

// Eval domains in order of first appearance.
std::vector<std::string> eval_domains(const std::vector<MetricsRow>& rows);
// One row per chunk, one column per eval domain.
std::string series_csv(const std::vector<MetricsRow>& rows, SeriesMetric metric);

// Chunks at which `domain` was trained, ascending.
std::vector<std::uint64_t> training_chunks(const std::vector<MetricsRow>& rows,
                                           const std::string& domain);
const MetricsRow& find_row(const std::vector<MetricsRow>& rows, std::uint64_t chunk,
                           const std::string& eval_domain);

// ln ppl(domain) evaluated right before its second training chunk minus
// ln ppl(domain) right after its first. Throws ContractError if the domain
// was trained fewer than twice.
double forgetting_delta(const std::vector<MetricsRow>& rows, const std::string& domain);

// Similarity of `domain` at its second training chunk.
double revisit_similarity(const std::vector<MetricsRow>& rows, const std::string& domain);

// Table 1: chunk, trained domain, perplexity, avg loss, time per step.
std::string render_table1(const std::vector<MetricsRow>& rows);
// Tables 2 and 3: chunk x domain matrices of similarity / judge rating. An
// empty chunk list means {0, 3, 5}; chunks missing from the log are skipped.
std::string render_table2(const std::vector<MetricsRow>& rows,
                          std::vector<std::uint64_t> chunks = {});
std::string render_table3(const std::vector<MetricsRow>& rows,
                          std::vector<std::uint64_t> chunks = {});

}  // namespace sllab
