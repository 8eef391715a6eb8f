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

#include "sllab/results.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "sllab/binary_io.hpp"
#include "sllab/errors.hpp"

namespace sllab {

bool same_except_timing(const MetricsRow& a, const MetricsRow& b) {
  MetricsRow x = a;
  x.time_per_step_s = b.time_per_step_s;
  return x == b;
}

bool same_except_timing(const std::vector<MetricsRow>& a, const std::vector<MetricsRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!same_except_timing(a[i], b[i])) return false;
  }
  return true;
}

namespace {

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::string exact(double v) { return fmt("%.17g", v); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

template <typename T>
T parse_number(const std::string& s, std::size_t line, const char* column) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(std::string("log: bad ") + column + " '" + s + "'",
                     line);
  }
  return v;
}

double metric_of(const MetricsRow& r, SeriesMetric m) {
  switch (m) {
    case SeriesMetric::kPerplexity: return r.perplexity;
    case SeriesMetric::kSimilarity: return r.similarity;
    case SeriesMetric::kRating: return r.judge_rating;
  }
  return 0.0;
}

std::vector<std::uint64_t> chunk_list(const std::vector<MetricsRow>& rows) {
  std::vector<std::uint64_t> chunks;
  for (const MetricsRow& r : rows) {
    if (chunks.empty() || chunks.back() != r.chunk) chunks.push_back(r.chunk);
  }
  return chunks;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string render_grid(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> widths;
  for (const auto& row : cells) {
    widths.resize(std::max(widths.size(), row.size()), 0);
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
  }
  std::string out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    std::string line;
    for (std::size_t i = 0; i < cells[r].size(); ++i) {
      if (i > 0) line += "  ";
      line += pad(cells[r][i], widths[i]);
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + '\n';
    if (r == 0) {
      std::size_t total = 0;
      for (std::size_t w : widths) total += w;
      out += std::string(total + 2 * (widths.size() - 1), '-') + '\n';
    }
  }
  return out;
}

std::string render_matrix(const std::vector<MetricsRow>& rows, std::vector<std::uint64_t> chunks,
                          SeriesMetric metric, const char* spec) {
  if (chunks.empty()) chunks = {0, 3, 5};
  const std::vector<std::string> domains = eval_domains(rows);
  const std::vector<std::uint64_t> present = chunk_list(rows);
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header = {"chunk"};
  header.insert(header.end(), domains.begin(), domains.end());
  cells.push_back(header);
  for (std::uint64_t c : chunks) {
    if (std::find(present.begin(), present.end(), c) == present.end()) continue;
    std::vector<std::string> line = {std::to_string(c)};
    for (const std::string& d : domains) line.push_back(fmt(spec, metric_of(find_row(rows, c, d), metric)));
    cells.push_back(std::move(line));
  }
  return render_grid(cells);
}

}  // namespace

std::string to_log_csv(const std::vector<MetricsRow>& rows) {
  std::string out(kLogHeader);
  out += '\n';
  for (const MetricsRow& r : rows) {
    out += std::to_string(r.chunk) + ',' + r.trained_domain + ',' + r.eval_domain + ',' +
           exact(r.perplexity) + ',' + exact(r.avg_loss) + ',' + exact(r.similarity) + ',' +
           exact(r.judge_rating) + ',' + exact(r.time_per_step_s) + ',' +
           std::to_string(r.steps) + '\n';
  }
  return out;
}

std::vector<MetricsRow> parse_log_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("log is empty", 1);
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kLogHeader) throw ParseError("log: unexpected header", 1);
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv_line(line);
    if (f.size() != 9) {
      throw ParseError("log: expected 9 fields, got " +
                           std::to_string(f.size()),
                       line_no);
    }
    MetricsRow r;
    r.chunk = parse_number<std::uint64_t>(f[0], line_no, "chunk");
    r.trained_domain = f[1];
    r.eval_domain = f[2];
    r.perplexity = parse_number<double>(f[3], line_no, "perplexity");
    r.avg_loss = parse_number<double>(f[4], line_no, "avg_loss");
    r.similarity = parse_number<double>(f[5], line_no, "similarity");
    r.judge_rating = parse_number<double>(f[6], line_no, "judge_rating");
    r.time_per_step_s = parse_number<double>(f[7], line_no, "time_per_step_s");
    r.steps = parse_number<std::uint64_t>(f[8], line_no, "steps");
    if (r.trained_domain.empty() || r.eval_domain.empty()) {
      throw ParseError("log: empty domain", line_no);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<MetricsRow> read_log_csv(const std::filesystem::path& path) {
  return parse_log_csv(read_file(path));
}

std::vector<std::string> eval_domains(const std::vector<MetricsRow>& rows) {
  std::vector<std::string> out;
  for (const MetricsRow& r : rows) {
    if (std::find(out.begin(), out.end(), r.eval_domain) == out.end()) out.push_back(r.eval_domain);
  }
  return out;
}

std::string series_csv(const std::vector<MetricsRow>& rows, SeriesMetric metric) {
  const std::vector<std::string> domains = eval_domains(rows);
  std::string out = "chunk";
  for (const std::string& d : domains) out += ',' + d;
  out += '\n';
  for (std::uint64_t c : chunk_list(rows)) {
    out += std::to_string(c);
    for (const std::string& d : domains) out += ',' + exact(metric_of(find_row(rows, c, d), metric));
    out += '\n';
  }
  return out;
}

std::vector<std::uint64_t> training_chunks(const std::vector<MetricsRow>& rows,
                                           const std::string& domain) {
  std::vector<std::uint64_t> out;
  for (const MetricsRow& r : rows) {
    if (r.trained_domain == domain && (out.empty() || out.back() != r.chunk)) out.push_back(r.chunk);
  }
  return out;
}

const MetricsRow& find_row(const std::vector<MetricsRow>& rows, std::uint64_t chunk,
                           const std::string& eval_domain) {
  for (const MetricsRow& r : rows) {
    if (r.chunk == chunk && r.eval_domain == eval_domain) return r;
  }
  throw ContractError("log has no row for chunk " + std::to_string(chunk) + " domain " +
                      eval_domain);
}

double forgetting_delta(const std::vector<MetricsRow>& rows, const std::string& domain) {
  const std::vector<std::uint64_t> trained = training_chunks(rows, domain);
  if (trained.size() < 2) {
    throw ContractError("forgetting_delta: domain '" + domain + "' was trained " +
                        std::to_string(trained.size()) + " time(s); need at least 2");
  }
  const double after_first = find_row(rows, trained[0], domain).perplexity;
  const double before_second = find_row(rows, trained[1] - 1, domain).perplexity;
  return std::log(before_second) - std::log(after_first);
}

double revisit_similarity(const std::vector<MetricsRow>& rows, const std::string& domain) {
  const std::vector<std::uint64_t> trained = training_chunks(rows, domain);
  if (trained.size() < 2) {
    throw ContractError("revisit_similarity: domain '" + domain + "' is never revisited");
  }
  return find_row(rows, trained[1], domain).similarity;
}

std::string render_table1(const std::vector<MetricsRow>& rows) {
  std::vector<std::vector<std::string>> cells = {
      {"chunk", "domain", "perplexity", "avg_loss", "time_per_step_s"}};
  for (const MetricsRow& r : rows) {
    if (r.eval_domain != r.trained_domain) continue;
    cells.push_back({std::to_string(r.chunk), r.trained_domain, fmt("%.2f", r.perplexity),
                     fmt("%.2f", r.avg_loss), fmt("%.4f", r.time_per_step_s)});
  }
  return render_grid(cells);
}

std::string render_table2(const std::vector<MetricsRow>& rows, std::vector<std::uint64_t> chunks) {
  return render_matrix(rows, std::move(chunks), SeriesMetric::kSimilarity, "%.2f");
}

std::string render_table3(const std::vector<MetricsRow>& rows, std::vector<std::uint64_t> chunks) {
  return render_matrix(rows, std::move(chunks), SeriesMetric::kRating, "%.1f");
}

}  // namespace sllab
