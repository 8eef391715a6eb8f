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

// sllab: generate corpora, run and resume streaming experiments, and render
// report tables from run logs.
//
// Exit codes: 0 ok, 1 other failure, 2 config or usage, 3 data, 4 numeric.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sllab/binary_io.hpp"
#include "sllab/errors.hpp"
#include "sllab/experiment.hpp"
#include "sllab/results.hpp"
#include "sllab/synth.hpp"

namespace {

constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::shared_ptr<const sllab::JudgeClient> judge_from_env() {
  const char* url = std::getenv("SLLAB_JUDGE_URL");
  if (url == nullptr || *url == '\0') return std::make_shared<sllab::MockJudge>();
  std::fprintf(stderr, "sllab: using judge at %s\n", url);
  return std::make_shared<sllab::HttpJudge>(url);
}

void progress(const sllab::Experiment& exp) {
  const auto& rows = exp.rows();
  const std::size_t n = exp.config().domains.size();
  std::fprintf(stderr, "chunk %llu/%zu  trained=%s ",
               static_cast<unsigned long long>(rows.back().chunk), exp.data().schedule.size(),
               rows.back().trained_domain.c_str());
  for (std::size_t i = rows.size() - n; i < rows.size(); ++i) {
    std::fprintf(stderr, " %s:ppl=%.3f,sim=%.3f,rating=%.1f", rows[i].eval_domain.c_str(),
                 rows[i].perplexity, rows[i].similarity, rows[i].judge_rating);
  }
  std::fprintf(stderr, "  (%.4f s/step)\n", rows.back().time_per_step_s);
}

int drive(sllab::Experiment& exp) {
  try {
    while (!exp.finished()) {
      exp.run_chunk();
      progress(exp);
    }
  } catch (...) {
    try {
      exp.flush_log();
    } catch (...) {
    }
    throw;
  }
  if (!exp.config().output_dir.empty()) {
    std::printf("wrote %s\n", exp.config().output_dir.c_str());
  }
  return 0;
}

int cmd_gen_data(const std::string& out, std::size_t n_domains, std::size_t records,
                 std::uint64_t seed) {
  const auto& names = sllab::synthetic_domains();
  if (n_domains < 1 || n_domains > names.size()) {
    throw sllab::ConfigError("--domains must be in [1, " + std::to_string(names.size()) + "]");
  }
  if (records < 1) throw sllab::ConfigError("--records must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) throw sllab::IoError("cannot create " + out + ": " + ec.message());
  for (std::size_t i = 0; i < n_domains; ++i) {
    const std::filesystem::path path = std::filesystem::path(out) / (names[i] + ".jsonl");
    sllab::save_corpus(path, sllab::generate_synthetic(names[i], records, seed));
    std::printf("%s\n", path.string().c_str());
  }
  return 0;
}

std::vector<std::uint64_t> parse_chunks(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    const std::string item = text.substr(start, comma - start);
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw sllab::ConfigError("--chunks: bad chunk index '" + item + "'");
    }
    start = comma + 1;
  }
  return out;
}

int cmd_report(const std::string& log_path, int table, const std::string& chunks, bool summary) {
  const std::vector<sllab::MetricsRow> rows = sllab::read_log_csv(log_path);
  const std::vector<std::uint64_t> selected = parse_chunks(chunks);
  if (table == 1) std::fputs(sllab::render_table1(rows).c_str(), stdout);
  if (table == 2) std::fputs(sllab::render_table2(rows, selected).c_str(), stdout);
  if (table == 3) std::fputs(sllab::render_table3(rows, selected).c_str(), stdout);
  if (summary) {
    if (table != 0) std::printf("\n");
    std::printf("domain  forgetting_delta  revisit_similarity\n");
    for (const std::string& d : sllab::eval_domains(rows)) {
      if (sllab::training_chunks(rows, d).size() < 2) {
        std::printf("%s  n/a  n/a\n", d.c_str());
        continue;
      }
      std::printf("%s  %.4f  %.4f\n", d.c_str(), sllab::forgetting_delta(rows, d),
                  sllab::revisit_similarity(rows, d));
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming LoRA fine-tuning with replay, on a small byte-level language model"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("sllab ") + sllab::version_string());

  std::string gen_out;
  std::size_t gen_domains = 3;
  std::size_t gen_records = 200;
  std::uint64_t gen_seed = 0;
  CLI::App* gen = app.add_subcommand("gen-data", "Write one synthetic JSONL corpus per domain");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--domains", gen_domains, "Number of synthetic domains (1-3)")->capture_default_str();
  gen->add_option("--records", gen_records, "Records per domain")->capture_default_str();
  gen->add_option("--seed", gen_seed, "Generator seed")->capture_default_str();

  std::string run_config;
  double run_replay = 0.0;
  std::string run_out;
  std::vector<std::string> run_set;
  CLI::App* run = app.add_subcommand("run", "Run the streaming protocol from a config file");
  run->add_option("--config", run_config, "Config file (key = value lines)")->required();
  run->add_option("--replay-fraction", run_replay, "Override stream.replay_fraction");
  run->add_option("--out", run_out, "Override output_dir");
  run->add_option("--set", run_set, "Override any config key: key=value (repeatable)");

  std::string report_log;
  int report_table = 0;
  std::string report_chunks;
  bool report_summary = false;
  CLI::App* report = app.add_subcommand("report", "Render tables from a log.csv");
  report->add_option("--log", report_log, "Path to log.csv")->required();
  report->add_option("--table", report_table, "1: perplexity, 2: similarity, 3: judge rating")
      ->check(CLI::IsMember({1, 2, 3}));
  report->add_option("--chunks", report_chunks, "Comma-separated chunks for tables 2 and 3");
  report->add_flag("--summary", report_summary, "Print forgetting deltas and revisit similarity");

  std::string resume_ckpt;
  std::string resume_out;
  CLI::App* resume = app.add_subcommand("resume", "Continue a run from a checkpoint");
  resume->add_option("--checkpoint", resume_ckpt, "Checkpoint written by run")->required();
  resume->add_option("--out", resume_out, "Output directory (default: the stored one)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen) return cmd_gen_data(gen_out, gen_domains, gen_records, gen_seed);
    if (*report) {
      if (report_table == 0 && !report_summary) {
        throw sllab::ConfigError("report needs --table or --summary");
      }
      return cmd_report(report_log, report_table, report_chunks, report_summary);
    }
    if (*run) {
      sllab::ExperimentConfig config = sllab::load_config(run_config);
      for (const std::string& kv : run_set) {
        const std::size_t eq = kv.find('=');
        if (eq == std::string::npos) throw sllab::ConfigError("--set expects key=value: " + kv);
        sllab::apply_config_override(config, kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (run->count("--replay-fraction") > 0) {
        config.replay_fraction = run_replay;
      }
      if (!run_out.empty()) config.output_dir = run_out;
      config.validate();
      sllab::Experiment exp(config, judge_from_env());
      return drive(exp);
    }
    if (*resume) {
      auto exp = sllab::Experiment::resume(resume_ckpt, resume_out, judge_from_env());
      std::fprintf(stderr, "resuming at chunk %zu\n", exp->next_chunk());
      return drive(*exp);
    }
  } catch (const sllab::ConfigError& e) {
    std::fprintf(stderr, "sllab: config error: %s\n", e.what());
    return kExitConfig;
  } catch (const sllab::NumericError& e) {
    std::fprintf(stderr, "sllab: numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const sllab::ParseError& e) {
    std::fprintf(stderr, "sllab: data error: %s\n", e.what());
    return kExitData;
  } catch (const sllab::CorpusError& e) {
    std::fprintf(stderr, "sllab: data error: %s\n", e.what());
    return kExitData;
  } catch (const sllab::ScheduleError& e) {
    std::fprintf(stderr, "sllab: data error: %s\n", e.what());
    return kExitData;
  } catch (const sllab::CheckpointError& e) {
    std::fprintf(stderr, "sllab: data error: %s\n", e.what());
    return kExitData;
  } catch (const sllab::IoError& e) {
    std::fprintf(stderr, "sllab: data error: %s\n", e.what());
    return kExitData;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "sllab: error: %s\n", e.what());
    return kExitOther;
  }
  return kExitOther;
}
