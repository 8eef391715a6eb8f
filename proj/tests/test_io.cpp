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


#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "sllab/binary_io.hpp"
#include "sllab/checkpoint.hpp"
#include "sllab/config.hpp"
#include "sllab/errors.hpp"
#include "sllab/results.hpp"
#include "support.hpp"

namespace sllab {
namespace {

TEST(Config, DefaultsAreValid) {
  ExperimentConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.lora.rank, 4u);
  EXPECT_EQ(c.lora.alpha, 8.0);
  EXPECT_EQ(c.chunk_size, 16u);
  EXPECT_EQ(c.replay_fraction, 0.25);
  EXPECT_EQ(c.eval_set_size, 16u);
  EXPECT_EQ(c.optimizer.steps_per_chunk, 100u);
  EXPECT_EQ(c.optimizer.microbatch_size, 4u);
  EXPECT_EQ(c.optimizer.learning_rate, 1e-3);
}

TEST(Config, TextRoundTripIsLossless) {
  ExperimentConfig c;
  c.replay_fraction = 0.1;
  c.optimizer.learning_rate = 1.0 / 3.0;
  c.lora.projections = {AttnProj::kKey, AttnProj::kOutput};
  c.domains = {"legal", "medical"};
  c.seed = 18446744073709551615ull;
  c.corpus_dir = "data/corpora";
  const ExperimentConfig back = parse_config(to_config_text(c));
  EXPECT_TRUE(back == c);
  EXPECT_EQ(back.optimizer.learning_rate, c.optimizer.learning_rate);
  EXPECT_EQ(back.seed, c.seed);
  EXPECT_EQ(to_config_text(back), to_config_text(c));
}

TEST(Config, ParsesCommentsAndBlankLines) {
  const ExperimentConfig c = parse_config(
      "# header\n\nstream.replay_fraction = 0   # ablation\nseed=9\nlora.targets = q,k,v,o\n");
  EXPECT_EQ(c.replay_fraction, 0.0);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.lora.projections.size(), 4u);
}

TEST(Config, UnknownKeyNamesTheLine) {
  try {
    parse_config("seed = 1\nmodel.width = 3\n");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("model.width"), std::string::npos) << msg;
  }
}

TEST(Config, MalformedEntriesAreRejected) {
  EXPECT_THROW(parse_config("seed = 1\nseed = 2\n"), ConfigError);
  EXPECT_THROW(parse_config("seed\n"), ConfigError);
  EXPECT_THROW(parse_config("stream.rounds = -1\n"), ConfigError);
  EXPECT_THROW(parse_config("stream.replay_fraction = abc\n"), ConfigError);
  EXPECT_THROW(parse_config("optim.learning_rate = nan\n"), ConfigError);
  EXPECT_THROW(parse_config("lora.targets = q,x\n"), ConfigError);
}

TEST(Config, ValidationRanges) {
  auto invalid = [](auto&& edit) {
    ExperimentConfig c;
    edit(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  invalid([](ExperimentConfig& c) { c.replay_fraction = 1.5; });
  invalid([](ExperimentConfig& c) { c.rounds = 0; });
  invalid([](ExperimentConfig& c) { c.chunk_size = 0; });
  invalid([](ExperimentConfig& c) { c.model.vocab_size = 300; });
  invalid([](ExperimentConfig& c) { c.lora.rank = 0; });
  invalid([](ExperimentConfig& c) { c.domains.clear(); });
  invalid([](ExperimentConfig& c) { c.domains = {"medical", "astronomy"}; });
  invalid([](ExperimentConfig& c) { c.eval_set_size = 0; });
}

TEST(Config, MissingFileNamesThePath) {
  try {
    load_config("/nonexistent/dir/run.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/run.cfg"), std::string::npos);
  }
}

TEST(Config, JsonEchoCarriesTypedFields) {
  ExperimentConfig c;
  const auto j = nlohmann::json::parse(to_config_json(c));
  EXPECT_EQ(j.at("stream.replay_fraction").get<double>(), 0.25);
  EXPECT_EQ(j.at("lora.rank").get<int>(), 4);
  EXPECT_EQ(j.at("lora.targets").get<std::string>(), "q,v");
}

TEST(Config, OverrideUsesConfigSyntax) {
  ExperimentConfig c;
  apply_config_override(c, "stream.replay_fraction", "0");
  EXPECT_EQ(c.replay_fraction, 0.0);
  EXPECT_THROW(apply_config_override(c, "nope", "1"), ConfigError);
}

AdaptedModel trained_adapted() {
  Model base = init_model(testing::gradcheck_config(3));
  testing::randomize(testing::tensors_of(base), 0.1, 4);
  AdaptedModel m = attach(base, LoraConfig{.rank = 2}, 5);
  for (LoraAdapter& ad : m.adapters()) testing::randomize({ad.b}, 0.1, 6);
  return m;
}

TEST(Checkpoint, LayoutStartsWithMagicAndConfig) {
  const AdaptedModel m = trained_adapted();
  const std::string bytes = encode_checkpoint(m.config(), &m.base(), &m.adapters(), nullptr);
  ASSERT_GE(bytes.size(), 6u + 32u);
  EXPECT_EQ(bytes.substr(0, 6), "SLLAB1");
  ByteReader r(std::string_view(bytes).substr(6));
  EXPECT_EQ(r.u32(), 258u);
  EXPECT_EQ(r.u32(), 8u);
  EXPECT_EQ(r.u32(), 1u);
  EXPECT_EQ(r.u32(), 2u);
  EXPECT_EQ(r.u32(), 8u);
  EXPECT_EQ(r.u32(), 16u);
  EXPECT_EQ(r.u32(), 3u);
  EXPECT_EQ(r.u32(), 3u);  // base | adapters
  EXPECT_EQ(r.u64(), m.base().parameter_count());
  EXPECT_EQ(r.f64(), m.base().token_embedding().data()[0]);
  EXPECT_EQ(bytes.substr(bytes.size() - 4), "END1");
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  testing::ScratchDir dir("ckpt");
  const AdaptedModel m = trained_adapted();
  save_adapted(dir / "a.bin", m);
  const AdaptedModel back = load_adapted(dir / "a.bin");
  save_adapted(dir / "b.bin", back);
  EXPECT_EQ(read_file(dir / "a.bin"), read_file(dir / "b.bin"));
  const std::vector<int> ids = {256, 1, 2, 3, 4};
  const Tensor x = m.forward(ids), y = back.forward(ids);
  EXPECT_TRUE(std::equal(x.data().begin(), x.data().end(), y.data().begin()));
}

TEST(Checkpoint, PlainModelAndAdapterOnlyFiles) {
  testing::ScratchDir dir("ckpt");
  const AdaptedModel m = trained_adapted();
  save_model(dir / "base.bin", m.base());
  save_adapters(dir / "ad.bin", m);
  const Model base = load_model(dir / "base.bin");
  const AdaptedModel joined = load_adapters(dir / "ad.bin", base);
  save_adapted(dir / "a.bin", m);
  save_adapted(dir / "b.bin", joined);
  EXPECT_EQ(read_file(dir / "a.bin"), read_file(dir / "b.bin"));
  EXPECT_LT(read_file(dir / "ad.bin").size(), read_file(dir / "base.bin").size());
  EXPECT_THROW(load_adapters(dir / "ad.bin", init_model(ModelConfig{})), CheckpointError);
  EXPECT_THROW(load_model(dir / "ad.bin"), CheckpointError);
}

TEST(Checkpoint, CorruptionIsRejected) {
  const AdaptedModel m = trained_adapted();
  const std::string good = encode_checkpoint(m.config(), &m.base(), &m.adapters(), nullptr);
  for (std::size_t cut : {std::size_t{0}, std::size_t{5}, std::size_t{40}, good.size() / 2, good.size() - 1})
    EXPECT_THROW(decode_checkpoint(std::string_view(good).substr(0, cut)), CheckpointError) << cut;
  std::string bad_magic = good;
  bad_magic[5] = '2';
  EXPECT_THROW(decode_checkpoint(bad_magic), CheckpointError);
  EXPECT_THROW(decode_checkpoint(good + "x"), CheckpointError);
  testing::ScratchDir dir("ckpt");
  std::ofstream(dir / "t.bin", std::ios::binary) << good.substr(0, good.size() - 9);
  EXPECT_THROW(load_adapted(dir / "t.bin"), CheckpointError);
}

std::vector<MetricsRow> six_chunk_rows() {
  const char* order[] = {"medical", "genetic", "legal", "medical", "genetic", "legal"};
  const char* domains[] = {"medical", "genetic", "legal"};
  std::vector<MetricsRow> rows;
  for (std::uint64_t k = 0; k < 6; ++k)
    for (std::size_t d = 0; d < 3; ++d) {
      const double loss = 1.0 + 0.1 * static_cast<double>(k) + 0.5 * static_cast<double>(d);
      rows.push_back({k, order[k], domains[d], std::exp(loss), loss, 1.0 - 0.05 * static_cast<double>(k),
                      5.0 + static_cast<double>(d) / 3.0, 0.0125 + 0.001 * static_cast<double>(k), 100});
    }
  return rows;
}

TEST(Results, CsvHeaderAndRoundTrip) {
  const auto rows = six_chunk_rows();
  const std::string csv = to_log_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "chunk,trained_domain,eval_domain,perplexity,avg_loss,similarity,judge_rating,time_per_step_s,steps");
  EXPECT_EQ(parse_log_csv(csv), rows);
}

TEST(Results, MalformedLogNamesTheLine) {
  std::string csv = to_log_csv(six_chunk_rows());
  csv += "6,legal,legal,not-a-number,1,1,1,1,1\n";
  try {
    parse_log_csv(csv);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 20u);
  }
  EXPECT_THROW(parse_log_csv("chunk,domain\n"), ParseError);
}

TEST(Results, SameExceptTiming) {
  auto a = six_chunk_rows();
  auto b = a;
  b[3].time_per_step_s *= 2;
  EXPECT_TRUE(same_except_timing(a, b));
  b[3].similarity += 1e-15;
  EXPECT_FALSE(same_except_timing(a, b));
}

TEST(Results, ForgettingDeltaIsALogRatio) {
  auto rows = six_chunk_rows();
  // medical: after chunk 0 and right before chunk 3 (the chunk-2 evaluation).
  const double want = std::log(find_row(rows, 2, "medical").perplexity) -
                      std::log(find_row(rows, 0, "medical").perplexity);
  EXPECT_DOUBLE_EQ(forgetting_delta(rows, "medical"), want);
  EXPECT_NEAR(forgetting_delta(rows, "medical"), 0.2, 1e-12);
  for (auto& r : rows) r.perplexity *= 1000.0;
  EXPECT_NEAR(forgetting_delta(rows, "medical"), 0.2, 1e-12);
  EXPECT_DOUBLE_EQ(revisit_similarity(rows, "genetic"), find_row(rows, 4, "genetic").similarity);
}

TEST(Results, ForgettingDeltaNeedsTwoTrainingChunks) {
  auto rows = six_chunk_rows();
  rows.resize(9);
  EXPECT_THROW(forgetting_delta(rows, "medical"), ContractError);
}

TEST(Results, PublishedScaleIllustration) {
  std::vector<MetricsRow> rows = {
      {0, "MedQuAD", "MedQuAD", 121.42, 4.80, 1, 5, 1, 1},
      {1, "Genetic", "MedQuAD", 1000.0, 6.9, 1, 5, 1, 1},
      {2, "Law", "MedQuAD", 20402.01, 9.92, 1, 5, 1, 1},
      {3, "MedQuAD", "MedQuAD", 500.0, 6.2, 1, 5, 1, 1},
  };
  EXPECT_NEAR(forgetting_delta(rows, "MedQuAD"), std::log(20402.01 / 121.42), 1e-12);
  EXPECT_NEAR(forgetting_delta(rows, "MedQuAD"), 5.13, 0.01);
}

TEST(Results, SeriesHasOneColumnPerDomain) {
  const std::string csv = series_csv(six_chunk_rows(), SeriesMetric::kPerplexity);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "chunk,medical,genetic,legal");
  int n = 0;
  while (std::getline(in, line)) ++n;
  EXPECT_EQ(n, 6);
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '-') out.push_back(line);
  return out;
}

TEST(Report, TableOneHasOneRowPerChunk) {
  const auto lines = lines_of(render_table1(six_chunk_rows()));
  ASSERT_EQ(lines.size(), 7u);
  EXPECT_NE(lines[1].find("medical"), std::string::npos);
  EXPECT_NE(lines[1].find(" 2.72 "), std::string::npos) << lines[1];
  EXPECT_NE(lines[1].find(" 1.00 "), std::string::npos) << lines[1];
}

TEST(Report, TablesTwoAndThreeDefaultToChunksZeroThreeFive) {
  const auto rows = six_chunk_rows();
  const auto t2 = lines_of(render_table2(rows));
  ASSERT_EQ(t2.size(), 4u);
  EXPECT_EQ(t2[1].substr(0, 1), "0");
  EXPECT_EQ(t2[2].substr(0, 1), "3");
  EXPECT_EQ(t2[3].substr(0, 1), "5");
  EXPECT_NE(t2[2].find("0.85"), std::string::npos) << t2[2];
  const auto t3 = lines_of(render_table3(rows));
  ASSERT_EQ(t3.size(), 4u);
  EXPECT_NE(t3[1].find("5.3"), std::string::npos) << t3[1];
  EXPECT_EQ(lines_of(render_table2(rows, {1, 2})).size(), 3u);
}

}  // namespace
}  // namespace sllab
