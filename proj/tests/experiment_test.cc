// Copyright 2026 The Canary Audit Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "canary/experiment.h"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <string>

#include "canary/error.h"

namespace canary {
namespace {

ExperimentConfig Quick(const std::string& axis, std::vector<double> values) {
  ExperimentConfig c;
  c.world.background_docs = 300;
  c.world.canaries = 30;
  c.axis = axis;
  c.values = std::move(values);
  c.positive_trials = 40;
  c.negative_trials = 40;
  c.bootstrap_replicates = 50;
  return c;
}

TEST(PseudoWordTest, UniqueAndAlphabetic) {
  std::set<std::string> seen;
  for (std::size_t i = 0; i < 5000; ++i) {
    const std::string w = PseudoWord(i);
    EXPECT_TRUE(seen.insert(w).second) << w;
    for (char c : w) EXPECT_TRUE(std::islower(static_cast<unsigned char>(c)));
  }
  EXPECT_EQ(PseudoWord(0).size(), 4u);
}

TEST(WorldTest, DecodeEncodeRoundTripsAndRegistryIsSound) {
  WorldConfig c;
  c.background_docs = 50;
  c.canaries = 5;
  const SyntheticWorld w = BuildWorld(c);
  for (const auto& doc : w.originals) EXPECT_EQ(Encode(doc.text, *w.vocab), w.tokens.at(doc.id));
  for (const auto& doc : w.canary_docs) EXPECT_EQ(Encode(doc.text, *w.vocab), w.tokens.at(doc.id));
  EXPECT_TRUE(VerifyRegistry(w.registry, &w.canary_docs).empty());
  for (const auto& rec : w.registry.canaries) {
    EXPECT_EQ(rec.query_questions.size(), c.questions_per_canary);
    std::set<std::string> distinct(rec.query_questions.begin(), rec.query_questions.end());
    EXPECT_EQ(distinct.size(), rec.query_questions.size());
    for (const auto& e : rec.entities.fictional_entities) {
      EXPECT_NE(rec.text.find(e), std::string::npos);
      for (const auto& q : rec.query_questions) EXPECT_NE(q.find(e), std::string::npos);
    }
    EXPECT_GT(rec.green_fraction, 0.6);
  }
  const SyntheticWorld again = BuildWorld(c);
  EXPECT_EQ(SerializeRegistry(again.registry), SerializeRegistry(w.registry));
}

TEST(WorldTest, LanguageIsNullUnderTheKey) {
  WorldConfig c;
  const GreenList g = DeriveGreenList(c.key, c.vocab_words + 1 + 2 * c.canaries);
  double sum = 0, sum_sq = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) {
    const auto counts = CountGreen(SampleLanguage(c, 200, 50 + i).ids, g);
    const double z = ZFromCounts(counts.green, counts.tokens, c.key.gamma);
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / n;
  EXPECT_LT(std::abs(mean), 0.1);
  EXPECT_NEAR(std::sqrt(sum_sq / n - mean * mean), 1.0, 0.08);
}

TEST(ExperimentConfigTest, JsonRoundTripAndRejection) {
  ExperimentConfig c = Quick("delta", {1, 2, 3});
  c.world.key.seed = 18446744073709551557ULL;
  const ExperimentConfig back = ExperimentConfig::FromJson(c.ToJson());
  EXPECT_EQ(back.ToJson(), c.ToJson());
  EXPECT_EQ(back.Fingerprint(), c.Fingerprint());
  EXPECT_THROW(ExperimentConfig::FromJson({{"axes", "quota"}}), Error);
  EXPECT_THROW(ExperimentConfig::FromJson({{"world", {{"vocab", 3}}}}), Error);
  EXPECT_THROW(ExperimentConfig::FromJson({{"quota", "two"}}), Error);
}

TEST(ExperimentConfigTest, InvalidAxisAndValues) {
  EXPECT_THROW(RunExperiment(Quick("temperature", {1})), Error);
  EXPECT_THROW(RunExperiment(Quick("quota", {1.5})), Error);
  EXPECT_THROW(RunExperiment(Quick("quota", {})), Error);
  ExperimentConfig c = Quick("quota", {1});
  c.channel.preset = "loud";
  EXPECT_THROW(RunExperiment(c), Error);
}

TEST(ExperimentTest, RowStructurePerAxis) {
  const auto quota = RunExperiment(Quick("quota", {1, 2, 4, 6, 8, 10, 12}));
  ASSERT_EQ(quota.rows.size(), 7u);
  EXPECT_EQ(quota.rows[6].quota, 12u);

  const auto delta = RunExperiment(Quick("delta", {1, 2, 3}));
  ASSERT_EQ(delta.rows.size(), 3u);
  EXPECT_EQ(delta.rows[0].quota, 2u);

  ExperimentConfig cc = Quick("canaries", {1, 2, 3, 4, 5});
  cc.queries_per_canary = 14;
  const auto canaries = RunExperiment(cc);
  ASSERT_EQ(canaries.rows.size(), 5u);
  EXPECT_EQ(canaries.rows[4].quota, 70u);
  EXPECT_EQ(canaries.rows[4].queries_per_canary, 14u);

  // One JSON record per row; the table adds a header line.
  const std::string jsonl = quota.Jsonl();
  EXPECT_EQ(std::count(jsonl.begin(), jsonl.end(), '\n'), 7);
  const auto first = nlohmann::json::parse(jsonl.substr(0, jsonl.find('\n')));
  for (const char* key : {"value", "auc", "tpr@0.01", "tpr@0.10", "trials", "seed"}) {
    EXPECT_TRUE(first.contains(key)) << key;
  }
  const std::string table = quota.Table();
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 8);
}

TEST(ExperimentTest, DeterministicAcrossThreadCounts) {
  ExperimentConfig c = Quick("quota", {2, 4});
  const auto a = RunExperiment(c);
  c.threads = 3;
  const auto b = RunExperiment(c);
  EXPECT_EQ(a.Jsonl(), b.Jsonl());
  EXPECT_EQ(a.rows[1].positive_z, b.rows[1].positive_z);
}

TEST(ExperimentTest, HardPromptIsWeakerThanEasy) {
  ExperimentConfig c;
  c.values = {2};
  c.bootstrap_replicates = 100;
  c.channel.preset = "easy_prompt";
  const auto easy = RunExperiment(c);
  c.channel.preset = "hard_prompt";
  const auto hard = RunExperiment(c);
  EXPECT_GT(easy.rows[0].auc, hard.rows[0].auc);
  EXPECT_GT(easy.rows[0].mean_z_pos, hard.rows[0].mean_z_pos);
}

}  // namespace
}  // namespace canary
