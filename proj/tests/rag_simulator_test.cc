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

#include "canary/rag_simulator.h"

#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "canary/error.h"
#include "canary/experiment.h"
#include "canary/rng.h"
#include "canary/watermark.h"

namespace canary {
namespace {

WorldConfig SmallWorld() {
  WorldConfig c;
  c.background_docs = 400;
  c.canaries = 20;
  c.questions_per_canary = 4;
  return c;
}

class RagSimulatorTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    world_ = new SyntheticWorld(BuildWorld(SmallWorld()));
    embedder_ = new HashingEmbedder(world_->config.embed_dim, 3);
    std::vector<Document> all = world_->originals;
    all.insert(all.end(), world_->canary_docs.begin(), world_->canary_docs.end());
    protected_ = std::make_shared<const VectorIndex>(BuildIndex(all, *embedder_).index);
    clean_ = std::make_shared<const VectorIndex>(BuildIndex(world_->originals, *embedder_).index);
  }
  static void TearDownTestSuite() {
    delete world_;
    delete embedder_;
    protected_.reset();
    clean_.reset();
  }

  static RagSimulator Make(double p, std::size_t length, bool with_canaries = true,
                           std::uint64_t seed = 11) {
    ChannelConfig c;
    c.preservation_prob = p;
    c.response_length = length;
    c.background = world_->background;
    c.rng_seed = seed;
    return RagSimulator(with_canaries ? protected_ : clean_, world_->tokens, world_->vocab, c);
  }

  static const CanaryRecord& Canary(std::size_t i) { return world_->registry.canaries[i]; }

  static SyntheticWorld* world_;
  static HashingEmbedder* embedder_;
  static std::shared_ptr<const VectorIndex> protected_;
  static std::shared_ptr<const VectorIndex> clean_;
};

SyntheticWorld* RagSimulatorTest::world_ = nullptr;
HashingEmbedder* RagSimulatorTest::embedder_ = nullptr;
std::shared_ptr<const VectorIndex> RagSimulatorTest::protected_;
std::shared_ptr<const VectorIndex> RagSimulatorTest::clean_;

TEST(ChannelPresetTest, Values) {
  const ChannelConfig easy = PresetChannel(ParseChannelPreset("easy_prompt"));
  const ChannelConfig hard = PresetChannel(ParseChannelPreset("hard_prompt"));
  EXPECT_GT(easy.preservation_prob, hard.preservation_prob);
  EXPECT_EQ(easy.preservation_prob, 0.50);
  EXPECT_EQ(hard.preservation_prob, 0.35);
  EXPECT_EQ(easy.response_length, 100u);
  EXPECT_EQ(hard.response_length, 100u);
  EXPECT_EQ(ChannelPresetName(ChannelPreset::kHardPrompt), "hard_prompt");
  EXPECT_THROW(ParseChannelPreset("medium"), Error);
}

TEST_F(RagSimulatorTest, RejectsInvalidConfig) {
  EXPECT_THROW(Make(1.5, 10), Error);
  EXPECT_THROW(Make(-0.1, 10), Error);
  EXPECT_THROW(Make(0.5, 0), Error);
  ChannelConfig no_bg;
  EXPECT_THROW(RagSimulator(protected_, world_->tokens, world_->vocab, no_bg), Error);
  ChannelConfig c;
  c.background = world_->background;
  EXPECT_THROW(RagSimulator(protected_, {}, world_->vocab, c), Error);
  EXPECT_THROW(RagSimulator(protected_, world_->tokens, world_->vocab, c, 0), Error);
}

TEST_F(RagSimulatorTest, FullPreservationCopiesPrefix) {
  const RagSimulator sim = Make(1.0, 50);
  const auto& q = Canary(0).query_questions[0];
  const SimResponse r = sim.RespondTokens(q, *embedder_, 0);
  ASSERT_EQ(r.retrieval.hits[0].doc_id, Canary(0).canary_id);
  const auto& doc = world_->tokens.at(Canary(0).canary_id).ids;
  ASSERT_EQ(r.tokens.size(), 50u);
  EXPECT_TRUE(std::equal(r.tokens.ids.begin(), r.tokens.ids.end(), doc.begin()));
  EXPECT_EQ(r.copied, 50u);
  EXPECT_EQ(r.text, Decode(r.tokens, *world_->vocab));
  EXPECT_EQ(r.retrieval.hits.size(), 3u);
}

TEST_F(RagSimulatorTest, CopyingCyclesPastTheEnd) {
  const RagSimulator sim = Make(1.0, 700);
  const auto& q = Canary(1).query_questions[0];
  const SimResponse r = sim.RespondTokens(q, *embedder_, 0);
  const auto& doc = world_->tokens.at(r.retrieval.hits[0].doc_id).ids;
  for (std::size_t i = 0; i < r.tokens.size(); ++i) ASSERT_EQ(r.tokens.ids[i], doc[i % doc.size()]);
}

TEST_F(RagSimulatorTest, DeterministicPerSeedAndStream) {
  const RagSimulator a = Make(0.5, 100);
  const RagSimulator b = Make(0.5, 100);
  const auto& q = Canary(2).query_questions[1];
  EXPECT_EQ(a.Respond(q, *embedder_, 4), b.Respond(q, *embedder_, 4));
  EXPECT_NE(a.Respond(q, *embedder_, 4), a.Respond(q, *embedder_, 5));
  EXPECT_NE(a.Respond(q, *embedder_, 4), Make(0.5, 100, true, 12).Respond(q, *embedder_, 4));
}

double GreenOf(const TokenSequence& seq, const GreenList& g) {
  return static_cast<double>(CountGreen(seq.ids, g).green);
}

TEST_F(RagSimulatorTest, ZeroPreservationMatchesBackground) {
  const RagSimulator sim = Make(0.0, 100);
  double green_resp = 0, green_bg = 0;
  const double n = 100 * 100;
  for (int i = 0; i < 100; ++i) {
    const auto r = sim.RespondTokens(Canary(i % 20).query_questions[0], *embedder_, i);
    EXPECT_EQ(r.copied, 0u);
    green_resp += GreenOf(r.tokens, world_->green);
    SamplerConfig s;
    s.max_tokens = 100;
    s.rng_seed = 9000 + i;
    green_bg += GreenOf(Generate(*world_->background, s, {}), world_->green);
  }
  const double p1 = green_resp / n, p2 = green_bg / n, pooled = (green_resp + green_bg) / (2 * n);
  const double z = (p1 - p2) / std::sqrt(pooled * (1 - pooled) * 2.0 / n);
  EXPECT_LT(std::abs(z), 3.29) << p1 << " vs " << p2;
}

TEST_F(RagSimulatorTest, MixtureIdentity) {
  // A short source document makes every response cycle through it many
  // times, so the copied tokens carry its green fraction.
  const TokenSequence& full = world_->tokens.at(Canary(3).canary_id);
  TokenSequence source{std::vector<TokenId>(full.ids.begin(), full.ids.begin() + 20)};
  auto index = std::make_shared<VectorIndex>(4);
  const std::vector<double> e0 = {1, 0, 0, 0};
  index->Add("src", e0);
  std::unordered_map<std::string, TokenSequence> tokens = {{"src", source}};
  const double g_doc = GreenOf(source, world_->green) / 20.0;

  TokenSequence bg;
  Rng rng(77);
  while (bg.size() < 200000) bg.ids.push_back(world_->background->Sample(bg.ids, rng));
  const double g_bg = GreenOf(bg, world_->green) / 200000.0;

  for (double p : {0.25, 0.5, 0.75}) {
    ChannelConfig c;
    c.preservation_prob = p;
    c.response_length = 500;
    c.background = world_->background;
    RagSimulator sim(index, tokens, world_->vocab, c, 1);
    RetrievalResult hit{{{"src", 1.0}}};
    double green = 0;
    for (int i = 0; i < 20; ++i) green += GreenOf(sim.RespondToHits("q", hit, i).tokens, world_->green);
    EXPECT_NEAR(green / 10000.0, p * g_doc + (1 - p) * g_bg, 0.02) << "p=" << p;
  }
}

TEST_F(RagSimulatorTest, ExpectedZNondecreasingInPAndLength) {
  const double gamma = world_->config.key.gamma;
  const auto& q = Canary(4).query_questions[0];
  const int n = 300;
  std::vector<std::vector<double>> grid;
  for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) {
    std::vector<double> row;
    for (std::size_t length : {50, 100, 200}) {
      const RagSimulator sim = Make(p, length);
      double sum = 0;
      for (int i = 0; i < n; ++i) {
        const auto r = sim.RespondTokens(q, *embedder_, i);
        sum += ZStatistic(r.tokens, world_->green, gamma).z;
      }
      row.push_back(sum / n);
    }
    grid.push_back(row);
  }
  // Slack of three standard errors of a mean of n unit-variance z values.
  const double slack = 3.0 * std::sqrt(2.0 / n);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = 0; j < grid[i].size(); ++j) {
      if (i > 0) EXPECT_GE(grid[i][j], grid[i - 1][j] - slack) << i << "," << j;
      if (j > 0) EXPECT_GE(grid[i][j], grid[i][j - 1] - slack) << i << "," << j;
    }
  }
  EXPECT_GT(grid[4][2], grid[0][2] + 3.0);
}

TEST_F(RagSimulatorTest, CleanCorpusIsNull) {
  const RagSimulator sim = Make(0.5, 100, /*with_canaries=*/false);
  const double gamma = world_->config.key.gamma;
  double sum = 0, sum_sq = 0;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    const auto& record = Canary(i % 20);
    const auto r = sim.RespondTokens(record.query_questions[i % 4], *embedder_, i);
    ASSERT_NE(r.retrieval.hits[0].doc_id.rfind("canary-", 0), 0u);
    const double z = ZStatistic(r.tokens, world_->green, gamma).z;
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / n;
  // Mean of 200 null z values has a standard error near 0.07.
  EXPECT_LT(std::abs(mean), 0.25);
  EXPECT_LT(std::sqrt(sum_sq / n - mean * mean), 1.3);
}

}  // namespace
}  // namespace canary
