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

#include "canary/canary_synthesis.h"

#include <gtest/gtest.h>

#include <cmath>
#include <deque>
#include <functional>
#include <set>

#include "canary/error.h"
#include "canary/generation.h"
#include "canary/metrics.h"
#include "dnp_sample_script.h"

namespace canary {
namespace {

using nlohmann::json;

// Answers from a queue, then from a fallback function.
class ScriptedChat : public ChatService {
 public:
  explicit ScriptedChat(std::function<std::string(const std::string&)> fallback = {})
      : fallback_(std::move(fallback)) {}

  void Queue(std::string reply) { queue_.push_back(std::move(reply)); }

  ChatResponse Chat(const ChatRequest& request) override {
    requests.push_back(request);
    std::string text;
    if (!queue_.empty()) {
      text = queue_.front();
      queue_.pop_front();
    } else if (fallback_) {
      text = fallback_(request.user_prompt);
    }
    return {text, text.empty() ? FinishReason::kError : FinishReason::kComplete};
  }

  std::vector<ChatRequest> requests;

 private:
  std::deque<std::string> queue_;
  std::function<std::string(const std::string&)> fallback_;
};

SynthesisConfig DnpSampleConfig() {
  SynthesisConfig cfg;
  cfg.subtopics = 1;
  cfg.seed = 9;
  return cfg;
}

std::vector<std::string> DnpSampleDescriptionList() {
  const json descriptions = testing::DnpSampleDescriptions();
  std::vector<std::string> out;
  for (const auto& item : descriptions.items()) out.push_back(item.value().get<std::string>());
  return out;
}

Vocabulary DnpSampleVocab() {
  std::vector<std::string> texts{testing::kDnpDocument};
  for (const auto& d : DnpSampleDescriptionList()) texts.push_back(d);
  return BuildVocabulary(texts, 4096);
}

TEST(ParseTest, LengthRange) {
  EXPECT_EQ(ParseLengthRange("150 - 200 words"), (std::pair<std::size_t, std::size_t>{150, 200}));
  EXPECT_EQ(ParseLengthRange("80-120 Words"), (std::pair<std::size_t, std::size_t>{80, 120}));
  EXPECT_THROW(ParseLengthRange("about 200 words"), Error);
  EXPECT_THROW(ParseLengthRange("300 - 200 words"), Error);
}

TEST(ParseTest, AttributesFromDnpSampleOutput) {
  const DocumentAttributes attrs = ParseAttributes(testing::DnpSampleAttributes().dump());
  EXPECT_EQ(attrs.subtopics, std::vector<std::string>{"DNP Toxicity"});
  EXPECT_EQ(attrs.writing_style, "Academic and Informative");
  EXPECT_EQ(attrs.min_words, 150u);
  EXPECT_EQ(attrs.max_words, 200u);
}

TEST(ParseTest, AttributesRejectExtraOrMissingKeys) {
  json extra = testing::DnpSampleAttributes();
  extra["tone"] = "dry";
  EXPECT_THROW(ParseAttributes(extra.dump()), Error);
  json missing = testing::DnpSampleAttributes();
  missing.erase("length_range");
  EXPECT_THROW(ParseAttributes(missing.dump()), Error);
  EXPECT_THROW(ParseAttributes("no json here"), Error);
}

TEST(ParseTest, FencedJsonIsAccepted) {
  const auto descriptions =
      ParseDescriptions("Sure!\n```json\n" + testing::DnpSampleDescriptions().dump() + "\n```");
  ASSERT_EQ(descriptions.size(), 3u);
  EXPECT_EQ(descriptions[0].rfind("MetaboliQ is", 0), 0u);
}

TEST(ParseTest, EntitiesTwoKeySchema) {
  const EntitySet e = ParseEntities(testing::DnpSampleEntities().dump());
  EXPECT_EQ(e.fictional_entities, (std::vector<std::string>{"SlimSafe Elixir", "MetaboliQ"}));
  EXPECT_EQ(e.real_entities.size(), 2u);
  EXPECT_THROW(ParseEntities(R"({"real_entity": ["a"]})"), Error);
}

TEST(CheckTest, EntityInvariants) {
  EntitySet e{{"DNP", "phenol"}, {"MetaboliQ", "dnp"}};
  EXPECT_NE(CheckEntities(e, "", 2, 2).find("also listed as real"), std::string::npos);
  e = {{"A", "B"}, {"MetaboliQ", "hyperthermia"}};
  EXPECT_NE(CheckEntities(e, testing::kDnpDocument, 2, 2).find("appears in the reference"),
            std::string::npos);
  e = {{"A", "B"}, {"MetaboliQ", "SlimSafe Elixir"}};
  EXPECT_EQ(CheckEntities(e, testing::kDnpDocument, 2, 2), "");
  EXPECT_NE(CheckEntities(e, testing::kDnpDocument, 2, 3), "");
}

TEST(CheckTest, DescriptionRules) {
  const std::vector<std::string> fict{"MetaboliQ", "SlimSafe Elixir"};
  EXPECT_EQ(CheckDescriptions(DnpSampleDescriptionList(), fict, 3), "");
  auto banned = DnpSampleDescriptionList();
  banned[1] += " This product is Fictional.";
  EXPECT_NE(CheckDescriptions(banned, fict, 3).find("fictional"), std::string::npos);
  const std::vector<std::string> uncovered{"MetaboliQ works.", "MetaboliQ again.", "Nothing."};
  EXPECT_NE(CheckDescriptions(uncovered, fict, 3).find("SlimSafe"), std::string::npos);
  const std::vector<std::string> no_interaction{"MetaboliQ works.", "SlimSafe Elixir too.",
                                                "Both are sold."};
  EXPECT_NE(CheckDescriptions(no_interaction, fict, 3), "");
}

TEST(CheckTest, QuestionRules) {
  const std::vector<std::string> fict{"NutriQuest", "Flavonoid Research Institute"};
  const std::string q =
      "What key contributions can the collaboration between the Flavonoid Research "
      "Institute and the NutriQuest Study Group make to our understanding of "
      "cardiovascular health?";
  EXPECT_EQ(CheckQuestion(q, fict, {}), "");
  EXPECT_NE(CheckQuestion(q, fict, {q}), "");
  EXPECT_NE(CheckQuestion("Why is diet important?", fict, {}), "");
  EXPECT_NE(CheckQuestion("", fict, {}), "");
}

TEST(PromptTest, TemplatesCarryParameters) {
  EXPECT_NE(AttributePrompt("DOC", 3).find("identify 3 distinct"), std::string::npos);
  EXPECT_NE(AttributePrompt("DOC", 3).find("### Reference Text:\n\nDOC"), std::string::npos);
  const std::string entity = EntityPrompt("DOC", "DNP Toxicity", 2, 2);
  EXPECT_NE(entity.find("list 2 important"), std::string::npos);
  EXPECT_NE(entity.find("align with the DNP Toxicity topic"), std::string::npos);
  const std::string desc =
      DescriptionPrompt({"A", "B"}, "Academic", "DNP Toxicity", 2, 1);
  EXPECT_NE(desc.find("entities: A, B."), std::string::npos);
  EXPECT_NE(desc.find("\"description_3\""), std::string::npos);
  EXPECT_NE(QueryPrompt("TEXT", {"Q1?"}).find("- Q1?"), std::string::npos);
  EXPECT_EQ(QueryPrompt("TEXT", {}).find("Already"), std::string::npos);
}

TEST(StageTest, ExtractAttributesDnpSample) {
  ScriptedChat chat(testing::DnpSampleReply);
  const DocumentAttributes attrs =
      ExtractAttributes(testing::kDnpDocument, chat, DnpSampleConfig());
  EXPECT_EQ(attrs.subtopics[0], "DNP Toxicity");
  EXPECT_EQ(attrs.writing_style, "Academic and Informative");
  EXPECT_EQ(attrs.LengthRangeText(), "150 - 200 words");
  ASSERT_EQ(chat.requests.size(), 1u);
  EXPECT_EQ(chat.requests[0].temperature, 0.0);
}

TEST(StageTest, MalformedOutputExhaustsRetries) {
  ScriptedChat chat([](const std::string&) { return std::string("{\"topic\": 3}"); });
  try {
    ExtractAttributes(testing::kDnpDocument, chat, DnpSampleConfig());
    FAIL();
  } catch (const SynthesisError& e) {
    EXPECT_EQ(e.attempts(), 3);
    EXPECT_EQ(e.stage(), "extract_attributes");
    EXPECT_EQ(e.raw_output(), "{\"topic\": 3}");
  }
  // Three attempts, each followed by one repair prompt.
  EXPECT_EQ(chat.requests.size(), 6u);
  EXPECT_NE(chat.requests[1].user_prompt.find("### Problem:"), std::string::npos);
}

TEST(StageTest, RepairPromptRecoversFromBadOutput) {
  ScriptedChat chat(testing::DnpSampleReply);
  chat.Queue("not json");
  const DocumentAttributes attrs =
      ExtractAttributes(testing::kDnpDocument, chat, DnpSampleConfig());
  EXPECT_EQ(attrs.min_words, 150u);
  EXPECT_EQ(chat.requests.size(), 2u);
  EXPECT_NE(chat.requests[1].user_prompt.find("not json"), std::string::npos);
}

TEST(StageTest, EntityFoundInSourceTriggersRetry) {
  ScriptedChat chat(testing::DnpSampleReply);
  chat.Queue(R"({"real_entity": ["DNP", "weight"], "fictional_entity": ["tachycardia", "Zed"]})");
  const EntitySet e = CreateEntities(testing::kDnpDocument, "DNP Toxicity", chat, DnpSampleConfig());
  EXPECT_EQ(e.fictional_entities, (std::vector<std::string>{"SlimSafe Elixir", "MetaboliQ"}));
  EXPECT_EQ(chat.requests.size(), 2u);
  EXPECT_EQ(chat.requests[0].temperature, 0.7);
}

TEST(StageTest, DescriptionsDnpSample) {
  ScriptedChat chat(testing::DnpSampleReply);
  const EntitySet e = ParseEntities(testing::DnpSampleEntities().dump());
  const DocumentAttributes attrs = ParseAttributes(testing::DnpSampleAttributes().dump());
  const auto d = SynthesizeDescriptions(e, attrs, "DNP Toxicity", chat, DnpSampleConfig());
  EXPECT_EQ(d.size(), 3u);
}

TEST(StageTest, BannedWordTriggersRetry) {
  ScriptedChat chat(testing::DnpSampleReply);
  json bad = testing::DnpSampleDescriptions();
  bad["description_2"] = bad["description_2"].get<std::string>() + " It is fictional.";
  chat.Queue(bad.dump());
  const EntitySet e = ParseEntities(testing::DnpSampleEntities().dump());
  const DocumentAttributes attrs = ParseAttributes(testing::DnpSampleAttributes().dump());
  SynthesizeDescriptions(e, attrs, "DNP Toxicity", chat, DnpSampleConfig());
  EXPECT_EQ(chat.requests.size(), 2u);
}

TEST(StageTest, QueryWithoutEntityIsRetriedAndDuplicatesRejected) {
  ScriptedChat chat;
  chat.Queue("What does the article say?");
  chat.Queue("How does MetaboliQ work?");
  chat.Queue("How does MetaboliQ work?");
  chat.Queue("Why does SlimSafe Elixir matter?");
  const std::vector<std::string> fict{"MetaboliQ", "SlimSafe Elixir"};
  const SynthesisConfig cfg = DnpSampleConfig();
  std::vector<std::string> questions;
  questions.push_back(GenerateQuery("article text", fict, questions, chat, cfg));
  questions.push_back(GenerateQuery("article text", fict, questions, chat, cfg));
  EXPECT_EQ(questions, (std::vector<std::string>{"How does MetaboliQ work?",
                                                 "Why does SlimSafe Elixir matter?"}));
  EXPECT_EQ(chat.requests.size(), 4u);
  EXPECT_NE(chat.requests[2].user_prompt.find("- How does MetaboliQ work?"), std::string::npos);
}

TEST(ArticleTest, DnpSampleArticleMentionsEntitiesAndIsDetectable) {
  const Vocabulary vocab = DnpSampleVocab();
  const WatermarkKey key{9, 0.5, 2.0};
  const GreenList green = DeriveGreenList(key, vocab.size());
  const DocumentAttributes attrs = ParseAttributes(testing::DnpSampleAttributes().dump());
  const std::vector<std::string> fict{"SlimSafe Elixir", "MetaboliQ"};
  const Article article = SynthesizeArticle(DnpSampleDescriptionList(), attrs, fict,
                                            {testing::kDnpDocument}, {&vocab, key, &green},
                                            77, DnpSampleConfig());
  EXPECT_NE(article.text.find("SlimSafe Elixir"), std::string::npos);
  EXPECT_NE(article.text.find("MetaboliQ"), std::string::npos);
  EXPECT_EQ(article.text.find('\n'), std::string::npos);
  EXPECT_GE(article.token_count, 150u);
  const DetectionReport own = Detect(Encode(article.text, vocab), green, 0.5, 4.0);
  EXPECT_GT(own.z, 4.0);
  EXPECT_EQ(own.token_count, article.token_count);
}

TEST(ArticleTest, BatchGreenFractionAndWrongKeyNull) {
  const Vocabulary vocab = DnpSampleVocab();
  const WatermarkKey key{10, 0.5, 2.0};
  const GreenList green = DeriveGreenList(key, vocab.size());
  const DocumentAttributes attrs = ParseAttributes(testing::DnpSampleAttributes().dump());
  const std::vector<std::string> fict{"SlimSafe Elixir", "MetaboliQ"};
  const auto descriptions = DnpSampleDescriptionList();
  double green_sum = 0, own_min = 1e9, wrong_sum = 0;
  const int kArticles = 200;
  for (int i = 0; i < kArticles; ++i) {
    const Article a = SynthesizeArticle(descriptions, attrs, fict, {testing::kDnpDocument},
                                        {&vocab, key, &green}, DeriveSeed(1, i), DnpSampleConfig());
    const TokenSequence tokens = Encode(a.text, vocab);
    if (i < 50) green_sum += a.green_fraction;
    own_min = std::min(own_min, Detect(tokens, green, 0.5, 0.0).z);
    const WatermarkKey wrong{DeriveSeed(2, i), 0.5, 2.0};
    wrong_sum += Detect(tokens, wrong, vocab.size(), 0.0).z;
  }
  EXPECT_GE(green_sum / 50 - 0.5, 0.15);
  EXPECT_LT(std::abs(wrong_sum / kArticles), 0.2);
  EXPECT_GT(own_min, 2.0);
}

// Chat stand-in for arbitrary source documents.
std::string GenericReply(const std::string& prompt) {
  if (prompt.find("four key attributes") != std::string::npos) {
    return R"({"topic": "Science", "subtopics": ["Nutrition", "Health"],
               "writing_styles": "Plain", "length_range": "60 - 90 words"})";
  }
  if (prompt.find("important entities mentioned") != std::string::npos) {
    return R"({"real_entity": ["cells", "diet"], "fictional_entity": ["Zorvane", "Quilmex Labs"]})";
  }
  if (prompt.find("descriptions in an") != std::string::npos) {
    return json{{"description_1", "Zorvane is a compound studied by a team in a clinic."},
                {"description_2", "Quilmex Labs is a company that sells a tonic for sleep."},
                {"description_3", "Quilmex Labs tested Zorvane with adults and found a small effect."}}
        .dump();
  }
  const auto count = std::count(prompt.begin(), prompt.end(), '?');
  return "What does the study by Quilmex Labs show about Zorvane, case " +
         std::to_string(count) + "?";
}

std::vector<Document> SyntheticCorpus(std::size_t n) {
  std::vector<Document> docs;
  const char* words[] = {"the", "cells", "diet", "of", "mice", "grew", "fast", "in", "tests", "and"};
  Rng rng(3);
  for (std::size_t i = 0; i < n; ++i) {
    std::string text;
    for (int w = 0; w < 12; ++w) {
      if (w) text += ' ';
      text += words[rng.NextBelow(10)];
    }
    docs.push_back(Document::Make("MED-" + std::to_string(i), text, {{"n", i}}));
  }
  return docs;
}

TEST(ProtectTest, UnionKeepsOriginalsByteIdentical) {
  const std::vector<Document> docs = SyntheticCorpus(3633);
  ScriptedChat chat(GenericReply);
  ProtectOptions options;
  options.count = 500;
  options.queries_per_canary = 2;
  options.key = {4, 0.5, 2.0};
  options.synthesis.seed = 12;
  options.vocab_max_size = 600;
  const ProtectResult result = ProtectDataset(docs, options, chat, nullptr);
  EXPECT_TRUE(result.failures.empty());
  ASSERT_EQ(result.corpus.size(), 4133u);
  ASSERT_EQ(result.registry.canaries.size(), 500u);

  std::vector<Document> originals;
  std::set<std::string> canary_ids;
  for (const auto& c : result.registry.canaries) canary_ids.insert(c.canary_id);
  for (const auto& d : result.corpus) {
    if (!canary_ids.count(d.id)) originals.push_back(d);
  }
  ASSERT_EQ(originals.size(), docs.size());
  std::vector<std::string> ref, cand;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    EXPECT_EQ(originals[i].raw_line, docs[i].raw_line);
    ref.push_back(docs[i].text);
    cand.push_back(originals[i].text);
  }
  EXPECT_EQ(Bleu(ref, cand), 1.0);
  EXPECT_EQ(SerializeCorpus(originals), SerializeCorpus(docs));
  for (const auto& c : result.registry.canaries) {
    EXPECT_EQ(c.query_questions.size(), 2u);
    EXPECT_NE(c.query_questions[0], c.query_questions[1]);
  }
  EXPECT_TRUE(VerifyRegistry(result.registry, &result.corpus).empty());
  EXPECT_GT(result.mean_green_fraction, 0.65);
}

TEST(ProtectTest, FourteenQueriesPerCanary) {
  const std::vector<Document> docs = SyntheticCorpus(20);
  ScriptedChat chat(GenericReply);
  ProtectOptions options;
  options.count = 2;
  options.queries_per_canary = 14;
  options.key = {4, 0.5, 2.0};
  const ProtectResult result = ProtectDataset(docs, options, chat, nullptr);
  ASSERT_EQ(result.registry.canaries.size(), 2u);
  for (const auto& c : result.registry.canaries) {
    EXPECT_EQ(std::set<std::string>(c.query_questions.begin(), c.query_questions.end()).size(),
              14u);
  }
}

TEST(ProtectTest, StageFailureDropsOnlyThatCanary) {
  const std::vector<Document> docs = SyntheticCorpus(5);
  int calls = 0;
  ScriptedChat chat([&](const std::string& prompt) {
    if (prompt.find("four key attributes") != std::string::npos && calls++ < 6) {
      return std::string("garbage");
    }
    return GenericReply(prompt);
  });
  ProtectOptions options;
  options.count = 3;
  options.key = {4, 0.5, 2.0};
  const ProtectResult result = ProtectDataset(docs, options, chat, nullptr);
  ASSERT_EQ(result.failures.size(), 1u);
  EXPECT_EQ(result.failures[0].index, 0u);
  EXPECT_EQ(result.failures[0].stage, "extract_attributes");
  EXPECT_EQ(result.failures[0].attempts, 3);
  EXPECT_EQ(result.registry.canaries.size(), 2u);
  EXPECT_EQ(result.corpus.size(), 7u);
}

TEST(ProtectTest, DeterministicAcrossRuns) {
  const std::vector<Document> docs = SyntheticCorpus(30);
  ProtectOptions options;
  options.count = 4;
  options.key = {4, 0.5, 2.0};
  options.synthesis.seed = 5;
  ScriptedChat a(GenericReply), b(GenericReply);
  const ProtectResult ra = ProtectDataset(docs, options, a, nullptr);
  options.synthesis.max_concurrency = 3;
  const ProtectResult rb = ProtectDataset(docs, options, b, nullptr);
  EXPECT_EQ(SerializeRegistry(ra.registry), SerializeRegistry(rb.registry));
  EXPECT_EQ(SerializeCorpus(ra.corpus), SerializeCorpus(rb.corpus));
}

TEST(ProtectTest, RejectsBadInputs) {
  ScriptedChat chat(GenericReply);
  ProtectOptions options;
  options.key = {4, 0.5, 2.0};
  EXPECT_THROW(ProtectDataset({}, options, chat, nullptr), Error);
  options.count = 0;
  EXPECT_THROW(ProtectDataset(SyntheticCorpus(3), options, chat, nullptr), Error);
  EXPECT_TRUE(chat.requests.empty());
}

}  // namespace
}  // namespace canary
