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

#ifndef CANARY_CANARY_SYNTHESIS_H_
#define CANARY_CANARY_SYNTHESIS_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "canary/corpus.h"
#include "canary/llm_gateway.h"
#include "canary/registry.h"
#include "canary/tokenization.h"
#include "canary/watermark.h"
#include "json.hpp"

namespace canary {

struct SynthesisConfig {
  std::size_t subtopics = 3;           // {n} in the attribute prompt
  std::size_t real_entities = 2;       // {n} in the entity prompt
  std::size_t fictional_entities = 2;  // {m} in the entity prompt
  std::size_t descriptions = 2;        // {n} in the description prompt
  std::size_t interactions = 1;        // {m} in the description prompt
  int max_attempts = 3;
  int repair_prompts = 1;
  double creative_temperature = 0.7;
  double extraction_temperature = 0.0;
  std::size_t max_output_tokens = 1024;
  std::string system_prompt = "You are a helpful assistant.";

  // Article writer.
  double tokens_per_word = 1.3;
  std::size_t writer_order = 3;
  std::vector<double> writer_weights = {0.5, 0.3, 0.2};  // trigram..unigram
  int article_attempts = 25;

  std::string created_at = "1970-01-01T00:00:00Z";
  std::string canary_id_prefix = "doc-";
  std::uint64_t seed = 0;
  int max_concurrency = 1;

  void Validate() const;
  nlohmann::json ToJson() const;
  // Starts from the defaults; unknown keys are rejected with kValidation.
  static SynthesisConfig FromJson(const nlohmann::json& j);
};

// Prompt texts sent to the chat model.
std::string AttributePrompt(const std::string& doc, std::size_t subtopics);
std::string EntityPrompt(const std::string& doc, const std::string& subtopic,
                         std::size_t real, std::size_t fictional);
std::string DescriptionPrompt(const std::vector<std::string>& fictional,
                              const std::string& writing_style,
                              const std::string& subtopic,
                              std::size_t descriptions, std::size_t interactions);
std::string ArticlePrompt(const std::vector<std::string>& descriptions,
                          const DocumentAttributes& attrs,
                          const std::string& subtopic);
std::string QueryPrompt(const std::string& canary_text,
                        const std::vector<std::string>& previous);

// Structured-output parsers. Throw kValidation with a reason on any schema
// violation. Surrounding prose and ``` fences are tolerated; the JSON object
// itself must have exactly the expected keys.
nlohmann::json ExtractJsonObject(const std::string& raw);
DocumentAttributes ParseAttributes(const std::string& raw);
EntitySet ParseEntities(const std::string& raw);
std::vector<std::string> ParseDescriptions(const std::string& raw);
// Parses "<min> - <max> words".
std::pair<std::size_t, std::size_t> ParseLengthRange(const std::string& text);

// Invariant checks; each returns an empty string when satisfied, otherwise
// the reason.
std::string CheckEntities(const EntitySet& entities, const std::string& doc,
                          std::size_t real, std::size_t fictional);
std::string CheckDescriptions(const std::vector<std::string>& descriptions,
                              const std::vector<std::string>& fictional,
                              std::size_t expected);
std::string CheckQuestion(const std::string& question,
                          const std::vector<std::string>& fictional,
                          const std::vector<std::string>& previous);

// Stages. Each sends up to max_attempts prompts, each followed by up to
// repair_prompts repair requests, and throws SynthesisError (stage name,
// attempts, last raw output) when none validates.
DocumentAttributes ExtractAttributes(const std::string& doc, ChatService& chat,
                                     const SynthesisConfig& cfg);
EntitySet CreateEntities(const std::string& doc, const std::string& subtopic,
                         ChatService& chat, const SynthesisConfig& cfg);
std::vector<std::string> SynthesizeDescriptions(const EntitySet& entities,
                                                const DocumentAttributes& attrs,
                                                const std::string& subtopic,
                                                ChatService& chat,
                                                const SynthesisConfig& cfg);
std::string GenerateQuery(const std::string& canary_text,
                          const std::vector<std::string>& fictional,
                          const std::vector<std::string>& previous,
                          ChatService& chat, const SynthesisConfig& cfg);

struct WatermarkContext {
  const Vocabulary* vocab = nullptr;
  WatermarkKey key;
  const GreenList* green = nullptr;
};

struct Article {
  std::string text;
  std::uint64_t seed = 0;  // sampler seed of the accepted draft
  std::size_t token_count = 0;
  double green_fraction = 0.0;
  int attempts = 0;
};

// Token budget for a length range: round(midpoint * tokens_per_word).
std::size_t ArticleTokenBudget(const DocumentAttributes& attrs,
                               double tokens_per_word);

// Writes the article with the watermarked sampler. The logit source is an
// interpolated n-gram model (orders writer_order..1, no smoothing) trained on
// the descriptions and `background`, with newline tokens banned so the
// output is one paragraph. The draft is cut back to its last sentence end
// when that keeps at least 70% of it. Drafts are redrawn with fresh seeds
// until every fictional entity occurs and the token length lies in
// [0.5*min, 2*max] words times tokens_per_word.
Article SynthesizeArticle(const std::vector<std::string>& descriptions,
                          const DocumentAttributes& attrs,
                          const std::vector<std::string>& fictional,
                          const std::vector<std::string>& background,
                          const WatermarkContext& wm, std::uint64_t seed,
                          const SynthesisConfig& cfg);

struct CanaryFailure {
  std::size_t index = 0;
  std::string source_doc_id;
  std::string stage;
  int attempts = 0;
  std::string message;
  std::string raw_output;
};

struct ProtectOptions {
  std::size_t count = 1;
  std::size_t queries_per_canary = 1;
  WatermarkKey key;
  SynthesisConfig synthesis;
  std::size_t vocab_max_size = 4096;  // used when no vocabulary is supplied
  std::string vocab_path;             // recorded in the registry
};

struct ProtectResult {
  std::vector<Document> corpus;  // originals plus canaries
  Registry registry;
  std::optional<Vocabulary> vocab;
  std::vector<CanaryFailure> failures;
  double mean_green_fraction = 0.0;
};

// Samples `count` source documents uniformly with replacement, runs the five
// stages per canary and inserts the canaries at seeded positions among the
// untouched originals. Without `vocab`, the vocabulary is built from the
// originals plus every synthesized description before any article is
// written. A canary whose stage fails is dropped and listed in `failures`.
ProtectResult ProtectDataset(const std::vector<Document>& docs,
                             const ProtectOptions& options, ChatService& chat,
                             const Vocabulary* vocab);

}  // namespace canary

#endif  // CANARY_CANARY_SYNTHESIS_H_
