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

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <exception>
#include <functional>
#include <regex>
#include <set>
#include <thread>

#include "canary/error.h"
#include "canary/generation.h"
#include "canary/hash.h"
#include "canary/rng.h"

namespace canary {
namespace {

using nlohmann::json;

std::string Lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool ContainsIgnoreCase(std::string_view haystack, std::string_view needle) {
  return Lower(haystack).find(Lower(needle)) != std::string::npos;
}

std::string Trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(begin, end - begin + 1));
}

std::string JoinComma(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  return out;
}

void RequireKeys(const json& obj, const std::set<std::string>& keys,
                 const std::string& what) {
  Require(obj.is_object(), ErrorKind::kValidation, what + ": output is not a JSON object");
  for (const auto& [k, v] : obj.items()) {
    Require(keys.count(k) == 1, ErrorKind::kValidation,
            what + ": unexpected key '" + k + "'");
  }
  for (const auto& k : keys) {
    Require(obj.contains(k), ErrorKind::kValidation, what + ": missing key '" + k + "'");
  }
}

std::vector<std::string> StringList(const json& value, const std::string& what) {
  Require(value.is_array(), ErrorKind::kValidation, what + " must be a list");
  std::vector<std::string> out;
  for (const auto& item : value) {
    Require(item.is_string(), ErrorKind::kValidation, what + " entries must be strings");
    std::string s = Trim(item.get<std::string>());
    Require(!s.empty(), ErrorKind::kValidation, what + " has an empty entry");
    out.push_back(std::move(s));
  }
  return out;
}

std::string RepairPrompt(const std::string& prompt, const std::string& raw,
                         const std::string& problem) {
  return prompt + "\n\n### Previous Output:\n\n" + raw + "\n\n### Problem:\n\n" +
         problem + "\n\nReturn a corrected answer that follows every requirement above.";
}

// Runs one stage: prompt, validate, optionally repair, retry.
template <typename T>
T RunStage(const std::string& stage, const std::string& prompt, double temperature,
           ChatService& chat, const SynthesisConfig& cfg,
           const std::function<T(const std::string&)>& accept) {
  std::string last_raw;
  std::string last_problem;
  for (int attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
    std::string user = prompt;
    for (int repair = 0; repair <= cfg.repair_prompts; ++repair) {
      ChatRequest request{cfg.system_prompt, user, temperature, cfg.max_output_tokens};
      const ChatResponse response = chat.Chat(request);
      last_raw = response.text;
      if (response.finish_reason != FinishReason::kComplete) {
        last_problem = std::string("the answer was ") +
                       FinishReasonName(response.finish_reason);
      } else {
        try {
          return accept(response.text);
        } catch (const SynthesisError&) {
          throw;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::kValidation) throw;
          last_problem = e.what();
        }
      }
      user = RepairPrompt(prompt, last_raw, last_problem);
    }
  }
  throw SynthesisError(stage, cfg.max_attempts, last_raw,
                       stage + " failed after " + std::to_string(cfg.max_attempts) +
                           " attempts: " + last_problem);
}

void RunIndexed(std::size_t n, int concurrency,
                const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, concurrency)));
  std::vector<std::exception_ptr> errors(n);
  auto body = [&](std::atomic<std::size_t>& next) {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::atomic<std::size_t> next{0};
  if (workers == 1) {
    body(next);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(body, std::ref(next));
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

void SynthesisConfig::Validate() const {
  Require(subtopics >= 1 && real_entities >= 1 && fictional_entities >= 1,
          ErrorKind::kValidation, "synthesis counts must be >= 1");
  Require(descriptions >= 1, ErrorKind::kValidation, "descriptions must be >= 1");
  Require(max_attempts >= 1 && repair_prompts >= 0 && article_attempts >= 1,
          ErrorKind::kValidation, "synthesis retry budgets must be positive");
  Require(tokens_per_word > 0.0, ErrorKind::kValidation, "tokens_per_word must be > 0");
  Require(writer_order >= 1 && writer_weights.size() == writer_order,
          ErrorKind::kValidation, "writer_weights needs one weight per order");
  for (double w : writer_weights) {
    Require(w > 0.0, ErrorKind::kValidation, "writer weights must be positive");
  }
  Require(max_concurrency >= 1, ErrorKind::kValidation, "max_concurrency must be >= 1");
}

json SynthesisConfig::ToJson() const {
  return {{"subtopics", subtopics},
          {"real_entities", real_entities},
          {"fictional_entities", fictional_entities},
          {"descriptions", descriptions},
          {"interactions", interactions},
          {"max_attempts", max_attempts},
          {"repair_prompts", repair_prompts},
          {"creative_temperature", creative_temperature},
          {"extraction_temperature", extraction_temperature},
          {"max_output_tokens", max_output_tokens},
          {"system_prompt", system_prompt},
          {"tokens_per_word", tokens_per_word},
          {"writer_order", writer_order},
          {"writer_weights", writer_weights},
          {"article_attempts", article_attempts},
          {"created_at", created_at},
          {"canary_id_prefix", canary_id_prefix},
          {"seed", std::to_string(seed)}};
}

SynthesisConfig SynthesisConfig::FromJson(const json& j) {
  Require(j.is_object(), ErrorKind::kValidation, "synthesis config must be an object");
  SynthesisConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "subtopics") {
        c.subtopics = v.get<std::size_t>();
      } else if (key == "real_entities") {
        c.real_entities = v.get<std::size_t>();
      } else if (key == "fictional_entities") {
        c.fictional_entities = v.get<std::size_t>();
      } else if (key == "descriptions") {
        c.descriptions = v.get<std::size_t>();
      } else if (key == "interactions") {
        c.interactions = v.get<std::size_t>();
      } else if (key == "max_attempts") {
        c.max_attempts = v.get<int>();
      } else if (key == "repair_prompts") {
        c.repair_prompts = v.get<int>();
      } else if (key == "creative_temperature") {
        c.creative_temperature = v.get<double>();
      } else if (key == "extraction_temperature") {
        c.extraction_temperature = v.get<double>();
      } else if (key == "max_output_tokens") {
        c.max_output_tokens = v.get<std::size_t>();
      } else if (key == "system_prompt") {
        c.system_prompt = v.get<std::string>();
      } else if (key == "tokens_per_word") {
        c.tokens_per_word = v.get<double>();
      } else if (key == "writer_order") {
        c.writer_order = v.get<std::size_t>();
      } else if (key == "writer_weights") {
        c.writer_weights = v.get<std::vector<double>>();
      } else if (key == "article_attempts") {
        c.article_attempts = v.get<int>();
      } else if (key == "created_at") {
        c.created_at = v.get<std::string>();
      } else if (key == "canary_id_prefix") {
        c.canary_id_prefix = v.get<std::string>();
      } else if (key == "seed") {
        c.seed = v.is_string() ? std::stoull(v.get<std::string>()) : v.get<std::uint64_t>();
      } else {
        Fail(ErrorKind::kValidation, "unknown synthesis field '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    Fail(ErrorKind::kValidation, std::string("bad synthesis config: ") + e.what());
  } catch (const std::logic_error& e) {
    Fail(ErrorKind::kValidation, std::string("bad synthesis seed: ") + e.what());
  }
  return c;
}

std::string AttributePrompt(const std::string& doc, std::size_t subtopics) {
  return "### Task Description:\n\n"
         "A reference text is given. You will carefully analyze the reference text "
         "and identify the following four key attributes.\n\n"
         "1. Topic: Read the reference text and provide a high-level theme or "
         "general category of the reference text.\n\n"
         "2. Subtopics: Based on the general topic, identify " +
         std::to_string(subtopics) +
         " distinct general sub-category.\n\n"
         "3. Writing Style: Analyze the overall writing style of the reference "
         "text.\n\n"
         "4. Length Range: Provide an estimate of the length range of the "
         "reference text in terms of word count.\n\n"
         "### Output Format Requirements:\n\n"
         "Output the results with the JSON format (with four keys: topic, "
         "subtopics, writing_styles and length_range) and nothing else, such as "
         "{\"topic\": \"\", \"subtopics\": [\"\", \"\", ...], \"writing_styles\": "
         "\"\", \"length_range\": \"m - n words\"}.\n\n"
         "### Reference Text:\n\n" +
         doc;
}

std::string EntityPrompt(const std::string& doc, const std::string& subtopic,
                         std::size_t real, std::size_t fictional) {
  return "### Task Description:\n\n"
         "1. Identify and list " +
         std::to_string(real) +
         " important entities mentioned within the reference text.\n\n"
         "2. Synthesize " +
         std::to_string(fictional) + " fictional entities that align with the " +
         subtopic +
         " topic.\n\n"
         "### Synthesized Entities Requirements:\n\n"
         "1. The synthesized entities should be creative and distinct.\n\n"
         "2. Ensure the synthesized entities are fictional and do not overlap "
         "with real-world entities.\n\n"
         "### Output Format Requirements:\n\n"
         "Output the results with the JSON format (with two keys: real_entity and "
         "fictional_entity) and nothing else, such as {\"real_entity\": "
         "[\"real_entity_1\", \"real_entity_2\"], \"fictional_entity\": "
         "[\"fictional_entity_1\", \"fictional_entity_2\", ...]}.\n\n"
         "### Reference Text:\n\n" +
         doc;
}

std::string DescriptionPrompt(const std::vector<std::string>& fictional,
                              const std::string& writing_style,
                              const std::string& subtopic,
                              std::size_t descriptions, std::size_t interactions) {
  std::string example;
  for (std::size_t i = 1; i <= descriptions + interactions; ++i) {
    if (i > 1) example += ", ";
    example += "\"description_" + std::to_string(i) + "\": \" \"";
  }
  return "### Task Description:\n\n"
         "1. Write " +
         std::to_string(descriptions) + " fictional descriptions in an " +
         writing_style + " style about the following entities: " +
         JoinComma(fictional) +
         ".\n\n"
         "2. Create " +
         std::to_string(interactions) +
         " fictional interactions and discuss how those specified entities "
         "fictionally interact within the context of the " +
         subtopic +
         " topic.\n\n"
         "### Synthesized Description Requirements:\n\n"
         "1. Create unique and imaginative content that has not been derived "
         "from existing material to avoid any issues with plagiarism.\n\n"
         "2. Use creativity to simulate realistic scenarios that fit within the "
         "project's thematic boundaries.\n\n"
         "3. Ensure factual accuracy where applicable, even in synthetic "
         "scenarios.\n\n"
         "4. Incorporate diverse and inclusive content.\n\n"
         "5. Do not mention \"fictional\" or any other indication that the "
         "entity or interaction is not real.\n\n"
         "### Output Format Requirements:\n\n"
         "Output the results with the JSON format, such as {" +
         example + "}.";
}

std::string ArticlePrompt(const std::vector<std::string>& descriptions,
                          const DocumentAttributes& attrs,
                          const std::string& subtopic) {
  std::string refs;
  for (std::size_t i = 0; i < descriptions.size(); ++i) {
    refs += "Description " + std::to_string(i + 1) + ": " + descriptions[i] + "\n\n";
  }
  return "### Task Description:\n\n"
         "You are a content creator. You will be given some reference "
         "descriptions. You will carefully understand the reference descriptions "
         "and synthesize a text that satisfies the following instructions.\n\n"
         "1. Generate a fictional text in the style of " +
         attrs.writing_style + " in the context of " + subtopic +
         " topic, with a length range of " + attrs.LengthRangeText() +
         " in terms of word count.\n\n"
         "2. Include the information in the given reference descriptions.\n\n"
         "### Output Format Requirements:\n\n"
         "Directly output the synthesized article in one paragraph and nothing "
         "else.\n\n"
         "### Reference Descriptions:\n\n" +
         Trim(refs);
}

std::string QueryPrompt(const std::string& canary_text,
                        const std::vector<std::string>& previous) {
  std::string prompt =
      "### Task Description:\n\n"
      "Given an article, generate a question that can only be answered by "
      "reading the document. The answer should be a longer detailed response, "
      "so avoid factual and simple yes/no questions and steer more towards "
      "questions that ask for opinions or explanations of events or topics "
      "described in the documents. Do not provide the answer, provide just the "
      "question.\n\n"
      "### Article:\n\n" +
      canary_text;
  if (!previous.empty()) {
    prompt += "\n\n### Questions Already Asked:\n\n";
    for (const auto& q : previous) prompt += "- " + q + "\n";
    prompt += "\nAsk a question that differs from all of these.";
  }
  return prompt;
}

json ExtractJsonObject(const std::string& raw) {
  const auto open = raw.find('{');
  const auto close = raw.rfind('}');
  Require(open != std::string::npos && close != std::string::npos && open < close,
          ErrorKind::kValidation, "output contains no JSON object");
  try {
    return json::parse(raw.substr(open, close - open + 1));
  } catch (const json::exception& e) {
    Fail(ErrorKind::kValidation, std::string("output is not valid JSON: ") + e.what());
  }
}

std::pair<std::size_t, std::size_t> ParseLengthRange(const std::string& text) {
  static const std::regex pattern(R"(^\s*(\d+)\s*(?:-|–|to)\s*(\d+)\s*words?\s*$)",
                                  std::regex::icase);
  std::smatch match;
  Require(std::regex_match(text, match, pattern), ErrorKind::kValidation,
          "length_range '" + text + "' is not of the form 'm - n words'");
  const std::size_t lo = std::stoul(match[1].str());
  const std::size_t hi = std::stoul(match[2].str());
  Require(lo >= 1 && lo <= hi, ErrorKind::kValidation,
          "length_range '" + text + "' has min > max or zero");
  return {lo, hi};
}

DocumentAttributes ParseAttributes(const std::string& raw) {
  const json obj = ExtractJsonObject(raw);
  RequireKeys(obj, {"topic", "subtopics", "writing_styles", "length_range"}, "attributes");
  Require(obj["topic"].is_string() && obj["writing_styles"].is_string() &&
              obj["length_range"].is_string(),
          ErrorKind::kValidation,
          "attributes: topic, writing_styles and length_range must be strings");
  DocumentAttributes attrs;
  attrs.topic = Trim(obj["topic"].get<std::string>());
  attrs.subtopics = StringList(obj["subtopics"], "subtopics");
  attrs.writing_style = Trim(obj["writing_styles"].get<std::string>());
  std::tie(attrs.min_words, attrs.max_words) =
      ParseLengthRange(obj["length_range"].get<std::string>());
  attrs.Validate();
  return attrs;
}

EntitySet ParseEntities(const std::string& raw) {
  const json obj = ExtractJsonObject(raw);
  RequireKeys(obj, {"real_entity", "fictional_entity"}, "entities");
  EntitySet entities;
  entities.real_entities = StringList(obj["real_entity"], "real_entity");
  entities.fictional_entities = StringList(obj["fictional_entity"], "fictional_entity");
  return entities;
}

std::vector<std::string> ParseDescriptions(const std::string& raw) {
  const json obj = ExtractJsonObject(raw);
  Require(obj.is_object() && !obj.empty(), ErrorKind::kValidation,
          "descriptions: empty output");
  static const std::regex key_pattern(R"(description_(\d+))");
  std::vector<std::pair<int, std::string>> numbered;
  for (const auto& [key, value] : obj.items()) {
    std::smatch match;
    Require(std::regex_match(key, match, key_pattern), ErrorKind::kValidation,
            "descriptions: unexpected key '" + key + "'");
    Require(value.is_string(), ErrorKind::kValidation,
            "descriptions: '" + key + "' is not a string");
    std::string text = Trim(value.get<std::string>());
    Require(!text.empty(), ErrorKind::kValidation, "descriptions: '" + key + "' is empty");
    numbered.emplace_back(std::stoi(match[1].str()), std::move(text));
  }
  std::sort(numbered.begin(), numbered.end());
  std::vector<std::string> out;
  for (std::size_t i = 0; i < numbered.size(); ++i) {
    Require(numbered[i].first == static_cast<int>(i + 1), ErrorKind::kValidation,
            "descriptions: keys must be description_1..description_" +
                std::to_string(numbered.size()));
    out.push_back(std::move(numbered[i].second));
  }
  return out;
}

std::string CheckEntities(const EntitySet& entities, const std::string& doc,
                          std::size_t real, std::size_t fictional) {
  if (entities.real_entities.size() != real) {
    return "expected " + std::to_string(real) + " real entities, got " +
           std::to_string(entities.real_entities.size());
  }
  if (entities.fictional_entities.size() != fictional) {
    return "expected " + std::to_string(fictional) + " fictional entities, got " +
           std::to_string(entities.fictional_entities.size());
  }
  std::set<std::string> real_lower;
  for (const auto& r : entities.real_entities) real_lower.insert(Lower(r));
  std::set<std::string> seen;
  for (const auto& f : entities.fictional_entities) {
    if (real_lower.count(Lower(f))) return "fictional entity '" + f + "' is also listed as real";
    if (doc.find(f) != std::string::npos) {
      return "fictional entity '" + f + "' appears in the reference text";
    }
    if (!seen.insert(Lower(f)).second) return "fictional entity '" + f + "' is repeated";
  }
  return "";
}

std::string CheckDescriptions(const std::vector<std::string>& descriptions,
                              const std::vector<std::string>& fictional,
                              std::size_t expected) {
  if (descriptions.size() != expected) {
    return "expected " + std::to_string(expected) + " descriptions, got " +
           std::to_string(descriptions.size());
  }
  for (std::size_t i = 0; i < descriptions.size(); ++i) {
    if (ContainsIgnoreCase(descriptions[i], "fictional")) {
      return "description_" + std::to_string(i + 1) + " uses the word \"fictional\"";
    }
  }
  for (const auto& entity : fictional) {
    const bool covered = std::any_of(descriptions.begin(), descriptions.end(),
                                     [&](const std::string& d) {
                                       return ContainsIgnoreCase(d, entity);
                                     });
    if (!covered) return "no description mentions '" + entity + "'";
  }
  if (fictional.size() >= 2) {
    const bool interaction =
        std::any_of(descriptions.begin(), descriptions.end(), [&](const std::string& d) {
          std::size_t mentioned = 0;
          for (const auto& e : fictional) mentioned += ContainsIgnoreCase(d, e) ? 1 : 0;
          return mentioned >= 2;
        });
    if (!interaction) return "no description relates two of the entities";
  }
  return "";
}

std::string CheckQuestion(const std::string& question,
                          const std::vector<std::string>& fictional,
                          const std::vector<std::string>& previous) {
  if (question.empty()) return "the question is empty";
  const bool anchored = std::any_of(fictional.begin(), fictional.end(), [&](const auto& e) {
    return ContainsIgnoreCase(question, e);
  });
  if (!anchored) return "the question names none of: " + JoinComma(fictional);
  if (std::find(previous.begin(), previous.end(), question) != previous.end()) {
    return "the question repeats an earlier one";
  }
  return "";
}

DocumentAttributes ExtractAttributes(const std::string& doc, ChatService& chat,
                                     const SynthesisConfig& cfg) {
  Require(!Trim(doc).empty(), ErrorKind::kInvalidArgument, "source document is empty");
  return RunStage<DocumentAttributes>(
      "extract_attributes", AttributePrompt(doc, cfg.subtopics),
      cfg.extraction_temperature, chat, cfg,
      [](const std::string& raw) { return ParseAttributes(raw); });
}

EntitySet CreateEntities(const std::string& doc, const std::string& subtopic,
                         ChatService& chat, const SynthesisConfig& cfg) {
  return RunStage<EntitySet>(
      "create_entities",
      EntityPrompt(doc, subtopic, cfg.real_entities, cfg.fictional_entities),
      cfg.creative_temperature, chat, cfg, [&](const std::string& raw) {
        EntitySet entities = ParseEntities(raw);
        const std::string problem =
            CheckEntities(entities, doc, cfg.real_entities, cfg.fictional_entities);
        Require(problem.empty(), ErrorKind::kValidation, problem);
        return entities;
      });
}

std::vector<std::string> SynthesizeDescriptions(const EntitySet& entities,
                                                const DocumentAttributes& attrs,
                                                const std::string& subtopic,
                                                ChatService& chat,
                                                const SynthesisConfig& cfg) {
  Require(!entities.fictional_entities.empty(), ErrorKind::kInvalidArgument,
          "descriptions need at least one fictional entity");
  const std::size_t expected = cfg.descriptions + cfg.interactions;
  return RunStage<std::vector<std::string>>(
      "synthesize_descriptions",
      DescriptionPrompt(entities.fictional_entities, attrs.writing_style, subtopic,
                        cfg.descriptions, cfg.interactions),
      cfg.creative_temperature, chat, cfg, [&](const std::string& raw) {
        auto descriptions = ParseDescriptions(raw);
        const std::string problem =
            CheckDescriptions(descriptions, entities.fictional_entities, expected);
        Require(problem.empty(), ErrorKind::kValidation, problem);
        return descriptions;
      });
}

std::string GenerateQuery(const std::string& canary_text,
                          const std::vector<std::string>& fictional,
                          const std::vector<std::string>& previous,
                          ChatService& chat, const SynthesisConfig& cfg) {
  Require(!Trim(canary_text).empty(), ErrorKind::kInvalidArgument,
          "cannot ask about an empty canary");
  return RunStage<std::string>(
      "generate_query", QueryPrompt(canary_text, previous), cfg.extraction_temperature,
      chat, cfg, [&](const std::string& raw) {
        std::string question = Trim(raw);
        const std::string problem = CheckQuestion(question, fictional, previous);
        Require(problem.empty(), ErrorKind::kValidation, problem);
        return question;
      });
}

std::size_t ArticleTokenBudget(const DocumentAttributes& attrs, double tokens_per_word) {
  const double mid = 0.5 * static_cast<double>(attrs.min_words + attrs.max_words);
  return static_cast<std::size_t>(std::max(1.0, std::round(mid * tokens_per_word)));
}

Article SynthesizeArticle(const std::vector<std::string>& descriptions,
                          const DocumentAttributes& attrs,
                          const std::vector<std::string>& fictional,
                          const std::vector<std::string>& background,
                          const WatermarkContext& wm, std::uint64_t seed,
                          const SynthesisConfig& cfg) {
  Require(wm.vocab != nullptr && wm.green != nullptr, ErrorKind::kInvalidArgument,
          "article synthesis needs a vocabulary and green list");
  Require(!descriptions.empty(), ErrorKind::kInvalidArgument,
          "article synthesis needs descriptions");
  const Vocabulary& vocab = *wm.vocab;

  std::vector<TokenSequence> training;
  for (const auto& d : descriptions) training.push_back(Encode(d, vocab));
  for (const auto& b : background) training.push_back(Encode(b, vocab));

  std::vector<std::shared_ptr<const LogitSource>> parts;
  for (std::size_t order = cfg.writer_order; order >= 1; --order) {
    parts.push_back(
        std::make_shared<NGramModel>(TrainNGram(training, vocab.size(), order, 0.0)));
  }
  std::vector<TokenId> banned;
  for (TokenId id = 0; id < vocab.size(); ++id) {
    const std::string& t = vocab.token(id);
    if (t.find_first_of("\n\r\t") != std::string::npos) banned.push_back(id);
  }
  if (auto unk = vocab.unknown_id()) banned.push_back(*unk);
  const InterpolatedLogitSource writer(parts, cfg.writer_weights, banned);

  const std::size_t budget = ArticleTokenBudget(attrs, cfg.tokens_per_word);
  const double lo = 0.5 * static_cast<double>(attrs.min_words) * cfg.tokens_per_word;
  const double hi = 2.0 * static_cast<double>(attrs.max_words) * cfg.tokens_per_word;

  std::string last_text;
  std::string problem;
  for (int attempt = 1; attempt <= cfg.article_attempts; ++attempt) {
    SamplerConfig sampler;
    sampler.max_tokens = budget;
    sampler.rng_seed = DeriveSeed(seed, static_cast<std::uint64_t>(attempt));
    const TokenSequence draft =
        GenerateWatermarked(writer, wm.key, *wm.green, sampler, TokenSequence{});
    std::string text = Trim(Decode(draft, vocab));
    const auto end = text.find_last_of(".!?");
    if (end != std::string::npos && static_cast<double>(end + 1) >= 0.7 * text.size()) {
      text.resize(end + 1);
    }
    last_text = text;
    const TokenSequence tokens = Encode(text, vocab);
    problem.clear();
    for (const auto& entity : fictional) {
      if (text.find(entity) == std::string::npos) {
        problem = "article does not mention '" + entity + "'";
        break;
      }
    }
    if (problem.empty() &&
        (static_cast<double>(tokens.size()) < lo || static_cast<double>(tokens.size()) > hi)) {
      problem = "article length " + std::to_string(tokens.size()) +
                " tokens is outside the tolerated range";
    }
    if (!problem.empty() || tokens.empty()) continue;
    Article article;
    article.text = std::move(text);
    article.seed = sampler.rng_seed;
    article.token_count = tokens.size();
    article.green_fraction = GreenFraction(tokens, *wm.green);
    article.attempts = attempt;
    return article;
  }
  throw SynthesisError("synthesize_article", cfg.article_attempts, last_text,
                       "synthesize_article failed after " +
                           std::to_string(cfg.article_attempts) + " drafts: " + problem);
}

ProtectResult ProtectDataset(const std::vector<Document>& docs,
                             const ProtectOptions& options, ChatService& chat,
                             const Vocabulary* vocab) {
  Require(!docs.empty(), ErrorKind::kValidation, "protect needs a nonempty corpus");
  Require(options.count >= 1, ErrorKind::kValidation, "canary count must be >= 1");
  Require(options.queries_per_canary >= 1, ErrorKind::kValidation,
          "queries_per_canary must be >= 1");
  options.key.Validate();
  const SynthesisConfig& cfg = options.synthesis;
  cfg.Validate();

  const std::size_t n = options.count;
  Rng source_rng(DeriveSeed(cfg.seed, 0x736f75726365ULL));
  std::vector<std::size_t> source(n);
  for (auto& s : source) s = source_rng.NextBelow(docs.size());

  struct Draft {
    DocumentAttributes attrs;
    std::string subtopic;
    EntitySet entities;
    std::vector<std::string> descriptions;
    Article article;
    std::vector<std::string> questions;
    std::optional<CanaryFailure> failure;
  };
  std::vector<Draft> drafts(n);
  auto record_failure = [&](std::size_t i, const SynthesisError& e) {
    drafts[i].failure = CanaryFailure{i, docs[source[i]].id, e.stage(), e.attempts(),
                                      e.what(), e.raw_output()};
  };

  RunIndexed(n, cfg.max_concurrency, [&](std::size_t i) {
    const Document& doc = docs[source[i]];
    Draft& d = drafts[i];
    try {
      d.attrs = ExtractAttributes(doc.text, chat, cfg);
      Rng pick(DeriveSeed(cfg.seed, 0x7375620000000000ULL + i));
      d.subtopic = d.attrs.subtopics[pick.NextBelow(d.attrs.subtopics.size())];
      d.entities = CreateEntities(doc.text, d.subtopic, chat, cfg);
      d.descriptions = SynthesizeDescriptions(d.entities, d.attrs, d.subtopic, chat, cfg);
    } catch (const SynthesisError& e) {
      record_failure(i, e);
    }
  });

  ProtectResult result;
  if (vocab) {
    result.vocab.emplace(*vocab);
  } else {
    std::vector<std::string> texts = CorpusTexts(docs);
    for (const auto& d : drafts) {
      texts.insert(texts.end(), d.descriptions.begin(), d.descriptions.end());
    }
    result.vocab.emplace(BuildVocabulary(texts, options.vocab_max_size));
  }
  const GreenList green = DeriveGreenList(options.key, result.vocab->size());
  const WatermarkContext wm{&*result.vocab, options.key, &green};

  RunIndexed(n, cfg.max_concurrency, [&](std::size_t i) {
    Draft& d = drafts[i];
    if (d.failure) return;
    try {
      d.article = SynthesizeArticle(d.descriptions, d.attrs, d.entities.fictional_entities,
                                    {docs[source[i]].text}, wm,
                                    DeriveSeed(cfg.seed, 0x6172740000000000ULL + i), cfg);
      for (std::size_t q = 0; q < options.queries_per_canary; ++q) {
        d.questions.push_back(
            GenerateQuery(d.article.text, d.entities.fictional_entities, d.questions, chat, cfg));
      }
    } catch (const SynthesisError& e) {
      record_failure(i, e);
    }
  });

  Registry& registry = result.registry;
  registry.key = options.key;
  registry.config = {{"synthesis", cfg.ToJson()},
                     {"count", options.count},
                     {"queries_per_canary", options.queries_per_canary},
                     {"source_doc_ids", json::array()}};
  for (std::size_t i = 0; i < n; ++i) {
    registry.config["source_doc_ids"].push_back(docs[source[i]].id);
  }
  registry.vocabulary = {options.vocab_path, result.vocab->size(), result.vocab->Fingerprint()};

  std::set<std::string> original_ids;
  for (const auto& doc : docs) original_ids.insert(doc.id);
  const std::string fingerprint = options.key.Fingerprint();
  std::vector<Document> canary_docs;
  double green_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Draft& d = drafts[i];
    if (d.failure) {
      result.failures.push_back(*d.failure);
      continue;
    }
    CanaryRecord r;
    for (std::uint64_t salt = 0;; ++salt) {
      r.canary_id = cfg.canary_id_prefix +
                    Sha256Hex(fingerprint + ":" + std::to_string(cfg.seed) + ":" +
                              std::to_string(i) + ":" + std::to_string(salt))
                        .substr(0, 16);
      if (!original_ids.count(r.canary_id)) break;
    }
    r.text = d.article.text;
    r.source_doc_id = docs[source[i]].id;
    r.attributes = d.attrs;
    r.subtopic = d.subtopic;
    r.entities = d.entities;
    r.descriptions = d.descriptions;
    r.query_questions = d.questions;
    r.key_fingerprint = fingerprint;
    r.created_at = cfg.created_at;
    r.generation_seed = d.article.seed;
    r.token_count = d.article.token_count;
    r.green_fraction = d.article.green_fraction;
    green_sum += r.green_fraction;
    canary_docs.push_back(Document::Make(r.canary_id, r.text, docs[source[i]].meta));
    registry.canaries.push_back(std::move(r));
  }
  if (!registry.canaries.empty()) {
    result.mean_green_fraction = green_sum / static_cast<double>(registry.canaries.size());
  }

  // Each canary goes in front of a seeded original position (or at the end).
  Rng place(DeriveSeed(cfg.seed, 0x706c616365ULL));
  std::vector<std::vector<Document>> slots(docs.size() + 1);
  for (auto& c : canary_docs) slots[place.NextBelow(docs.size() + 1)].push_back(std::move(c));
  result.corpus.reserve(docs.size() + canary_docs.size());
  for (std::size_t pos = 0; pos <= docs.size(); ++pos) {
    for (auto& c : slots[pos]) result.corpus.push_back(std::move(c));
    if (pos < docs.size()) result.corpus.push_back(docs[pos]);
  }
  return result;
}

}  // namespace canary
