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

#include "canary/registry.h"

#include <map>
#include <set>

#include "canary/error.h"

namespace canary {

using nlohmann::json;

void DocumentAttributes::Validate() const {
  Require(!topic.empty(), ErrorKind::kValidation, "attributes: empty topic");
  Require(!writing_style.empty(), ErrorKind::kValidation,
          "attributes: empty writing style");
  Require(!subtopics.empty(), ErrorKind::kValidation, "attributes: no subtopics");
  for (const auto& s : subtopics) {
    Require(!s.empty(), ErrorKind::kValidation, "attributes: empty subtopic");
  }
  Require(min_words >= 1 && min_words <= max_words, ErrorKind::kValidation,
          "attributes: invalid length range " + LengthRangeText());
}

std::string DocumentAttributes::LengthRangeText() const {
  return std::to_string(min_words) + " - " + std::to_string(max_words) + " words";
}

const CanaryRecord* Registry::Find(const std::string& canary_id) const {
  for (const auto& c : canaries) {
    if (c.canary_id == canary_id) return &c;
  }
  return nullptr;
}

std::size_t Registry::QuestionCount() const {
  std::size_t n = 0;
  for (const auto& c : canaries) n += c.query_questions.size();
  return n;
}

json AttributesToJson(const DocumentAttributes& attrs) {
  return {{"topic", attrs.topic},
          {"subtopics", attrs.subtopics},
          {"writing_style", attrs.writing_style},
          {"min_words", attrs.min_words},
          {"max_words", attrs.max_words}};
}

DocumentAttributes AttributesFromJson(const json& j) {
  DocumentAttributes attrs;
  attrs.topic = j.at("topic").get<std::string>();
  attrs.subtopics = j.at("subtopics").get<std::vector<std::string>>();
  attrs.writing_style = j.at("writing_style").get<std::string>();
  attrs.min_words = j.at("min_words").get<std::size_t>();
  attrs.max_words = j.at("max_words").get<std::size_t>();
  return attrs;
}

json CanaryToJson(const CanaryRecord& r) {
  return {{"canary_id", r.canary_id},
          {"text", r.text},
          {"source_doc_id", r.source_doc_id},
          {"attributes", AttributesToJson(r.attributes)},
          {"subtopic", r.subtopic},
          {"entities",
           {{"real", r.entities.real_entities}, {"fictional", r.entities.fictional_entities}}},
          {"descriptions", r.descriptions},
          {"query_questions", r.query_questions},
          {"key_fingerprint", r.key_fingerprint},
          {"created_at", r.created_at},
          {"generation_seed", std::to_string(r.generation_seed)},
          {"token_count", r.token_count},
          {"green_fraction", r.green_fraction}};
}

CanaryRecord CanaryFromJson(const json& j) {
  CanaryRecord r;
  r.canary_id = j.at("canary_id").get<std::string>();
  r.text = j.at("text").get<std::string>();
  r.source_doc_id = j.at("source_doc_id").get<std::string>();
  r.attributes = AttributesFromJson(j.at("attributes"));
  r.subtopic = j.at("subtopic").get<std::string>();
  r.entities.real_entities = j.at("entities").at("real").get<std::vector<std::string>>();
  r.entities.fictional_entities =
      j.at("entities").at("fictional").get<std::vector<std::string>>();
  r.descriptions = j.at("descriptions").get<std::vector<std::string>>();
  r.query_questions = j.at("query_questions").get<std::vector<std::string>>();
  r.key_fingerprint = j.at("key_fingerprint").get<std::string>();
  r.created_at = j.at("created_at").get<std::string>();
  r.generation_seed = std::stoull(j.at("generation_seed").get<std::string>());
  r.token_count = j.at("token_count").get<std::size_t>();
  r.green_fraction = j.at("green_fraction").get<double>();
  return r;
}

std::string SerializeRegistry(const Registry& registry) {
  json canaries = json::array();
  for (const auto& c : registry.canaries) canaries.push_back(CanaryToJson(c));
  const json doc = {
      {"format", kRegistryFormat},
      {"watermark_key",
       {{"seed", std::to_string(registry.key.seed)},
        {"gamma", registry.key.gamma},
        {"delta", registry.key.delta}}},
      {"key_fingerprint", registry.key.Fingerprint()},
      {"config", registry.config},
      {"vocabulary",
       {{"path", registry.vocabulary.path},
        {"size", registry.vocabulary.size},
        {"fingerprint", registry.vocabulary.fingerprint}}},
      {"canaries", canaries}};
  return doc.dump(2) + "\n";
}

Registry ParseRegistry(std::string_view contents) {
  Registry registry;
  try {
    const json doc = json::parse(contents);
    Require(doc.value("format", std::string()) == kRegistryFormat,
            ErrorKind::kValidation, "not a canary registry (format field)");
    const json& key = doc.at("watermark_key");
    registry.key.seed = std::stoull(key.at("seed").get<std::string>());
    registry.key.gamma = key.at("gamma").get<double>();
    registry.key.delta = key.at("delta").get<double>();
    registry.key.Validate();
    Require(doc.at("key_fingerprint").get<std::string>() == registry.key.Fingerprint(),
            ErrorKind::kValidation, "registry key fingerprint does not match its key");
    registry.config = doc.at("config");
    const json& vocab = doc.at("vocabulary");
    registry.vocabulary.path = vocab.at("path").get<std::string>();
    registry.vocabulary.size = vocab.at("size").get<std::size_t>();
    registry.vocabulary.fingerprint = vocab.at("fingerprint").get<std::string>();
    for (const json& c : doc.at("canaries")) registry.canaries.push_back(CanaryFromJson(c));
  } catch (const json::exception& e) {
    Fail(ErrorKind::kValidation, std::string("malformed registry: ") + e.what());
  } catch (const std::invalid_argument&) {
    Fail(ErrorKind::kValidation, "malformed registry: bad integer");
  } catch (const std::out_of_range&) {
    Fail(ErrorKind::kValidation, "malformed registry: integer out of range");
  }
  return registry;
}

void SaveRegistry(const Registry& registry, const std::filesystem::path& path) {
  WriteTextFile(path, SerializeRegistry(registry));
}

Registry LoadRegistry(const std::filesystem::path& path) {
  return ParseRegistry(ReadTextFile(path));
}

std::vector<std::string> VerifyRegistry(const Registry& registry,
                                        const std::vector<Document>* corpus) {
  std::vector<std::string> issues;
  const std::string fingerprint = registry.key.Fingerprint();
  std::set<std::string> ids;
  for (const auto& c : registry.canaries) {
    if (!ids.insert(c.canary_id).second) {
      issues.push_back("duplicate canary id " + c.canary_id);
    }
    if (c.key_fingerprint != fingerprint) {
      issues.push_back(c.canary_id + ": key fingerprint differs from registry key");
    }
    if (c.query_questions.empty()) issues.push_back(c.canary_id + ": no query questions");
    if (c.text.empty()) issues.push_back(c.canary_id + ": empty text");
  }
  if (corpus) {
    std::map<std::string, const Document*> by_id;
    for (const auto& doc : *corpus) by_id[doc.id] = &doc;
    for (const auto& c : registry.canaries) {
      auto it = by_id.find(c.canary_id);
      if (it == by_id.end()) {
        issues.push_back(c.canary_id + ": missing from corpus");
      } else if (it->second->text != c.text) {
        issues.push_back(c.canary_id + ": corpus text differs from registry");
      }
    }
  }
  return issues;
}

}  // namespace canary
