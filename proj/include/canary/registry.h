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

#ifndef CANARY_REGISTRY_H_
#define CANARY_REGISTRY_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "canary/corpus.h"
#include "canary/watermark.h"
#include "json.hpp"

namespace canary {

struct DocumentAttributes {
  std::string topic;
  std::vector<std::string> subtopics;
  std::string writing_style;
  std::size_t min_words = 0;
  std::size_t max_words = 0;

  // Throws kValidation unless topic, style and one subtopic are present and
  // min_words <= max_words.
  void Validate() const;
  // "<min> - <max> words"
  std::string LengthRangeText() const;

  friend bool operator==(const DocumentAttributes&, const DocumentAttributes&) = default;
};

struct EntitySet {
  std::vector<std::string> real_entities;
  std::vector<std::string> fictional_entities;

  friend bool operator==(const EntitySet&, const EntitySet&) = default;
};

struct CanaryRecord {
  std::string canary_id;
  std::string text;
  std::string source_doc_id;
  DocumentAttributes attributes;
  std::string subtopic;  // the subtopic used for this canary
  EntitySet entities;
  std::vector<std::string> descriptions;
  std::vector<std::string> query_questions;
  std::string key_fingerprint;
  std::string created_at;
  std::uint64_t generation_seed = 0;
  std::size_t token_count = 0;
  double green_fraction = 0.0;

  friend bool operator==(const CanaryRecord&, const CanaryRecord&) = default;
};

struct VocabularyInfo {
  std::string path;
  std::size_t size = 0;
  std::string fingerprint;

  friend bool operator==(const VocabularyInfo&, const VocabularyInfo&) = default;
};

inline constexpr const char* kRegistryFormat = "canary-registry/v1";

// Everything the data owner keeps secret and needs at audit time.
struct Registry {
  WatermarkKey key;
  nlohmann::json config = nlohmann::json::object();
  VocabularyInfo vocabulary;
  std::vector<CanaryRecord> canaries;

  const CanaryRecord* Find(const std::string& canary_id) const;
  std::size_t QuestionCount() const;
};

nlohmann::json AttributesToJson(const DocumentAttributes& attrs);
DocumentAttributes AttributesFromJson(const nlohmann::json& j);
nlohmann::json CanaryToJson(const CanaryRecord& record);
CanaryRecord CanaryFromJson(const nlohmann::json& j);

// JSON object, keys sorted, two-space indent, trailing newline:
//   {"canaries": [CanaryRecord...], "config": {...}, "format":
//    "canary-registry/v1", "key_fingerprint": hex, "vocabulary": {"fingerprint",
//    "path", "size"}, "watermark_key": {"delta", "gamma", "seed": "<decimal>"}}
// The seed is a decimal string so that 64-bit values survive JSON readers
// that use doubles.
std::string SerializeRegistry(const Registry& registry);
Registry ParseRegistry(std::string_view contents);
void SaveRegistry(const Registry& registry, const std::filesystem::path& path);
Registry LoadRegistry(const std::filesystem::path& path);

// Consistency problems, empty when the registry is sound. When `corpus` is
// given, every canary must appear there with identical text.
std::vector<std::string> VerifyRegistry(const Registry& registry,
                                        const std::vector<Document>* corpus);

}  // namespace canary

#endif  // CANARY_REGISTRY_H_
