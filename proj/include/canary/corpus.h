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

#ifndef CANARY_CORPUS_H_
#define CANARY_CORPUS_H_

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace canary {

// One corpus record. `raw_line` keeps the exact input bytes so that
// rewriting a corpus never disturbs original documents.
struct Document {
  std::string id;
  std::string text;
  nlohmann::json meta = nlohmann::json::object();
  std::string raw_line;

  // Builds a record whose raw line is the compact JSON of {id, meta, text}.
  static Document Make(std::string id, std::string text,
                       nlohmann::json meta = nlohmann::json::object());
};

// Line-delimited JSON, one object per line with string "id", string "text"
// and optional object "meta". Other keys are preserved in raw_line. Blank
// lines are skipped; ids must be unique. Errors name the line number.
std::vector<Document> ParseCorpus(std::string_view contents);
std::vector<Document> LoadCorpus(const std::filesystem::path& path);

// Writes raw_line of each document followed by '\n'.
std::string SerializeCorpus(const std::vector<Document>& docs);
void SaveCorpus(const std::vector<Document>& docs,
                const std::filesystem::path& path);

std::vector<std::string> CorpusTexts(const std::vector<Document>& docs);

std::string ReadTextFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, std::string_view contents);
void AppendTextFile(const std::filesystem::path& path, std::string_view contents);

}  // namespace canary

#endif  // CANARY_CORPUS_H_
