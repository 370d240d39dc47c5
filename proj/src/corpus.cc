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

#include "canary/corpus.h"

#include <fstream>
#include <set>
#include <sstream>

#include "canary/error.h"

namespace canary {

using nlohmann::json;

Document Document::Make(std::string id, std::string text, json meta) {
  Document doc;
  doc.id = std::move(id);
  doc.text = std::move(text);
  doc.meta = std::move(meta);
  doc.raw_line = json{{"id", doc.id}, {"meta", doc.meta}, {"text", doc.text}}.dump();
  return doc;
}

std::vector<Document> ParseCorpus(std::string_view contents) {
  std::vector<Document> docs;
  std::set<std::string> ids;
  std::size_t line_number = 0;
  std::size_t start = 0;
  while (start < contents.size()) {
    std::size_t end = contents.find('\n', start);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(start, end - start);
    start = end + 1;
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const std::string where = "corpus line " + std::to_string(line_number);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      Fail(ErrorKind::kValidation, where + ": invalid JSON: " + e.what());
    }
    Require(record.is_object(), ErrorKind::kValidation, where + ": not an object");
    Require(record.contains("id") && record["id"].is_string(), ErrorKind::kValidation,
            where + ": missing string field 'id'");
    Require(record.contains("text") && record["text"].is_string(),
            ErrorKind::kValidation, where + ": missing string field 'text'");
    Document doc;
    doc.id = record["id"].get<std::string>();
    doc.text = record["text"].get<std::string>();
    if (record.contains("meta")) {
      Require(record["meta"].is_object(), ErrorKind::kValidation,
              where + ": 'meta' must be an object");
      doc.meta = record["meta"];
    }
    Require(!doc.id.empty(), ErrorKind::kValidation, where + ": empty id");
    Require(ids.insert(doc.id).second, ErrorKind::kValidation,
            where + ": duplicate document id '" + doc.id + "'");
    doc.raw_line = std::string(line);
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<Document> LoadCorpus(const std::filesystem::path& path) {
  return ParseCorpus(ReadTextFile(path));
}

std::string SerializeCorpus(const std::vector<Document>& docs) {
  std::string out;
  for (const auto& doc : docs) {
    out += doc.raw_line;
    out += '\n';
  }
  return out;
}

void SaveCorpus(const std::vector<Document>& docs,
                const std::filesystem::path& path) {
  WriteTextFile(path, SerializeCorpus(docs));
}

std::vector<std::string> CorpusTexts(const std::vector<Document>& docs) {
  std::vector<std::string> texts;
  texts.reserve(docs.size());
  for (const auto& doc : docs) texts.push_back(doc.text);
  return texts;
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorKind::kNotFound, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void WriteTextFile(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  out << contents;
  Require(out.good(), ErrorKind::kIo, "write failed: " + path.string());
}

void AppendTextFile(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  Require(out.good(), ErrorKind::kIo, "cannot append to " + path.string());
  out << contents;
  Require(out.good(), ErrorKind::kIo, "write failed: " + path.string());
}

}  // namespace canary
