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

#include "canary/tokenization.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "canary/error.h"
#include "canary/hash.h"

namespace canary {
namespace {

std::string UnescapeLine(std::string_view line, std::size_t line_number) {
  std::string out;
  out.reserve(line.size());
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] != '\\') {
      out.push_back(line[i]);
      continue;
    }
    if (i + 1 == line.size()) {
      Fail(ErrorKind::kValidation, "vocabulary line " +
                                       std::to_string(line_number) +
                                       ": dangling backslash");
    }
    switch (line[++i]) {
      case 'n': out.push_back('\n'); break;
      case 't': out.push_back('\t'); break;
      case '\\': out.push_back('\\'); break;
      default:
        Fail(ErrorKind::kValidation, "vocabulary line " +
                                         std::to_string(line_number) +
                                         ": unknown escape");
    }
  }
  return out;
}

std::string EscapeToken(std::string_view token) {
  std::string out;
  out.reserve(token.size());
  for (char c : token) {
    switch (c) {
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      case '\\': out += "\\\\"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::size_t Utf8CharLength(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 1;  // stray continuation or invalid byte
}

}  // namespace

Vocabulary::Vocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  Require(tokens_.size() >= 2, ErrorKind::kValidation,
          "vocabulary needs at least 2 tokens, got " +
              std::to_string(tokens_.size()));
  index_.reserve(tokens_.size());
  trie_.emplace_back();
  for (std::size_t id = 0; id < tokens_.size(); ++id) {
    const std::string& token = tokens_[id];
    Require(!token.empty(), ErrorKind::kValidation,
            "vocabulary token " + std::to_string(id) + " is empty");
    auto [it, inserted] = index_.emplace(token, static_cast<TokenId>(id));
    if (!inserted) {
      Fail(ErrorKind::kValidation,
           "duplicate vocabulary token '" + token + "' at line " +
               std::to_string(id + 1) + " (first seen at line " +
               std::to_string(it->second + 1) + ")");
    }
    max_token_bytes_ = std::max(max_token_bytes_, token.size());

    std::uint32_t node = 0;
    for (unsigned char c : token) {
      auto& edges = trie_[node].edges;
      auto pos = std::lower_bound(
          edges.begin(), edges.end(), c,
          [](const auto& edge, unsigned char key) { return edge.first < key; });
      if (pos != edges.end() && pos->first == c) {
        node = pos->second;
      } else {
        const auto next = static_cast<std::uint32_t>(trie_.size());
        edges.insert(pos, {c, next});
        trie_.emplace_back();  // invalidates `edges`
        node = next;
      }
    }
    trie_[node].token = static_cast<std::int64_t>(id);
  }
  if (auto it = index_.find(std::string(kUnknownToken)); it != index_.end()) {
    unknown_id_ = it->second;
  }
}

const std::string& Vocabulary::token(TokenId id) const {
  Require(id < tokens_.size(), ErrorKind::kInvalidArgument,
          "token id " + std::to_string(id) + " out of range for vocabulary of " +
              std::to_string(tokens_.size()));
  return tokens_[id];
}

std::optional<TokenId> Vocabulary::Find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::LongestPrefixMatch(std::string_view text,
                                           TokenId* id) const {
  std::uint32_t node = 0;
  std::size_t best = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto& edges = trie_[node].edges;
    const auto c = static_cast<unsigned char>(text[i]);
    auto pos = std::lower_bound(
        edges.begin(), edges.end(), c,
        [](const auto& edge, unsigned char key) { return edge.first < key; });
    if (pos == edges.end() || pos->first != c) break;
    node = pos->second;
    if (trie_[node].token >= 0) {
      best = i + 1;
      *id = static_cast<TokenId>(trie_[node].token);
    }
  }
  return best;
}

std::string Vocabulary::Fingerprint() const {
  return Sha256Hex(SerializeVocabulary(*this));
}

Vocabulary ParseVocabulary(std::string_view contents) {
  Require(!contents.empty(), ErrorKind::kValidation, "vocabulary file is empty");
  std::vector<std::string> tokens;
  std::size_t start = 0;
  std::size_t line_number = 0;
  while (start < contents.size()) {
    std::size_t end = contents.find('\n', start);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++line_number;
    if (line.empty()) {
      Fail(ErrorKind::kValidation,
           "vocabulary line " + std::to_string(line_number) + " is empty");
    }
    tokens.push_back(UnescapeLine(line, line_number));
    start = end + 1;
  }
  return Vocabulary(std::move(tokens));
}

Vocabulary LoadVocabulary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorKind::kNotFound,
          "cannot open vocabulary file " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return ParseVocabulary(buffer.str());
}

std::string SerializeVocabulary(const Vocabulary& vocab) {
  std::string out;
  for (const auto& token : vocab.tokens()) {
    out += EscapeToken(token);
    out.push_back('\n');
  }
  return out;
}

void SaveVocabulary(const Vocabulary& vocab,
                    const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.good(), ErrorKind::kIo,
          "cannot write vocabulary file " + path.string());
  out << SerializeVocabulary(vocab);
  Require(out.good(), ErrorKind::kIo, "write failed: " + path.string());
}

TokenSequence Encode(std::string_view text, const Vocabulary& vocab) {
  TokenSequence seq;
  seq.ids.reserve(text.size() / 3 + 1);
  bool in_unknown_span = false;
  std::size_t pos = 0;
  while (pos < text.size()) {
    TokenId id = 0;
    const std::size_t matched = vocab.LongestPrefixMatch(text.substr(pos), &id);
    if (matched > 0) {
      seq.ids.push_back(id);
      pos += matched;
      in_unknown_span = false;
      continue;
    }
    if (!vocab.unknown_id()) {
      Fail(ErrorKind::kInvalidArgument,
           "text contains bytes not covered by the vocabulary at offset " +
               std::to_string(pos) + " and the vocabulary has no <unk> entry");
    }
    if (!in_unknown_span) seq.ids.push_back(*vocab.unknown_id());
    in_unknown_span = true;
    pos += std::min(Utf8CharLength(static_cast<unsigned char>(text[pos])),
                    text.size() - pos);
  }
  return seq;
}

std::string Decode(std::span<const TokenId> ids, const Vocabulary& vocab) {
  std::string out;
  for (TokenId id : ids) out += vocab.token(id);
  return out;
}

std::string Decode(const TokenSequence& seq, const Vocabulary& vocab) {
  return Decode(seq.view(), vocab);
}

Vocabulary BuildVocabulary(std::span<const std::string> texts,
                           std::size_t max_size) {
  std::vector<std::string> tokens{std::string(kUnknownToken)};
  std::unordered_map<std::string, bool> present{{tokens[0], true}};
  auto add = [&](const std::string& token) {
    if (tokens.size() >= max_size && max_size != 0) return;
    if (present.emplace(token, true).second) tokens.push_back(token);
  };
  for (char c = 0x20; c < 0x7f; ++c) add(std::string(1, c));
  add("\n");
  add("\t");

  std::map<std::string, std::size_t> word_counts;
  for (const auto& text : texts) {
    std::size_t i = 0;
    while (i < text.size()) {
      const std::size_t len =
          std::min(Utf8CharLength(static_cast<unsigned char>(text[i])),
                   text.size() - i);
      add(text.substr(i, len));
      i += len;
    }
    std::istringstream words(text);
    std::string word;
    while (words >> word) ++word_counts[word];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(word_counts.begin(),
                                                          word_counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [word, count] : ranked) {
    add(" " + word);
    add(word);
  }
  return Vocabulary(std::move(tokens));
}

}  // namespace canary
