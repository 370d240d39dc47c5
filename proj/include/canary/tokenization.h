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

#ifndef CANARY_TOKENIZATION_H_
#define CANARY_TOKENIZATION_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace canary {

using TokenId = std::uint32_t;

inline constexpr std::string_view kUnknownToken = "<unk>";

// Dense id <-> string mapping. Ids are 0..size()-1; strings are unique.
//
// Immutable after construction.
class Vocabulary {
 public:
  // Throws kValidation on duplicates, empty tokens, or fewer than 2 tokens.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  std::optional<TokenId> Find(std::string_view token) const;
  std::optional<TokenId> unknown_id() const { return unknown_id_; }
  std::size_t max_token_bytes() const { return max_token_bytes_; }
  const std::vector<std::string>& tokens() const { return tokens_; }

  // sha256 over the serialized file representation, hex encoded.
  std::string Fingerprint() const;

  // Byte length of the longest token that is a prefix of `text`, or 0 when
  // none is. On success `*id` receives that token.
  std::size_t LongestPrefixMatch(std::string_view text, TokenId* id) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  struct TrieNode {
    std::vector<std::pair<unsigned char, std::uint32_t>> edges;  // sorted
    std::int64_t token = -1;
  };

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::vector<TrieNode> trie_;
  std::optional<TokenId> unknown_id_;
  std::size_t max_token_bytes_ = 0;
};

// A run of token ids. Ids are only meaningful against the vocabulary they
// were produced from.
struct TokenSequence {
  std::vector<TokenId> ids;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  std::span<const TokenId> view() const { return ids; }

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

// Vocabulary file: UTF-8, one token per line, line index = token id.
// Within a line, "\n", "\t" and "\\" are escapes for newline, tab and
// backslash; every other byte is literal (a leading space is part of the
// token). A trailing "\r" is dropped so CRLF files load unchanged.
Vocabulary LoadVocabulary(const std::filesystem::path& path);
Vocabulary ParseVocabulary(std::string_view contents);
void SaveVocabulary(const Vocabulary& vocab, const std::filesystem::path& path);
std::string SerializeVocabulary(const Vocabulary& vocab);

// Greedy longest-match segmentation. Bytes that start no vocabulary token
// are grouped (by UTF-8 character) into maximal spans, and each span becomes
// one unknown token. Throws kInvalidArgument if such a span occurs and the
// vocabulary has no "<unk>" entry.
TokenSequence Encode(std::string_view text, const Vocabulary& vocab);

// Concatenation of token strings. Throws kInvalidArgument on ids >= size().
std::string Decode(const TokenSequence& seq, const Vocabulary& vocab);
std::string Decode(std::span<const TokenId> ids, const Vocabulary& vocab);

// Builds a vocabulary from raw texts: "<unk>" at id 0, every printable
// ASCII character and every other character seen in the texts, then the most
// frequent whitespace-delimited words, each both with and without a leading
// space, until `max_size` entries. Ties in frequency break lexicographically.
Vocabulary BuildVocabulary(std::span<const std::string> texts,
                           std::size_t max_size);

}  // namespace canary

#endif  // CANARY_TOKENIZATION_H_
