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

#ifndef CANARY_RETRIEVAL_H_
#define CANARY_RETRIEVAL_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "canary/corpus.h"

namespace canary {

class EmbeddingService;

// Text -> unit vector of a fixed dimension.
class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<double> Embed(const std::string& text) = 0;
};

// Signed feature hashing of lowercased word unigrams, L2-normalized.
// Words are maximal runs of ASCII letters and digits plus any byte >= 0x80.
// Word w adds sign(w) to bucket(w), both derived from StableHash with the
// seed. Throws kInvalidArgument for text without words.
class HashingEmbedder : public Embedder {
 public:
  HashingEmbedder(std::size_t dimension, std::uint64_t seed);
  std::vector<double> Embed(const std::string& text) override;
  std::size_t dimension() const { return dimension_; }

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

// Adapts the gateway embedding endpoint.
class ServiceEmbedder : public Embedder {
 public:
  explicit ServiceEmbedder(EmbeddingService& service) : service_(service) {}
  std::vector<double> Embed(const std::string& text) override;

 private:
  EmbeddingService& service_;
};

std::vector<std::string> EmbeddingWords(std::string_view text);

struct Hit {
  std::string doc_id;
  double score = 0.0;

  friend bool operator==(const Hit&, const Hit&) = default;
};

struct RetrievalResult {
  std::vector<Hit> hits;  // score descending, ties by ascending doc_id
};

// Exact inner-product index over unit vectors.
class VectorIndex {
 public:
  explicit VectorIndex(std::size_t dimension);

  // Throws kValidation for a wrong dimension, a norm outside 1 +- 1e-6, or a
  // duplicate id (the message names it).
  void Add(const std::string& doc_id, std::span<const double> vector);

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return ids_.size(); }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  std::span<const double> vector(std::size_t i) const {
    return {data_.data() + i * dimension_, dimension_};
  }
  bool Contains(const std::string& doc_id) const { return positions_.count(doc_id) > 0; }

  // Exhaustive top-k by dot product. Throws kInvalidArgument for k == 0, an
  // empty index or a query of the wrong dimension.
  RetrievalResult Search(std::span<const double> query, std::size_t k) const;

  friend bool operator==(const VectorIndex& a, const VectorIndex& b) {
    return a.dimension_ == b.dimension_ && a.ids_ == b.ids_ && a.data_ == b.data_;
  }

 private:
  std::size_t dimension_;
  std::vector<std::string> ids_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> positions_;
};

// Text format:
//   # canary-index v1 dim=<d> count=<n>
//   <doc_id>\t<x_1> <x_2> ... <x_d>      %.17g, one line per entry
// Ids must not contain tabs or newlines.
std::string SerializeIndex(const VectorIndex& index);
VectorIndex ParseIndex(std::string_view contents);
void SaveIndex(const VectorIndex& index, const std::filesystem::path& path);
VectorIndex LoadIndex(const std::filesystem::path& path);

struct IndexBuild {
  VectorIndex index;
  std::vector<std::pair<std::string, std::string>> failures;  // (doc id, reason)
};

// One entry per document that embeds; failures are listed. Throws
// kValidation when no document embeds or ids repeat.
IndexBuild BuildIndex(const std::vector<Document>& docs, Embedder& embedder);

RetrievalResult Retrieve(const VectorIndex& index, const std::string& query,
                         std::size_t k, Embedder& embedder);

struct AccuracyResult {
  double accuracy = 0.0;
  std::size_t hits = 0;
  std::size_t total = 0;
  std::vector<std::string> unknown_ids;  // expected ids absent from the index
};

// Fraction of (query, expected id) pairs whose id is among the top-k.
AccuracyResult TargetRetrievalAccuracy(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const VectorIndex& index, std::size_t k, Embedder& embedder);

}  // namespace canary

#endif  // CANARY_RETRIEVAL_H_
