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

#include "canary/retrieval.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "canary/error.h"
#include "canary/llm_gateway.h"
#include "canary/rng.h"

namespace canary {

std::vector<std::string> EmbeddingWords(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

HashingEmbedder::HashingEmbedder(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  Require(dimension >= 8, ErrorKind::kInvalidArgument,
          "hashing embedder dimension must be >= 8");
}

std::vector<double> HashingEmbedder::Embed(const std::string& text) {
  const auto words = EmbeddingWords(text);
  Require(!words.empty(), ErrorKind::kInvalidArgument,
          "cannot embed text without words");
  std::vector<double> v(dimension_, 0.0);
  for (const auto& w : words) {
    const std::uint64_t h = StableHash(w, seed_);
    v[h % dimension_] += (Mix64(h) & 1) ? 1.0 : -1.0;
  }
  double norm_sq = 0.0;
  for (double x : v) norm_sq += x * x;
  if (norm_sq == 0.0) {
    // Every bucket cancelled; fall back to the first word's bucket.
    v[StableHash(words[0], seed_) % dimension_] = 1.0;
    return v;
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  for (double& x : v) x *= inv;
  return v;
}

std::vector<double> ServiceEmbedder::Embed(const std::string& text) {
  return service_.Embed(text);
}

VectorIndex::VectorIndex(std::size_t dimension) : dimension_(dimension) {
  Require(dimension >= 1, ErrorKind::kInvalidArgument, "index dimension must be >= 1");
}

void VectorIndex::Add(const std::string& doc_id, std::span<const double> vector) {
  Require(vector.size() == dimension_, ErrorKind::kValidation,
          "vector for '" + doc_id + "' has dimension " + std::to_string(vector.size()) +
              ", index has " + std::to_string(dimension_));
  double norm_sq = 0.0;
  for (double x : vector) norm_sq += x * x;
  Require(std::abs(std::sqrt(norm_sq) - 1.0) <= 1e-6, ErrorKind::kValidation,
          "vector for '" + doc_id + "' is not unit norm");
  Require(positions_.emplace(doc_id, ids_.size()).second, ErrorKind::kValidation,
          "duplicate document id '" + doc_id + "' in index");
  ids_.push_back(doc_id);
  data_.insert(data_.end(), vector.begin(), vector.end());
}

RetrievalResult VectorIndex::Search(std::span<const double> query, std::size_t k) const {
  Require(k >= 1, ErrorKind::kInvalidArgument, "retrieval k must be >= 1");
  Require(!ids_.empty(), ErrorKind::kInvalidArgument, "cannot search an empty index");
  Require(query.size() == dimension_, ErrorKind::kInvalidArgument,
          "query dimension does not match the index");
  std::vector<double> scores(ids_.size());
  std::vector<std::size_t> nonzero;
  for (std::size_t j = 0; j < dimension_; ++j) {
    if (query[j] != 0.0) nonzero.push_back(j);
  }
  // Skipping zero coordinates leaves every sum unchanged.
  const bool sparse = nonzero.size() * 4 < dimension_;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const double* row = data_.data() + i * dimension_;
    double dot = 0.0;
    if (sparse) {
      for (std::size_t j : nonzero) dot += row[j] * query[j];
    } else {
      for (std::size_t j = 0; j < dimension_; ++j) dot += row[j] * query[j];
    }
    scores[i] = dot;
  }
  std::vector<std::size_t> order(ids_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t take = std::min(k, order.size());
  std::partial_sort(order.begin(), order.begin() + take, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return ids_[a] < ids_[b];
                    });
  RetrievalResult result;
  for (std::size_t i = 0; i < take; ++i) {
    result.hits.push_back({ids_[order[i]], scores[order[i]]});
  }
  return result;
}

std::string SerializeIndex(const VectorIndex& index) {
  std::string out = "# canary-index v1 dim=" + std::to_string(index.dimension()) +
                    " count=" + std::to_string(index.size()) + "\n";
  char buf[32];
  for (std::size_t i = 0; i < index.size(); ++i) {
    out += index.id(i);
    out += '\t';
    const auto v = index.vector(i);
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (j) out += ' ';
      std::snprintf(buf, sizeof(buf), "%.17g", v[j]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

VectorIndex ParseIndex(std::string_view contents) {
  std::istringstream in{std::string(contents)};
  std::string header;
  std::getline(in, header);
  std::size_t dim = 0, count = 0;
  Require(std::sscanf(header.c_str(), "# canary-index v1 dim=%zu count=%zu", &dim, &count) == 2,
          ErrorKind::kValidation, "not a canary index (bad header)");
  VectorIndex index(dim);
  std::string line;
  std::size_t line_number = 1;
  std::vector<double> v;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    Require(tab != std::string::npos, ErrorKind::kValidation,
            "index line " + std::to_string(line_number) + ": missing tab");
    std::istringstream values(line.substr(tab + 1));
    v.clear();
    double x;
    while (values >> x) v.push_back(x);
    index.Add(line.substr(0, tab), v);
  }
  Require(index.size() == count, ErrorKind::kValidation,
          "index header says " + std::to_string(count) + " entries, found " +
              std::to_string(index.size()));
  return index;
}

void SaveIndex(const VectorIndex& index, const std::filesystem::path& path) {
  WriteTextFile(path, SerializeIndex(index));
}

VectorIndex LoadIndex(const std::filesystem::path& path) {
  return ParseIndex(ReadTextFile(path));
}

IndexBuild BuildIndex(const std::vector<Document>& docs, Embedder& embedder) {
  Require(!docs.empty(), ErrorKind::kValidation, "cannot index an empty corpus");
  std::optional<VectorIndex> index;
  std::vector<std::pair<std::string, std::string>> failures;
  for (const auto& doc : docs) {
    std::vector<double> v;
    try {
      v = embedder.Embed(doc.text);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kTransport) throw;
      failures.emplace_back(doc.id, e.what());
      continue;
    }
    if (!index) index.emplace(v.size());
    index->Add(doc.id, v);
  }
  Require(index.has_value(), ErrorKind::kValidation,
          "no document could be embedded");
  return IndexBuild{std::move(*index), std::move(failures)};
}

RetrievalResult Retrieve(const VectorIndex& index, const std::string& query,
                         std::size_t k, Embedder& embedder) {
  Require(k >= 1, ErrorKind::kInvalidArgument, "retrieval k must be >= 1");
  Require(index.size() > 0, ErrorKind::kInvalidArgument, "cannot search an empty index");
  return index.Search(embedder.Embed(query), k);
}

AccuracyResult TargetRetrievalAccuracy(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const VectorIndex& index, std::size_t k, Embedder& embedder) {
  Require(!pairs.empty(), ErrorKind::kInvalidArgument,
          "retrieval accuracy needs at least one pair");
  AccuracyResult result;
  result.total = pairs.size();
  for (const auto& [query, expected] : pairs) {
    if (!index.Contains(expected)) {
      result.unknown_ids.push_back(expected);
      continue;
    }
    const RetrievalResult r = Retrieve(index, query, k, embedder);
    for (const auto& hit : r.hits) {
      if (hit.doc_id == expected) {
        ++result.hits;
        break;
      }
    }
  }
  result.accuracy = static_cast<double>(result.hits) / static_cast<double>(result.total);
  return result;
}

}  // namespace canary
