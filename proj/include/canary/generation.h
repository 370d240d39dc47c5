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

#ifndef CANARY_GENERATION_H_
#define CANARY_GENERATION_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "canary/rng.h"
#include "canary/tokenization.h"
#include "canary/watermark.h"

namespace canary {

// Next-token scorer: fills a logit per vocabulary id for a context.
// Implementations must be deterministic and safe for concurrent calls.
class LogitSource {
 public:
  virtual ~LogitSource() = default;
  virtual std::size_t vocab_size() const = 0;
  virtual void Logits(std::span<const TokenId> context,
                      std::span<double> out) const = 0;
};

// All-zero logits: the uniform distribution over the vocabulary.
class UniformLogitSource : public LogitSource {
 public:
  explicit UniformLogitSource(std::size_t vocab_size)
      : vocab_size_(vocab_size) {}
  std::size_t vocab_size() const override { return vocab_size_; }
  void Logits(std::span<const TokenId> context,
              std::span<double> out) const override;

 private:
  std::size_t vocab_size_;
};

// Mixture of component distributions: log(sum_k w_k softmax(l_k)), where l_k
// are the component logits. Weights must be positive; they are normalized.
// Banned ids always get -inf.
class InterpolatedLogitSource : public LogitSource {
 public:
  InterpolatedLogitSource(std::vector<std::shared_ptr<const LogitSource>> parts,
                          std::vector<double> weights,
                          std::vector<TokenId> banned = {});

  std::size_t vocab_size() const override { return vocab_size_; }
  void Logits(std::span<const TokenId> context,
              std::span<double> out) const override;

 private:
  std::vector<std::shared_ptr<const LogitSource>> parts_;
  std::vector<double> weights_;
  std::vector<TokenId> banned_;
  std::size_t vocab_size_ = 0;
};

// Additively smoothed n-gram model.
//
// Training pads each sequence on the left with order-1 begin markers and
// counts every (context, token) pair at every context length 0..order-1.
// P(w | c) = (count(c, w) + alpha) / (count(c) + alpha * |V|), where c is the
// longest suffix of the (padded) history that was observed in training.
// The empty context is always observed, so every context has a proper
// distribution.
class NGramModel : public LogitSource {
 public:
  // Counts for full-length contexts (order-1 ids, begin marker = |V|).
  using ContextCounts = std::map<std::vector<TokenId>, std::map<TokenId, std::uint64_t>>;

  NGramModel(std::size_t order, double alpha, std::size_t vocab_size,
             ContextCounts top_counts);

  std::size_t order() const { return order_; }
  double alpha() const { return alpha_; }
  std::size_t vocab_size() const override { return vocab_size_; }
  TokenId begin_marker() const { return static_cast<TokenId>(vocab_size_); }
  const ContextCounts& top_counts() const { return top_counts_; }

  void Logits(std::span<const TokenId> context,
              std::span<double> out) const override;
  double Probability(std::span<const TokenId> context, TokenId token) const;
  double LogProbability(std::span<const TokenId> context, TokenId token) const;

  // Exact sample from P(. | context) without materializing a dense vector.
  TokenId Sample(std::span<const TokenId> context, Rng& rng) const;

  friend bool operator==(const NGramModel& a, const NGramModel& b) {
    return a.order_ == b.order_ && a.alpha_ == b.alpha_ &&
           a.vocab_size_ == b.vocab_size_ && a.top_counts_ == b.top_counts_;
  }

 private:
  struct Row {
    std::vector<TokenId> tokens;
    std::vector<std::uint64_t> cumulative;  // running count totals
    std::uint64_t total = 0;
    std::uint64_t CountOf(TokenId token) const;
  };

  const Row& RowFor(std::span<const TokenId> context) const;
  static std::string Key(std::span<const TokenId> ids);

  std::size_t order_;
  double alpha_;
  std::size_t vocab_size_;
  ContextCounts top_counts_;
  // rows_[k] holds contexts of length k.
  std::vector<std::unordered_map<std::string, Row>> rows_;
};

// Throws kInvalidArgument for order 0, negative alpha, or a corpus with no
// tokens.
NGramModel TrainNGram(std::span<const TokenSequence> corpus,
                      std::size_t vocab_size, std::size_t order, double alpha);

// Counts file, line-delimited UTF-8:
//   # canary-ngram-counts v1
//   order\t<n>
//   alpha\t<%.17g>
//   vocab_size\t<V>
//   <context>\t<token id>\t<count>     one per observed full-length pair
// <context> is order-1 space-separated ids with "<s>" for the begin marker,
// or "-" when order is 1. Records are sorted by context ids, then token id.
std::string SerializeNGram(const NGramModel& model);
NGramModel ParseNGram(std::string_view contents);
void SaveNGram(const NGramModel& model, const std::filesystem::path& path);
NGramModel LoadNGram(const std::filesystem::path& path);

struct SamplerConfig {
  double temperature = 1.0;
  std::size_t max_tokens = 0;
  std::uint64_t rng_seed = 0;
  std::optional<TokenId> end_token;

  void Validate() const;
};

// Each step: logits from `source` given prompt+generated, green logits + delta,
// divide by temperature, softmax, inverse-CDF sample with Rng(cfg.rng_seed).
// Stops after max_tokens or right after emitting cfg.end_token.
TokenSequence GenerateWatermarked(const LogitSource& source,
                                  const WatermarkKey& key,
                                  const GreenList& green,
                                  const SamplerConfig& cfg,
                                  const TokenSequence& prompt);

// Same sampler without the watermark bias.
TokenSequence Generate(const LogitSource& source, const SamplerConfig& cfg,
                       const TokenSequence& prompt);

// green_count / T. Throws kDetectionPrecondition on an empty sequence.
double GreenFraction(const TokenSequence& seq, const GreenList& green);

// Samples one id from softmax(logits / temperature) using one NextDouble().
// Scratch is overwritten.
TokenId SampleSoftmax(std::span<const double> logits, double temperature,
                      Rng& rng, std::vector<double>& scratch);

}  // namespace canary

#endif  // CANARY_GENERATION_H_
