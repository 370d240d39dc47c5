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

#ifndef CANARY_METRICS_H_
#define CANARY_METRICS_H_

#include <cstddef>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "canary/generation.h"
#include "canary/tokenization.h"

namespace canary {

class Gateway;

std::vector<std::string> WhitespaceWords(std::string_view text);

// Corpus-level BLEU over whitespace words, n-grams 1..max_order with uniform
// weights and the standard brevity penalty exp(1 - r/c) when c < r.
// Clipped matches and candidate n-gram totals are summed over all pairs.
// For n >= 2 a precision with zero matches becomes (m + 1) / (t + 1); a zero
// unigram precision gives 0. Throws kInvalidArgument on a length mismatch.
double Bleu(const std::vector<std::string>& references,
            const std::vector<std::string>& candidates, int max_order = 4);

// Consecutive runs of `words_per_block` words joined by single spaces. A final
// run shorter than `min_tail` words is merged into the previous block.
std::vector<std::string> SplitBlocks(std::string_view doc,
                                     std::size_t words_per_block,
                                     std::size_t min_tail = 10);

class PerplexityScorer {
 public:
  virtual ~PerplexityScorer() = default;
  virtual double Perplexity(const std::string& block) = 0;
  virtual std::string Describe() const = 0;
};

// exp(-mean log P(token | history)) under an n-gram model, tokenizing with
// the given vocabulary.
class NGramPerplexityScorer : public PerplexityScorer {
 public:
  NGramPerplexityScorer(const NGramModel& model, const Vocabulary& vocab)
      : model_(model), vocab_(vocab) {}
  double Perplexity(const std::string& block) override;
  std::string Describe() const override;

 private:
  const NGramModel& model_;
  const Vocabulary& vocab_;
};

// exp(-mean token log-probability) reported by the gateway completion model.
class GatewayPerplexityScorer : public PerplexityScorer {
 public:
  explicit GatewayPerplexityScorer(Gateway& gateway) : gateway_(gateway) {}
  double Perplexity(const std::string& block) override;
  std::string Describe() const override { return "gateway-logprobs"; }

 private:
  Gateway& gateway_;
};

struct BlockReport {
  std::vector<double> perplexities;  // NaN for blocks the scorer failed on
  std::vector<std::size_t> failed_blocks;
  std::vector<std::string> failure_messages;
  double threshold = std::numeric_limits<double>::infinity();
  std::size_t scored = 0;
  std::size_t filtered = 0;
  double filtered_fraction = 0.0;  // filtered / scored
};

std::vector<double> ScoreBlocks(const std::vector<std::string>& blocks,
                                PerplexityScorer& scorer);

// Fraction of scored blocks with perplexity strictly above `threshold`.
// Failing blocks are excluded and listed. Throws kInvalidArgument when no
// block could be scored.
BlockReport FilteringRate(const std::vector<std::string>& blocks,
                          PerplexityScorer& scorer, double threshold);
BlockReport FilteringRateFromScores(const std::vector<double>& perplexities,
                                    double threshold);

// {"config_fingerprint", "metric", "scope", "value"} as one JSON line.
std::string MetricRecordLine(const std::string& metric, const std::string& scope,
                             double value, const std::string& config_fingerprint);

}  // namespace canary

#endif  // CANARY_METRICS_H_
