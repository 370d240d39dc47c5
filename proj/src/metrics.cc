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

#include "canary/metrics.h"

#include <cmath>
#include <map>
#include <sstream>

#include "canary/error.h"
#include "canary/llm_gateway.h"
#include "json.hpp"

namespace canary {

using Ngram = std::vector<std::string_view>;

namespace {

std::map<Ngram, int> CountNgrams(const std::vector<std::string>& words, int n) {
  std::map<Ngram, int> counts;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    ++counts[Ngram(words.begin() + i, words.begin() + i + n)];
  }
  return counts;
}

}  // namespace

std::vector<std::string> WhitespaceWords(std::string_view text) {
  std::vector<std::string> words;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

double Bleu(const std::vector<std::string>& references,
            const std::vector<std::string>& candidates, int max_order) {
  Require(references.size() == candidates.size(), ErrorKind::kInvalidArgument,
          "BLEU needs paired lists: " + std::to_string(references.size()) +
              " references vs " + std::to_string(candidates.size()) + " candidates");
  Require(max_order >= 1, ErrorKind::kInvalidArgument, "BLEU order must be >= 1");
  std::vector<double> matches(max_order, 0.0), totals(max_order, 0.0);
  double ref_len = 0.0, cand_len = 0.0;
  for (std::size_t k = 0; k < references.size(); ++k) {
    const auto ref = WhitespaceWords(references[k]);
    const auto cand = WhitespaceWords(candidates[k]);
    ref_len += ref.size();
    cand_len += cand.size();
    for (int n = 1; n <= max_order; ++n) {
      const auto ref_counts = CountNgrams(ref, n);
      for (const auto& [gram, count] : CountNgrams(cand, n)) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matches[n - 1] += std::min(count, it->second);
        totals[n - 1] += count;
      }
    }
  }
  if (cand_len == 0.0 || matches[0] == 0.0) return 0.0;
  double log_sum = 0.0;
  for (int n = 0; n < max_order; ++n) {
    double p = n > 0 && matches[n] == 0.0 ? (matches[n] + 1.0) / (totals[n] + 1.0)
                                          : matches[n] / totals[n];
    log_sum += std::log(p) / max_order;
  }
  const double bp = cand_len < ref_len ? std::exp(1.0 - ref_len / cand_len) : 1.0;
  return bp * std::exp(log_sum);
}

std::vector<std::string> SplitBlocks(std::string_view doc, std::size_t words_per_block,
                                     std::size_t min_tail) {
  Require(words_per_block >= 1, ErrorKind::kInvalidArgument,
          "words_per_block must be >= 1");
  const auto words = WhitespaceWords(doc);
  std::vector<std::vector<std::string>> chunks;
  for (std::size_t i = 0; i < words.size(); i += words_per_block) {
    chunks.emplace_back(words.begin() + i,
                        words.begin() + std::min(words.size(), i + words_per_block));
  }
  if (chunks.size() >= 2 && chunks.back().size() < min_tail) {
    auto tail = std::move(chunks.back());
    chunks.pop_back();
    chunks.back().insert(chunks.back().end(), tail.begin(), tail.end());
  }
  std::vector<std::string> blocks;
  for (const auto& chunk : chunks) {
    std::string block;
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      if (i) block += ' ';
      block += chunk[i];
    }
    blocks.push_back(std::move(block));
  }
  return blocks;
}

double NGramPerplexityScorer::Perplexity(const std::string& block) {
  const TokenSequence seq = Encode(block, vocab_);
  Require(!seq.empty(), ErrorKind::kInvalidArgument, "cannot score an empty block");
  double log_sum = 0.0;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const std::span<const TokenId> history(seq.ids.data(), i);
    log_sum += model_.LogProbability(history, seq.ids[i]);
  }
  return std::exp(-log_sum / static_cast<double>(seq.size()));
}

std::string NGramPerplexityScorer::Describe() const {
  return "ngram(order=" + std::to_string(model_.order()) +
         ",vocab=" + vocab_.Fingerprint().substr(0, 12) + ")";
}

double GatewayPerplexityScorer::Perplexity(const std::string& block) {
  const std::vector<double> logprobs = gateway_.TokenLogprobs(block);
  Require(!logprobs.empty(), ErrorKind::kValidation,
          "gateway returned no token log-probabilities");
  double sum = 0.0;
  for (double lp : logprobs) sum += lp;
  return std::exp(-sum / static_cast<double>(logprobs.size()));
}

std::vector<double> ScoreBlocks(const std::vector<std::string>& blocks,
                                PerplexityScorer& scorer) {
  std::vector<double> out;
  out.reserve(blocks.size());
  for (const auto& block : blocks) {
    try {
      out.push_back(scorer.Perplexity(block));
    } catch (const Error&) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
    }
  }
  return out;
}

BlockReport FilteringRateFromScores(const std::vector<double>& perplexities,
                                    double threshold) {
  BlockReport report;
  report.perplexities = perplexities;
  report.threshold = threshold;
  for (std::size_t i = 0; i < perplexities.size(); ++i) {
    if (std::isnan(perplexities[i])) {
      report.failed_blocks.push_back(i);
      continue;
    }
    ++report.scored;
    if (perplexities[i] > threshold) ++report.filtered;
  }
  Require(report.scored > 0, ErrorKind::kInvalidArgument,
          "filtering rate needs at least one scored block");
  report.filtered_fraction =
      static_cast<double>(report.filtered) / static_cast<double>(report.scored);
  return report;
}

BlockReport FilteringRate(const std::vector<std::string>& blocks,
                          PerplexityScorer& scorer, double threshold) {
  Require(!blocks.empty(), ErrorKind::kInvalidArgument, "no blocks to score");
  std::vector<double> perplexities;
  std::vector<std::string> messages;
  for (const auto& block : blocks) {
    try {
      perplexities.push_back(scorer.Perplexity(block));
    } catch (const Error& e) {
      perplexities.push_back(std::numeric_limits<double>::quiet_NaN());
      messages.push_back(e.what());
    }
  }
  BlockReport report = FilteringRateFromScores(perplexities, threshold);
  report.failure_messages = std::move(messages);
  return report;
}

std::string MetricRecordLine(const std::string& metric, const std::string& scope,
                             double value, const std::string& config_fingerprint) {
  return nlohmann::json{{"metric", metric},
                        {"scope", scope},
                        {"value", value},
                        {"config_fingerprint", config_fingerprint}}
             .dump() +
         "\n";
}

}  // namespace canary
