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

#ifndef CANARY_EXPERIMENT_H_
#define CANARY_EXPERIMENT_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "canary/audit.h"
#include "canary/corpus.h"
#include "canary/generation.h"
#include "canary/rag_simulator.h"
#include "canary/registry.h"
#include "canary/retrieval.h"
#include "canary/tokenization.h"
#include "canary/watermark.h"
#include "json.hpp"

namespace canary {

// A seeded toy language used to exercise the audit at desk scale.
//
// Words are pronounceable letter strings, each a token with a leading space,
// so Decode and Encode are exact inverses. Text follows a Markov chain whose
// next word is, with probability `noise`, uniform over all words, and
// otherwise pi_k(current) where the permutation pi_k is picked with weight
// successor_weights[k]. Every row and column of the transition matrix sums
// to one, so the stationary distribution is uniform and unwatermarked text
// is null under any key.
struct WorldConfig {
  std::size_t vocab_words = 1000;
  std::vector<double> successor_weights = {0.6, 0.25, 0.1, 0.05};
  double noise = 0.05;
  std::size_t background_docs = 2000;
  std::size_t doc_tokens = 200;
  std::size_t ngram_order = 2;
  double ngram_alpha = 0.01;
  std::size_t canaries = 100;
  std::size_t questions_per_canary = 14;
  std::size_t canary_min_tokens = 200;
  std::size_t canary_max_tokens = 260;
  std::size_t entity_mentions = 6;  // per entity, two entities per canary
  std::size_t question_tokens = 2;  // uniform filler words after both entities
  std::size_t embed_dim = 1024;
  WatermarkKey key{0x5eed0001ULL, 0.5, 2.0};
  std::uint64_t seed = 1;

  void Validate() const;
  nlohmann::json ToJson() const;
  // Starts from the defaults; unknown keys are rejected.
  static WorldConfig FromJson(const nlohmann::json& j);
};

std::string PseudoWord(std::size_t index);

struct SyntheticWorld {
  WorldConfig config;
  std::shared_ptr<const Vocabulary> vocab;
  std::shared_ptr<const NGramModel> background;
  GreenList green;
  std::vector<Document> originals;
  std::vector<Document> canary_docs;
  std::unordered_map<std::string, TokenSequence> tokens;  // every document
  Registry registry;
};

// Deterministic in the config.
SyntheticWorld BuildWorld(const WorldConfig& config);

// Unwatermarked text sampled from the world's Markov chain.
TokenSequence SampleLanguage(const WorldConfig& config, std::size_t length, std::uint64_t seed);

struct ChannelSpec {
  std::string preset = "easy_prompt";  // empty: use p and L below
  double preservation_prob = 0.5;
  std::size_t response_length = 100;
  std::size_t k = 3;

  ChannelConfig Resolve(std::shared_ptr<const NGramModel> background, std::uint64_t seed) const;
};

// Indexes with and without canaries plus cached retrieval for every
// registry question.
class AuditBench {
 public:
  AuditBench(SyntheticWorld world, const ChannelSpec& channel, std::uint64_t seed);

  const SyntheticWorld& world() const { return world_; }
  const RagSimulator& protected_sim() const { return *protected_sim_; }
  const RagSimulator& clean_sim() const { return *clean_sim_; }
  const std::unordered_map<std::string, RetrievalResult>& protected_cache() const {
    return protected_cache_;
  }
  const std::unordered_map<std::string, RetrievalResult>& clean_cache() const {
    return clean_cache_;
  }
  // Fraction of questions whose canary is retrieved in the top-k, and at rank 1.
  double retrieval_accuracy() const { return retrieval_accuracy_; }
  double top1_accuracy() const { return top1_accuracy_; }
  Embedder& embedder() { return embedder_; }

  // Expected green fraction of one response to a question about `canary`
  // under the channel: the binomial-weighted green share of the copied
  // prefix plus (1 - p) times the background green rate.
  double ExpectedResponseGreen(std::size_t canary) const;
  double background_green() const { return background_green_; }

  // One full audit against the protected (positive) or clean (negative)
  // corpus; trial t fixes the canary selection and channel randomness.
  AuditOutcome Trial(bool positive, std::size_t t, std::size_t quota,
                     std::size_t queries_per_canary, double eta) const;

 private:
  SyntheticWorld world_;
  std::uint64_t seed_;
  // Only touched on a cache miss, which registry questions never cause.
  mutable HashingEmbedder embedder_;
  std::unique_ptr<RagSimulator> protected_sim_;
  std::unique_ptr<RagSimulator> clean_sim_;
  std::unordered_map<std::string, RetrievalResult> protected_cache_;
  std::unordered_map<std::string, RetrievalResult> clean_cache_;
  double retrieval_accuracy_ = 0.0;
  double top1_accuracy_ = 0.0;
  double background_green_ = 0.5;
};

struct ExperimentConfig {
  WorldConfig world;
  ChannelSpec channel;
  std::string axis = "quota";  // quota | delta | canaries
  std::vector<double> values = {1, 2, 4, 6, 8, 10, 12};
  std::size_t quota = 2;               // fixed quota on the delta axis
  std::size_t queries_per_canary = 1;  // on the canaries axis quota = value * this
  std::size_t positive_trials = 500;
  std::size_t negative_trials = 500;
  double eta_fpr = 0.01;
  std::size_t bootstrap_replicates = 1000;
  std::uint64_t seed = 7;
  int threads = 1;

  void Validate() const;
  nlohmann::json ToJson() const;
  static ExperimentConfig FromJson(const nlohmann::json& j);
  std::string Fingerprint() const;  // sha256 of ToJson().dump()
};

struct SweepRow {
  std::string axis;
  double value = 0.0;
  std::size_t quota = 0;
  std::size_t queries_per_canary = 0;
  std::size_t trials = 0;  // per class
  double auc = 0.0;
  double auc_lo = 0.0;
  double auc_hi = 0.0;
  double tpr_at_1 = 0.0;
  double tpr_at_10 = 0.0;
  double mean_z_pos = 0.0;
  double mean_z_neg = 0.0;
  double theory_z = 0.0;        // from the expected per-response green share
  double null_fpr = 0.0;        // negatives with z > eta
  double wrong_key_fpr = 0.0;   // positives rescored under a per-trial key
  double wrong_key_mean_z = 0.0;
  double response_green = 0.0;  // pooled over positive responses
  double retrieval_accuracy = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> positive_z;
  std::vector<double> negative_z;

  nlohmann::json ToJson() const;  // without the raw scores
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::string Jsonl() const;
  std::string Table() const;
};

SweepResult RunExperiment(const ExperimentConfig& config);

// Recounts an outcome's responses under another green list.
DetectionReport RescoreOutcome(const AuditOutcome& outcome, const Vocabulary& vocab,
                               const GreenList& green, double gamma, double eta);

// Least-squares slope through the origin of y against x.
double SlopeThroughOrigin(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace canary

#endif  // CANARY_EXPERIMENT_H_
