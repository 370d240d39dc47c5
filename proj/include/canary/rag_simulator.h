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

#ifndef CANARY_RAG_SIMULATOR_H_
#define CANARY_RAG_SIMULATOR_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "canary/corpus.h"
#include "canary/generation.h"
#include "canary/retrieval.h"
#include "canary/tokenization.h"

namespace canary {

// Token-preservation channel. Each response token is, with probability
// preservation_prob, the next unconsumed token of the top-1 document
// (restarting at its first token for every response and cycling when
// exhausted), and otherwise the next token of a sequence sampled from
// `background`. The background sequence conditions only on its own earlier
// tokens.
struct ChannelConfig {
  double preservation_prob = 0.5;
  std::size_t response_length = 100;
  std::shared_ptr<const NGramModel> background;
  std::uint64_t rng_seed = 0;

  void Validate() const;
};

enum class ChannelPreset { kEasyPrompt, kHardPrompt };

// "easy_prompt" | "hard_prompt"; kInvalidArgument otherwise.
ChannelPreset ParseChannelPreset(std::string_view name);
std::string_view ChannelPresetName(ChannelPreset preset);

// easy: p = 0.50, hard: p = 0.35, both L = 100. No background is set.
ChannelConfig PresetChannel(ChannelPreset preset);

struct SimResponse {
  RetrievalResult retrieval;
  TokenSequence tokens;
  std::size_t copied = 0;  // tokens taken from the top-1 document
  std::string text;
};

class RagSimulator {
 public:
  // Every indexed id needs an entry in `doc_tokens`. Throws kValidation
  // otherwise, kInvalidArgument for k == 0 or an empty index.
  RagSimulator(std::shared_ptr<const VectorIndex> index,
               std::unordered_map<std::string, TokenSequence> doc_tokens,
               std::shared_ptr<const Vocabulary> vocab, ChannelConfig channel,
               std::size_t k = 3);

  static RagSimulator FromCorpus(std::shared_ptr<const VectorIndex> index,
                                 const std::vector<Document>& corpus,
                                 std::shared_ptr<const Vocabulary> vocab,
                                 ChannelConfig channel, std::size_t k = 3);

  RetrievalResult Retrieve(const std::string& query, Embedder& embedder) const;

  // The randomness of one response is fixed by (channel seed, stream, query).
  SimResponse RespondToHits(const std::string& query, const RetrievalResult& retrieval,
                            std::uint64_t stream) const;
  SimResponse RespondTokens(const std::string& query, Embedder& embedder,
                            std::uint64_t stream) const;
  std::string Respond(const std::string& query, Embedder& embedder,
                      std::uint64_t stream = 0) const;

  const ChannelConfig& channel() const { return channel_; }
  std::size_t k() const { return k_; }
  const VectorIndex& index() const { return *index_; }
  const Vocabulary& vocab() const { return *vocab_; }

 private:
  std::shared_ptr<const VectorIndex> index_;
  std::unordered_map<std::string, TokenSequence> doc_tokens_;
  std::shared_ptr<const Vocabulary> vocab_;
  ChannelConfig channel_;
  std::size_t k_;
};

}  // namespace canary

#endif  // CANARY_RAG_SIMULATOR_H_
