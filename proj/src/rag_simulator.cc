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

#include "canary/rag_simulator.h"

#include <utility>

#include "canary/error.h"
#include "canary/rng.h"

namespace canary {

void ChannelConfig::Validate() const {
  Require(preservation_prob >= 0.0 && preservation_prob <= 1.0, ErrorKind::kInvalidArgument,
          "preservation probability must be in [0, 1]");
  Require(response_length >= 1, ErrorKind::kInvalidArgument,
          "response length must be >= 1");
  Require(background != nullptr, ErrorKind::kInvalidArgument,
          "channel needs a background model");
}

ChannelPreset ParseChannelPreset(std::string_view name) {
  if (name == "easy_prompt") return ChannelPreset::kEasyPrompt;
  if (name == "hard_prompt") return ChannelPreset::kHardPrompt;
  Fail(ErrorKind::kInvalidArgument,
       "unknown channel preset '" + std::string(name) + "' (easy_prompt|hard_prompt)");
}

std::string_view ChannelPresetName(ChannelPreset preset) {
  return preset == ChannelPreset::kEasyPrompt ? "easy_prompt" : "hard_prompt";
}

ChannelConfig PresetChannel(ChannelPreset preset) {
  ChannelConfig c;
  c.preservation_prob = preset == ChannelPreset::kEasyPrompt ? 0.50 : 0.35;
  c.response_length = 100;
  return c;
}

RagSimulator::RagSimulator(std::shared_ptr<const VectorIndex> index,
                           std::unordered_map<std::string, TokenSequence> doc_tokens,
                           std::shared_ptr<const Vocabulary> vocab, ChannelConfig channel,
                           std::size_t k)
    : index_(std::move(index)),
      doc_tokens_(std::move(doc_tokens)),
      vocab_(std::move(vocab)),
      channel_(std::move(channel)),
      k_(k) {
  channel_.Validate();
  Require(k_ >= 1, ErrorKind::kInvalidArgument, "retrieval k must be >= 1");
  Require(index_ && index_->size() > 0, ErrorKind::kInvalidArgument,
          "simulator needs a nonempty index");
  Require(vocab_ != nullptr, ErrorKind::kInvalidArgument, "simulator needs a vocabulary");
  Require(channel_.background->vocab_size() == vocab_->size(), ErrorKind::kValidation,
          "background model and vocabulary sizes differ");
  for (std::size_t i = 0; i < index_->size(); ++i) {
    Require(doc_tokens_.count(index_->id(i)) > 0, ErrorKind::kValidation,
            "no tokens for indexed document '" + index_->id(i) + "'");
  }
}

RagSimulator RagSimulator::FromCorpus(std::shared_ptr<const VectorIndex> index,
                                      const std::vector<Document>& corpus,
                                      std::shared_ptr<const Vocabulary> vocab,
                                      ChannelConfig channel, std::size_t k) {
  Require(vocab != nullptr, ErrorKind::kInvalidArgument, "simulator needs a vocabulary");
  std::unordered_map<std::string, TokenSequence> tokens;
  for (const auto& doc : corpus) tokens.emplace(doc.id, Encode(doc.text, *vocab));
  return RagSimulator(std::move(index), std::move(tokens), std::move(vocab),
                      std::move(channel), k);
}

RetrievalResult RagSimulator::Retrieve(const std::string& query, Embedder& embedder) const {
  return canary::Retrieve(*index_, query, k_, embedder);
}

SimResponse RagSimulator::RespondToHits(const std::string& query,
                                        const RetrievalResult& retrieval,
                                        std::uint64_t stream) const {
  Require(!retrieval.hits.empty(), ErrorKind::kInvalidArgument,
          "retrieval returned no documents");
  SimResponse out;
  out.retrieval = retrieval;
  const TokenSequence& source = doc_tokens_.at(retrieval.hits[0].doc_id);
  Rng rng(DeriveSeed(DeriveSeed(channel_.rng_seed, stream), StableHash(query)));
  std::vector<TokenId>& ids = out.tokens.ids;
  ids.reserve(channel_.response_length);
  std::vector<TokenId> background;
  std::size_t cursor = 0;
  for (std::size_t t = 0; t < channel_.response_length; ++t) {
    const bool copy = rng.NextDouble() < channel_.preservation_prob;
    if (copy && !source.ids.empty()) {
      ids.push_back(source.ids[cursor % source.ids.size()]);
      ++cursor;
      ++out.copied;
    } else {
      background.push_back(channel_.background->Sample(background, rng));
      ids.push_back(background.back());
    }
  }
  out.text = Decode(out.tokens, *vocab_);
  return out;
}

SimResponse RagSimulator::RespondTokens(const std::string& query, Embedder& embedder,
                                        std::uint64_t stream) const {
  return RespondToHits(query, Retrieve(query, embedder), stream);
}

std::string RagSimulator::Respond(const std::string& query, Embedder& embedder,
                                  std::uint64_t stream) const {
  return RespondTokens(query, embedder, stream).text;
}

}  // namespace canary
