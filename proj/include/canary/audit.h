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

#ifndef CANARY_AUDIT_H_
#define CANARY_AUDIT_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "canary/rag_simulator.h"
#include "canary/registry.h"
#include "canary/retrieval.h"
#include "canary/tokenization.h"
#include "canary/watermark.h"
#include "json.hpp"

namespace canary {

class Gateway;

// Black-box access to a suspect system. Failures are thrown as Error.
class Responder {
 public:
  virtual ~Responder() = default;
  virtual std::string Respond(const std::string& query) = 0;
};

// Simulator-backed responder. Call i uses stream DeriveSeed(stream_base, i).
// With a cache, retrieval results are looked up by query text instead of
// searching the index.
class SimResponder : public Responder {
 public:
  SimResponder(const RagSimulator& sim, Embedder& embedder, std::uint64_t stream_base,
               const std::unordered_map<std::string, RetrievalResult>* cache = nullptr)
      : sim_(sim), embedder_(embedder), stream_base_(stream_base), cache_(cache) {}
  std::string Respond(const std::string& query) override;

 private:
  const RagSimulator& sim_;
  Embedder& embedder_;
  std::uint64_t stream_base_;
  const std::unordered_map<std::string, RetrievalResult>* cache_;
  std::uint64_t calls_ = 0;
};

// POSTs a request built from `request_template` to a RAG endpoint. Every
// string value in the template has "{query}" replaced by the query. The
// answer is read at `answer_path`, dot-separated, where numeric segments
// index arrays (e.g. "choices.0.message.content").
struct RemoteResponderConfig {
  std::string url;
  nlohmann::json request_template = {{"query", "{query}"}};
  std::string answer_path = "answer";

  void Validate() const;
};

class RemoteResponder : public Responder {
 public:
  RemoteResponder(Gateway& gateway, RemoteResponderConfig config);
  std::string Respond(const std::string& query) override;

 private:
  Gateway& gateway_;
  RemoteResponderConfig config_;
};

nlohmann::json FillQueryTemplate(const nlohmann::json& tmpl, const std::string& query);
// Throws kValidation when the path is missing or does not end in a string.
std::string ExtractAnswer(const nlohmann::json& reply, const std::string& path);

struct AuditPlan {
  const Registry* registry = nullptr;
  std::size_t quota = 1;
  std::size_t queries_per_canary = 1;
  double eta = 0.0;
  std::uint64_t selection_seed = 0;
  // Drop response tokens whose id occurs in the question before counting.
  bool mask_echo = false;

  void Validate() const;
};

struct QuerySlot {
  std::size_t canary = 0;    // index into registry.canaries
  std::size_t question = 0;  // index into its query_questions
};

// ceil(quota / queries_per_canary) distinct canaries in seeded order; query
// j goes to canary j mod C and takes that canary's questions round-robin from
// a seeded offset. Throws kValidation when the registry cannot supply them.
std::vector<QuerySlot> SelectQueries(const Registry& registry, std::size_t quota,
                                     std::size_t queries_per_canary, std::uint64_t seed);

struct QueryRecord {
  std::string canary_id;
  std::string question;
  std::string response;
  std::size_t tokens = 0;
  std::size_t green = 0;
  std::string error;  // nonempty when the responder failed
};

struct AuditOutcome {
  std::vector<QueryRecord> queries;
  std::size_t failures = 0;
  DetectionReport report;
  bool verdict = false;

  nlohmann::json ToJson() const;
};

// Responses are tokenized one by one and their counts summed; z uses the
// registry key's gamma with `green`, which may come from another key. Queries that
// fail are logged and skipped. When none succeed the shared error kind of the
// failures is rethrown, or kDetectionPrecondition when the kinds differ.
AuditOutcome RunAudit(Responder& responder, const AuditPlan& plan,
                      const Vocabulary& vocab, const GreenList& green);

struct RocCurve {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr) from (0,0) to (1,1)
  double auc = 0.0;
  std::map<double, double> tpr_at;  // fpr level -> tpr
};

// AUC is P(pos > neg) + P(pos == neg) / 2 from mid-ranks. tpr_at[a] is the
// fraction of positives strictly above the (1 - a) quantile of the negatives,
// interpolated linearly between adjacent order statistics. Throws
// kInvalidArgument for an empty list or non-finite score.
RocCurve EvaluateRoc(const std::vector<double>& positives, const std::vector<double>& negatives,
                     const std::vector<double>& fpr_levels = {0.01, 0.10});

double RankAuc(const std::vector<double>& positives, const std::vector<double>& negatives);
double TrapezoidArea(const std::vector<std::pair<double, double>>& points);
double TprAtFpr(const std::vector<double>& positives, const std::vector<double>& negatives,
                double fpr);

// Percentile interval of the AUC over resampled positive and negative sets.
std::pair<double, double> BootstrapAucInterval(const std::vector<double>& positives,
                                               const std::vector<double>& negatives,
                                               std::size_t replicates, std::uint64_t seed,
                                               double level = 0.95);

}  // namespace canary

#endif  // CANARY_AUDIT_H_
