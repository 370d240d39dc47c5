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

#include "canary/audit.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_set>

#include "canary/error.h"
#include "canary/llm_gateway.h"
#include "canary/rng.h"

namespace canary {

using nlohmann::json;

std::string SimResponder::Respond(const std::string& query) {
  const std::uint64_t stream = DeriveSeed(stream_base_, calls_++);
  if (cache_ != nullptr) {
    auto it = cache_->find(query);
    if (it != cache_->end()) return sim_.RespondToHits(query, it->second, stream).text;
  }
  return sim_.RespondTokens(query, embedder_, stream).text;
}

void RemoteResponderConfig::Validate() const {
  Require(!url.empty(), ErrorKind::kValidation, "remote responder needs a url");
  Require(!answer_path.empty(), ErrorKind::kValidation, "remote responder needs an answer path");
  Require(request_template.is_object(), ErrorKind::kValidation,
          "request template must be a JSON object");
}

RemoteResponder::RemoteResponder(Gateway& gateway, RemoteResponderConfig config)
    : gateway_(gateway), config_(std::move(config)) {
  config_.Validate();
}

json FillQueryTemplate(const json& tmpl, const std::string& query) {
  if (tmpl.is_string()) {
    std::string s = tmpl.get<std::string>();
    const std::string marker = "{query}";
    for (std::size_t pos = s.find(marker); pos != std::string::npos;
         pos = s.find(marker, pos + query.size())) {
      s.replace(pos, marker.size(), query);
    }
    return s;
  }
  if (tmpl.is_object() || tmpl.is_array()) {
    json out = tmpl;
    for (auto& [key, value] : out.items()) value = FillQueryTemplate(value, query);
    return out;
  }
  return tmpl;
}

std::string ExtractAnswer(const json& reply, const std::string& path) {
  const json* node = &reply;
  std::size_t start = 0;
  while (start <= path.size()) {
    const std::size_t dot = std::min(path.find('.', start), path.size());
    const std::string seg = path.substr(start, dot - start);
    const bool numeric = !seg.empty() && std::all_of(seg.begin(), seg.end(), ::isdigit);
    if (node->is_array() && numeric) {
      const std::size_t i = std::stoul(seg);
      Require(i < node->size(), ErrorKind::kValidation, "answer path index out of range: " + seg);
      node = &(*node)[i];
    } else {
      Require(node->is_object() && node->contains(seg), ErrorKind::kValidation,
              "answer path segment '" + seg + "' not found");
      node = &(*node)[seg];
    }
    start = dot + 1;
  }
  Require(node->is_string(), ErrorKind::kValidation, "answer at '" + path + "' is not a string");
  return node->get<std::string>();
}

std::string RemoteResponder::Respond(const std::string& query) {
  const json reply = gateway_.PostJson(config_.url, FillQueryTemplate(config_.request_template, query));
  return ExtractAnswer(reply, config_.answer_path);
}

void AuditPlan::Validate() const {
  Require(registry != nullptr, ErrorKind::kValidation, "audit plan has no registry");
  Require(quota >= 1, ErrorKind::kDetectionPrecondition, "query quota must be >= 1");
  Require(queries_per_canary >= 1, ErrorKind::kValidation, "queries per canary must be >= 1");
  Require(std::isfinite(eta), ErrorKind::kValidation, "threshold must be finite");
}

std::vector<QuerySlot> SelectQueries(const Registry& registry, std::size_t quota,
                                     std::size_t queries_per_canary, std::uint64_t seed) {
  Require(quota >= 1, ErrorKind::kDetectionPrecondition, "query quota must be >= 1");
  Require(queries_per_canary >= 1, ErrorKind::kValidation, "queries per canary must be >= 1");
  const std::size_t n = registry.canaries.size();
  const std::size_t needed = (quota + queries_per_canary - 1) / queries_per_canary;
  Require(needed <= n, ErrorKind::kValidation,
          "quota " + std::to_string(quota) + " needs " + std::to_string(needed) +
              " canaries, registry has " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < needed; ++i) {
    std::swap(order[i], order[i + rng.NextBelow(n - i)]);
  }
  std::vector<std::size_t> offsets(needed);
  for (std::size_t c = 0; c < needed; ++c) {
    const auto& record = registry.canaries[order[c]];
    const std::size_t uses = quota / needed + (c < quota % needed ? 1 : 0);
    Require(record.query_questions.size() >= uses, ErrorKind::kValidation,
            "canary " + record.canary_id + " has " +
                std::to_string(record.query_questions.size()) + " questions, needs " +
                std::to_string(uses));
    offsets[c] = rng.NextBelow(record.query_questions.size());
  }
  std::vector<QuerySlot> slots;
  for (std::size_t j = 0; j < quota; ++j) {
    const std::size_t c = j % needed;
    const std::size_t nq = registry.canaries[order[c]].query_questions.size();
    slots.push_back({order[c], (offsets[c] + j / needed) % nq});
  }
  return slots;
}

AuditOutcome RunAudit(Responder& responder, const AuditPlan& plan, const Vocabulary& vocab,
                      const GreenList& green) {
  plan.Validate();
  Require(green.vocab_size() == vocab.size(), ErrorKind::kValidation,
          "green list does not match the vocabulary");
  const auto slots = SelectQueries(*plan.registry, plan.quota, plan.queries_per_canary,
                                   plan.selection_seed);
  AuditOutcome out;
  GreenCounts total;
  TokenSequence concatenated;
  std::set<ErrorKind> failure_kinds;
  std::string last_failure;
  for (const QuerySlot& slot : slots) {
    const CanaryRecord& canary = plan.registry->canaries[slot.canary];
    QueryRecord record;
    record.canary_id = canary.canary_id;
    record.question = canary.query_questions[slot.question];
    try {
      record.response = responder.Respond(record.question);
    } catch (const Error& e) {
      record.error = e.what();
      failure_kinds.insert(e.kind());
      last_failure = e.what();
      ++out.failures;
      out.queries.push_back(std::move(record));
      continue;
    }
    TokenSequence tokens = Encode(record.response, vocab);
    if (plan.mask_echo) {
      const TokenSequence q = Encode(record.question, vocab);
      const std::unordered_set<TokenId> echoed(q.ids.begin(), q.ids.end());
      std::erase_if(tokens.ids, [&](TokenId id) { return echoed.count(id) > 0; });
    }
    const GreenCounts counts = CountGreen(tokens.ids, green);
    record.tokens = counts.tokens;
    record.green = counts.green;
    total.tokens += counts.tokens;
    total.green += counts.green;
    concatenated.ids.insert(concatenated.ids.end(), tokens.ids.begin(), tokens.ids.end());
    out.queries.push_back(std::move(record));
  }
  if (out.failures == slots.size()) {
    const ErrorKind kind =
        failure_kinds.size() == 1 ? *failure_kinds.begin() : ErrorKind::kDetectionPrecondition;
    Fail(kind, "every query failed; last error: " + last_failure);
  }
  Require(total.tokens > 0, ErrorKind::kDetectionPrecondition, "responses contain no tokens");
  const GreenCounts joined = CountGreen(concatenated.ids, green);
  Require(joined.tokens == total.tokens && joined.green == total.green, ErrorKind::kInternal,
          "summed counts disagree with the concatenated sequence");
  out.report = ReportFromCounts(total, plan.registry->key.gamma, plan.eta);
  out.verdict = out.report.watermarked;
  return out;
}

json AuditOutcome::ToJson() const {
  json queries_json = json::array();
  for (const auto& q : queries) {
    json item = {{"canary_id", q.canary_id}, {"question", q.question},
                 {"response", q.response},   {"tokens", q.tokens},
                 {"green", q.green}};
    if (!q.error.empty()) item["error"] = q.error;
    queries_json.push_back(std::move(item));
  }
  return {{"queries", queries_json},
          {"failures", failures},
          {"token_count", report.token_count},
          {"green_count", report.green_count},
          {"z", report.z},
          {"eta", report.eta},
          {"p_value", report.p_value},
          {"verdict", verdict}};
}

namespace {

void CheckScores(const std::vector<double>& scores, const char* what) {
  Require(!scores.empty(), ErrorKind::kInvalidArgument, std::string("no ") + what + " scores");
  for (double s : scores) {
    Require(std::isfinite(s), ErrorKind::kInvalidArgument,
            std::string("non-finite ") + what + " score");
  }
}

}  // namespace

double RankAuc(const std::vector<double>& positives, const std::vector<double>& negatives) {
  CheckScores(positives, "positive");
  CheckScores(negatives, "negative");
  std::vector<std::pair<double, bool>> all;
  all.reserve(positives.size() + negatives.size());
  for (double s : positives) all.emplace_back(s, true);
  for (double s : negatives) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    std::size_t pos_in_group = 0;
    while (j < all.size() && all[j].first == all[i].first) {
      pos_in_group += all[j].second ? 1 : 0;
      ++j;
    }
    const double mid_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    rank_sum += mid_rank * static_cast<double>(pos_in_group);
    i = j;
  }
  const double np = static_cast<double>(positives.size());
  const double nn = static_cast<double>(negatives.size());
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double TrapezoidArea(const std::vector<std::pair<double, double>>& points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].first - points[i - 1].first) *
            (points[i].second + points[i - 1].second) / 2.0;
  }
  return area;
}

double TprAtFpr(const std::vector<double>& positives, const std::vector<double>& negatives,
                double fpr) {
  CheckScores(positives, "positive");
  CheckScores(negatives, "negative");
  Require(fpr >= 0.0 && fpr <= 1.0, ErrorKind::kInvalidArgument, "fpr level must be in [0, 1]");
  std::vector<double> neg = negatives;
  std::sort(neg.begin(), neg.end());
  const double pos = (1.0 - fpr) * static_cast<double>(neg.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, neg.size() - 1);
  const double threshold = neg[lo] + (pos - static_cast<double>(lo)) * (neg[hi] - neg[lo]);
  const auto above = std::count_if(positives.begin(), positives.end(),
                                   [&](double s) { return s > threshold; });
  return static_cast<double>(above) / static_cast<double>(positives.size());
}

RocCurve EvaluateRoc(const std::vector<double>& positives, const std::vector<double>& negatives,
                     const std::vector<double>& fpr_levels) {
  CheckScores(positives, "positive");
  CheckScores(negatives, "negative");
  RocCurve curve;
  std::vector<double> pos = positives, neg = negatives;
  std::sort(pos.begin(), pos.end(), std::greater<>());
  std::sort(neg.begin(), neg.end(), std::greater<>());
  const double np = static_cast<double>(pos.size());
  const double nn = static_cast<double>(neg.size());
  curve.points.emplace_back(0.0, 0.0);
  std::size_t i = 0, j = 0;
  // Sweep the threshold down through each distinct score.
  while (i < pos.size() || j < neg.size()) {
    double t = -std::numeric_limits<double>::infinity();
    if (i < pos.size()) t = pos[i];
    if (j < neg.size()) t = std::max(t, neg[j]);
    while (i < pos.size() && pos[i] == t) ++i;
    while (j < neg.size() && neg[j] == t) ++j;
    curve.points.emplace_back(static_cast<double>(j) / nn, static_cast<double>(i) / np);
  }
  curve.auc = RankAuc(positives, negatives);
  for (double level : fpr_levels) curve.tpr_at[level] = TprAtFpr(positives, negatives, level);
  return curve;
}

std::pair<double, double> BootstrapAucInterval(const std::vector<double>& positives,
                                               const std::vector<double>& negatives,
                                               std::size_t replicates, std::uint64_t seed,
                                               double level) {
  Require(replicates >= 1, ErrorKind::kInvalidArgument, "bootstrap needs replicates");
  Require(level > 0.0 && level < 1.0, ErrorKind::kInvalidArgument,
          "interval level must be in (0, 1)");
  Rng rng(seed);
  std::vector<double> aucs;
  aucs.reserve(replicates);
  std::vector<double> p(positives.size()), n(negatives.size());
  for (std::size_t r = 0; r < replicates; ++r) {
    for (auto& x : p) x = positives[rng.NextBelow(positives.size())];
    for (auto& x : n) x = negatives[rng.NextBelow(negatives.size())];
    aucs.push_back(RankAuc(p, n));
  }
  std::sort(aucs.begin(), aucs.end());
  const double alpha = (1.0 - level) / 2.0;
  const auto at = [&](double q) {
    const double pos = q * static_cast<double>(aucs.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, aucs.size() - 1);
    return aucs[lo] + (pos - static_cast<double>(lo)) * (aucs[hi] - aucs[lo]);
  };
  return {at(alpha), at(1.0 - alpha)};
}

}  // namespace canary
