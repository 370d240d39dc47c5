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

#include "canary/experiment.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cctype>
#include <cstdio>
#include <functional>
#include <mutex>
#include <numeric>
#include <thread>
#include <tuple>

#include "canary/error.h"
#include "canary/hash.h"
#include "canary/rng.h"

namespace canary {

using nlohmann::json;

namespace {

constexpr std::uint64_t kStreamChain = 1;
constexpr std::uint64_t kStreamDocs = 2;
constexpr std::uint64_t kStreamCanary = 3;
constexpr std::uint64_t kStreamQuestion = 4;
constexpr std::uint64_t kStreamPositive = 5;
constexpr std::uint64_t kStreamNegative = 6;
constexpr std::uint64_t kStreamChannel = 7;
constexpr std::uint64_t kStreamWrongKey = 8;
constexpr std::uint64_t kStreamBootstrap = 9;
constexpr std::uint64_t kStreamEmbed = 10;

constexpr const char* kConsonants = "bdfgklmnprstvz";
constexpr const char* kVowels = "aeiou";

struct Chain {
  std::vector<std::vector<std::uint32_t>> successors;  // [k][word]
  std::vector<double> cumulative;                      // over k
};

Chain MakeChain(const WorldConfig& c) {
  Chain chain;
  Rng rng(DeriveSeed(c.seed, kStreamChain));
  for (std::size_t k = 0; k < c.successor_weights.size(); ++k) {
    std::vector<std::uint32_t> perm(c.vocab_words);
    std::iota(perm.begin(), perm.end(), 0u);
    for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.NextBelow(i + 1)]);
    chain.successors.push_back(std::move(perm));
  }
  const double total =
      std::accumulate(c.successor_weights.begin(), c.successor_weights.end(), 0.0);
  double run = 0.0;
  for (double w : c.successor_weights) {
    run += w / total;
    chain.cumulative.push_back(run);
  }
  return chain;
}

// Word ids are token ids offset by one (id 0 is the unknown token).
std::vector<TokenId> Walk(const WorldConfig& c, const Chain& chain, std::size_t length,
                          Rng& rng) {
  std::vector<TokenId> out;
  out.reserve(length);
  std::uint32_t word = static_cast<std::uint32_t>(rng.NextBelow(c.vocab_words));
  for (std::size_t t = 0; t < length; ++t) {
    out.push_back(word + 1);
    if (rng.NextDouble() < c.noise) {
      word = static_cast<std::uint32_t>(rng.NextBelow(c.vocab_words));
    } else {
      const double u = rng.NextDouble();
      std::size_t k = 0;
      while (k + 1 < chain.cumulative.size() && u >= chain.cumulative[k]) ++k;
      word = chain.successors[k][word];
    }
  }
  return out;
}

std::string EntityWord(std::size_t canary, std::size_t which) {
  std::string w = PseudoWord(1000000 + canary * 2 + which);
  w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
  return w;
}

void ParallelFor(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mutex;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

double Mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

template <typename T>
void ReadKey(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

WatermarkKey KeyFromJson(const json& j, WatermarkKey key) {
  for (const auto& [k, v] : j.items()) {
    if (k == "seed") {
      key.seed = v.is_string() ? std::stoull(v.get<std::string>()) : v.get<std::uint64_t>();
    } else if (k == "gamma") {
      key.gamma = v.get<double>();
    } else if (k == "delta") {
      key.delta = v.get<double>();
    } else {
      Fail(ErrorKind::kValidation, "unknown watermark key field '" + k + "'");
    }
  }
  return key;
}

void RejectUnknown(const json& j, std::initializer_list<const char*> known, const char* what) {
  Require(j.is_object(), ErrorKind::kValidation, std::string(what) + " must be an object");
  for (const auto& [k, v] : j.items()) {
    const bool ok = std::any_of(known.begin(), known.end(), [&](const char* n) { return k == n; });
    Require(ok, ErrorKind::kValidation, std::string("unknown ") + what + " field '" + k + "'");
  }
}

}  // namespace

std::string PseudoWord(std::size_t index) {
  const std::size_t nc = std::char_traits<char>::length(kConsonants);
  const std::size_t nv = std::char_traits<char>::length(kVowels);
  const std::size_t syllables = nc * nv;
  std::string out;
  // Two syllables, then one more per further block of syllables^2 words.
  std::size_t rest = index;
  int count = 0;
  do {
    const std::size_t s = rest % syllables;
    rest /= syllables;
    out += kConsonants[s / nv];
    out += kVowels[s % nv];
    ++count;
  } while (rest > 0 || count < 2);
  return out;
}

void WorldConfig::Validate() const {
  key.Validate();
  Require(vocab_words >= 2, ErrorKind::kValidation, "world needs at least 2 words");
  Require(!successor_weights.empty(), ErrorKind::kValidation, "world needs successor weights");
  for (double w : successor_weights) {
    Require(w > 0.0, ErrorKind::kValidation, "successor weights must be positive");
  }
  Require(noise >= 0.0 && noise <= 1.0, ErrorKind::kValidation, "noise must be in [0, 1]");
  Require(background_docs >= 1 && doc_tokens >= 1, ErrorKind::kValidation,
          "world needs background documents");
  Require(ngram_order >= 1, ErrorKind::kValidation, "n-gram order must be >= 1");
  Require(ngram_alpha > 0.0, ErrorKind::kValidation, "n-gram alpha must be positive");
  Require(canary_min_tokens <= canary_max_tokens,
          ErrorKind::kValidation, "canary length range is invalid");
  Require(questions_per_canary >= 1, ErrorKind::kValidation, "canaries need questions");
  Require(question_tokens >= 2, ErrorKind::kValidation,
          "questions need at least two filler words");
  Require(canary_min_tokens > 2 * entity_mentions, ErrorKind::kValidation,
          "canaries are too short for their entity mentions");
  Require(embed_dim >= 8, ErrorKind::kValidation, "embedding dimension must be >= 8");
}

json WorldConfig::ToJson() const {
  return {{"vocab_words", vocab_words},
          {"successor_weights", successor_weights},
          {"noise", noise},
          {"background_docs", background_docs},
          {"doc_tokens", doc_tokens},
          {"ngram_order", ngram_order},
          {"ngram_alpha", ngram_alpha},
          {"canaries", canaries},
          {"questions_per_canary", questions_per_canary},
          {"canary_min_tokens", canary_min_tokens},
          {"canary_max_tokens", canary_max_tokens},
          {"entity_mentions", entity_mentions},
          {"question_tokens", question_tokens},
          {"embed_dim", embed_dim},
          {"key", {{"seed", std::to_string(key.seed)}, {"gamma", key.gamma}, {"delta", key.delta}}},
          {"seed", seed}};
}

WorldConfig WorldConfig::FromJson(const json& j) {
  RejectUnknown(j,
                {"vocab_words", "successor_weights", "noise", "background_docs", "doc_tokens",
                 "ngram_order", "ngram_alpha", "canaries", "questions_per_canary",
                 "canary_min_tokens", "canary_max_tokens", "entity_mentions", "question_tokens",
                 "embed_dim", "key", "seed"},
                "world");
  WorldConfig c;
  try {
    ReadKey(j, "vocab_words", c.vocab_words);
    ReadKey(j, "successor_weights", c.successor_weights);
    ReadKey(j, "noise", c.noise);
    ReadKey(j, "background_docs", c.background_docs);
    ReadKey(j, "doc_tokens", c.doc_tokens);
    ReadKey(j, "ngram_order", c.ngram_order);
    ReadKey(j, "ngram_alpha", c.ngram_alpha);
    ReadKey(j, "canaries", c.canaries);
    ReadKey(j, "questions_per_canary", c.questions_per_canary);
    ReadKey(j, "canary_min_tokens", c.canary_min_tokens);
    ReadKey(j, "canary_max_tokens", c.canary_max_tokens);
    ReadKey(j, "entity_mentions", c.entity_mentions);
    ReadKey(j, "question_tokens", c.question_tokens);
    ReadKey(j, "embed_dim", c.embed_dim);
    ReadKey(j, "seed", c.seed);
    if (j.contains("key")) c.key = KeyFromJson(j.at("key"), c.key);
  } catch (const json::exception& e) {
    Fail(ErrorKind::kValidation, std::string("bad world config: ") + e.what());
  }
  return c;
}

TokenSequence SampleLanguage(const WorldConfig& config, std::size_t length, std::uint64_t seed) {
  config.Validate();
  const Chain chain = MakeChain(config);
  Rng rng(seed);
  return TokenSequence{Walk(config, chain, length, rng)};
}

SyntheticWorld BuildWorld(const WorldConfig& config) {
  config.Validate();
  SyntheticWorld w;
  w.config = config;

  std::vector<std::string> tokens = {std::string(kUnknownToken)};
  for (std::size_t i = 0; i < config.vocab_words; ++i) tokens.push_back(" " + PseudoWord(i));
  for (std::size_t c = 0; c < config.canaries; ++c) {
    tokens.push_back(" " + EntityWord(c, 0));
    tokens.push_back(" " + EntityWord(c, 1));
  }
  w.vocab = std::make_shared<const Vocabulary>(std::move(tokens));
  const std::size_t v = w.vocab->size();
  w.green = DeriveGreenList(config.key, v);

  const Chain chain = MakeChain(config);
  Rng doc_rng(DeriveSeed(config.seed, kStreamDocs));
  std::vector<TokenSequence> background_seqs;
  char id[32];
  for (std::size_t d = 0; d < config.background_docs; ++d) {
    TokenSequence seq{Walk(config, chain, config.doc_tokens, doc_rng)};
    std::snprintf(id, sizeof(id), "orig-%05zu", d);
    w.originals.push_back(Document::Make(id, Decode(seq, *w.vocab)));
    w.tokens.emplace(id, seq);
    background_seqs.push_back(std::move(seq));
  }
  w.background = std::make_shared<const NGramModel>(
      TrainNGram(background_seqs, v, config.ngram_order, config.ngram_alpha));

  w.registry.key = config.key;
  w.registry.config = config.ToJson();
  w.registry.vocabulary = {"", v, w.vocab->Fingerprint()};
  const std::string key_fp = config.key.Fingerprint();
  for (std::size_t c = 0; c < config.canaries; ++c) {
    const std::uint64_t seed = DeriveSeed(DeriveSeed(config.seed, kStreamCanary), c);
    Rng rng(seed);
    const std::size_t length =
        config.canary_min_tokens + rng.NextBelow(config.canary_max_tokens - config.canary_min_tokens + 1);
    SamplerConfig sampler;
    sampler.max_tokens = length - 2 * config.entity_mentions;
    sampler.rng_seed = DeriveSeed(seed, 1);
    TokenSequence body = GenerateWatermarked(*w.background, config.key, w.green, sampler, {});
    const TokenId entity[2] = {*w.vocab->Find(" " + EntityWord(c, 0)),
                               *w.vocab->Find(" " + EntityWord(c, 1))};
    const std::size_t mentions = 2 * config.entity_mentions;
    TokenSequence seq;
    std::size_t next = 0;
    for (std::size_t m = 0; m < mentions; ++m) {
      // Spread mentions evenly, alternating entities.
      const std::size_t at = (2 * m + 1) * body.size() / (2 * mentions);
      seq.ids.insert(seq.ids.end(), body.ids.begin() + next, body.ids.begin() + at);
      seq.ids.push_back(entity[m % 2]);
      next = at;
    }
    seq.ids.insert(seq.ids.end(), body.ids.begin() + next, body.ids.end());

    std::snprintf(id, sizeof(id), "canary-%04zu", c);
    const std::string text = Decode(seq, *w.vocab);
    w.canary_docs.push_back(Document::Make(id, text, {{"synthetic", true}}));
    w.tokens.emplace(id, seq);

    CanaryRecord record;
    record.canary_id = id;
    record.text = text;
    record.entities.fictional_entities = {EntityWord(c, 0), EntityWord(c, 1)};
    record.key_fingerprint = key_fp;
    record.created_at = "1970-01-01T00:00:00Z";
    record.generation_seed = seed;
    record.token_count = seq.size();
    record.green_fraction = GreenFraction(seq, w.green);
    // Both entities, then uniform filler words; repeats redrawn.
    Rng qrng(DeriveSeed(seed, kStreamQuestion));
    while (record.query_questions.size() < config.questions_per_canary) {
      const std::size_t q = record.query_questions.size();
      TokenSequence question{{entity[q % 2], entity[(q + 1) % 2]}};
      for (std::size_t f = 0; f < config.question_tokens; ++f) {
        question.ids.push_back(static_cast<TokenId>(1 + qrng.NextBelow(config.vocab_words)));
      }
      std::string text = Decode(question, *w.vocab);
      if (std::find(record.query_questions.begin(), record.query_questions.end(), text) ==
          record.query_questions.end()) {
        record.query_questions.push_back(std::move(text));
      }
    }
    w.registry.canaries.push_back(std::move(record));
  }
  return w;
}

ChannelConfig ChannelSpec::Resolve(std::shared_ptr<const NGramModel> background,
                                   std::uint64_t seed) const {
  ChannelConfig c;
  if (!preset.empty()) {
    c = PresetChannel(ParseChannelPreset(preset));
  } else {
    c.preservation_prob = preservation_prob;
    c.response_length = response_length;
  }
  c.background = std::move(background);
  c.rng_seed = seed;
  c.Validate();
  return c;
}

AuditBench::AuditBench(SyntheticWorld world, const ChannelSpec& channel, std::uint64_t seed)
    : world_(std::move(world)),
      seed_(seed),
      embedder_(world_.config.embed_dim, DeriveSeed(world_.config.seed, kStreamEmbed)) {
  Require(channel.k >= 1, ErrorKind::kValidation, "retrieval k must be >= 1");
  Require(!world_.canary_docs.empty(), ErrorKind::kValidation, "world has no canaries");
  std::vector<Document> all = world_.originals;
  all.insert(all.end(), world_.canary_docs.begin(), world_.canary_docs.end());
  auto protected_index = std::make_shared<const VectorIndex>(BuildIndex(all, embedder_).index);
  auto clean_index = std::make_shared<const VectorIndex>(BuildIndex(world_.originals, embedder_).index);
  const ChannelConfig cc = channel.Resolve(world_.background, DeriveSeed(seed, kStreamChannel));
  protected_sim_ = std::make_unique<RagSimulator>(protected_index, world_.tokens, world_.vocab, cc, channel.k);
  clean_sim_ = std::make_unique<RagSimulator>(clean_index, world_.tokens, world_.vocab, cc, channel.k);

  std::size_t hits = 0, top1 = 0, total = 0;
  for (const auto& record : world_.registry.canaries) {
    for (const auto& q : record.query_questions) {
      const auto r = protected_sim_->Retrieve(q, embedder_);
      ++total;
      top1 += r.hits[0].doc_id == record.canary_id ? 1 : 0;
      hits += std::any_of(r.hits.begin(), r.hits.end(),
                          [&](const Hit& h) { return h.doc_id == record.canary_id; });
      protected_cache_.emplace(q, r);
      clean_cache_.emplace(q, clean_sim_->Retrieve(q, embedder_));
    }
  }
  retrieval_accuracy_ = static_cast<double>(hits) / static_cast<double>(total);
  top1_accuracy_ = static_cast<double>(top1) / static_cast<double>(total);

  std::size_t green = 0, tokens = 0;
  for (const auto& doc : world_.originals) {
    const auto counts = CountGreen(world_.tokens.at(doc.id).ids, world_.green);
    green += counts.green;
    tokens += counts.tokens;
  }
  background_green_ = static_cast<double>(green) / static_cast<double>(tokens);
}

double AuditBench::ExpectedResponseGreen(std::size_t canary) const {
  const ChannelConfig& ch = protected_sim_->channel();
  const TokenSequence& seq = world_.tokens.at(world_.registry.canaries.at(canary).canary_id);
  const std::size_t n = ch.response_length;
  const double p = ch.preservation_prob;
  // tail[i] = P(Binomial(n, p) > i), the chance the (i+1)-th copy happens.
  std::vector<double> pmf(n + 1, 0.0);
  for (std::size_t m = 0; m <= n; ++m) {
    const double log_choose = std::lgamma(n + 1.0) - std::lgamma(m + 1.0) - std::lgamma(n - m + 1.0);
    if (p == 0.0) {
      pmf[m] = m == 0 ? 1.0 : 0.0;
    } else if (p == 1.0) {
      pmf[m] = m == n ? 1.0 : 0.0;
    } else {
      pmf[m] = std::exp(log_choose + m * std::log(p) + (n - m) * std::log1p(-p));
    }
  }
  double copied_green = 0.0;
  double tail = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    tail -= pmf[i];
    if (world_.green.IsGreen(seq.ids[i % seq.size()])) copied_green += std::max(tail, 0.0);
  }
  return (copied_green + (1.0 - p) * static_cast<double>(n) * background_green_) /
         static_cast<double>(n);
}

AuditOutcome AuditBench::Trial(bool positive, std::size_t t, std::size_t quota,
                               std::size_t queries_per_canary, double eta) const {
  AuditPlan plan;
  plan.registry = &world_.registry;
  plan.quota = quota;
  plan.queries_per_canary = queries_per_canary;
  plan.eta = eta;
  const std::uint64_t stream = positive ? kStreamPositive : kStreamNegative;
  plan.selection_seed = DeriveSeed(DeriveSeed(seed_, stream), t);
  SimResponder responder(positive ? *protected_sim_ : *clean_sim_, embedder_,
                         DeriveSeed(DeriveSeed(seed_, stream + 100), t),
                         positive ? &protected_cache_ : &clean_cache_);
  return RunAudit(responder, plan, *world_.vocab, world_.green);
}

DetectionReport RescoreOutcome(const AuditOutcome& outcome, const Vocabulary& vocab,
                               const GreenList& green, double gamma, double eta) {
  GreenCounts total;
  for (const auto& q : outcome.queries) {
    if (!q.error.empty()) continue;
    const auto counts = CountGreen(Encode(q.response, vocab).ids, green);
    total.tokens += counts.tokens;
    total.green += counts.green;
  }
  return ReportFromCounts(total, gamma, eta);
}

double SlopeThroughOrigin(const std::vector<double>& x, const std::vector<double>& y) {
  Require(x.size() == y.size() && !x.empty(), ErrorKind::kInvalidArgument,
          "slope needs paired nonempty data");
  double xy = 0.0, xx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xy += x[i] * y[i];
    xx += x[i] * x[i];
  }
  Require(xx > 0.0, ErrorKind::kInvalidArgument, "slope needs a nonzero x");
  return xy / xx;
}

void ExperimentConfig::Validate() const {
  world.Validate();
  Require(axis == "quota" || axis == "delta" || axis == "canaries", ErrorKind::kValidation,
          "unknown sweep axis '" + axis + "' (quota|delta|canaries)");
  Require(!values.empty(), ErrorKind::kValidation, "sweep needs values");
  for (double v : values) {
    if (axis == "delta") {
      Require(v >= 0.0, ErrorKind::kValidation, "delta values must be >= 0");
    } else {
      Require(v >= 1.0 && v == std::floor(v), ErrorKind::kValidation,
              axis + " values must be positive integers");
    }
  }
  Require(quota >= 1, ErrorKind::kValidation, "quota must be >= 1");
  Require(queries_per_canary >= 1, ErrorKind::kValidation, "queries per canary must be >= 1");
  Require(queries_per_canary <= world.questions_per_canary, ErrorKind::kValidation,
          "queries per canary exceeds questions per canary");
  Require(positive_trials >= 1 && negative_trials >= 1, ErrorKind::kValidation,
          "need at least one trial per class");
  Require(eta_fpr > 0.0 && eta_fpr < 1.0, ErrorKind::kValidation, "fpr must be in (0, 1)");
  Require(bootstrap_replicates >= 1, ErrorKind::kValidation, "need bootstrap replicates");
  Require(threads >= 1, ErrorKind::kValidation, "threads must be >= 1");
  if (!channel.preset.empty()) {
    (void)ParseChannelPreset(channel.preset);
  } else {
    Require(channel.preservation_prob >= 0.0 && channel.preservation_prob <= 1.0,
            ErrorKind::kValidation, "preservation probability must be in [0, 1]");
    Require(channel.response_length >= 1, ErrorKind::kValidation,
            "response length must be >= 1");
  }
  Require(channel.k >= 1, ErrorKind::kValidation, "retrieval k must be >= 1");
}

json ExperimentConfig::ToJson() const {
  return {{"world", world.ToJson()},
          {"channel",
           {{"preset", channel.preset},
            {"preservation_prob", channel.preservation_prob},
            {"response_length", channel.response_length},
            {"k", channel.k}}},
          {"axis", axis},
          {"values", values},
          {"quota", quota},
          {"queries_per_canary", queries_per_canary},
          {"positive_trials", positive_trials},
          {"negative_trials", negative_trials},
          {"eta_fpr", eta_fpr},
          {"bootstrap_replicates", bootstrap_replicates},
          {"seed", seed},
          {"threads", threads}};
}

ExperimentConfig ExperimentConfig::FromJson(const json& j) {
  RejectUnknown(j,
                {"world", "channel", "axis", "values", "quota", "queries_per_canary",
                 "positive_trials", "negative_trials", "eta_fpr", "bootstrap_replicates", "seed",
                 "threads"},
                "experiment");
  ExperimentConfig c;
  try {
    if (j.contains("world")) c.world = WorldConfig::FromJson(j.at("world"));
    if (j.contains("channel")) {
      const json& ch = j.at("channel");
      RejectUnknown(ch, {"preset", "preservation_prob", "response_length", "k"}, "channel");
      ReadKey(ch, "preset", c.channel.preset);
      ReadKey(ch, "preservation_prob", c.channel.preservation_prob);
      ReadKey(ch, "response_length", c.channel.response_length);
      ReadKey(ch, "k", c.channel.k);
    }
    ReadKey(j, "axis", c.axis);
    ReadKey(j, "values", c.values);
    ReadKey(j, "quota", c.quota);
    ReadKey(j, "queries_per_canary", c.queries_per_canary);
    ReadKey(j, "positive_trials", c.positive_trials);
    ReadKey(j, "negative_trials", c.negative_trials);
    ReadKey(j, "eta_fpr", c.eta_fpr);
    ReadKey(j, "bootstrap_replicates", c.bootstrap_replicates);
    ReadKey(j, "seed", c.seed);
    ReadKey(j, "threads", c.threads);
  } catch (const json::exception& e) {
    Fail(ErrorKind::kValidation, std::string("bad experiment config: ") + e.what());
  }
  return c;
}

std::string ExperimentConfig::Fingerprint() const { return Sha256Hex(ToJson().dump()); }

json SweepRow::ToJson() const {
  return {{"axis", axis},
          {"value", value},
          {"quota", quota},
          {"queries_per_canary", queries_per_canary},
          {"trials", trials},
          {"auc", auc},
          {"auc_ci", {auc_lo, auc_hi}},
          {"tpr@0.01", tpr_at_1},
          {"tpr@0.10", tpr_at_10},
          {"mean_z_pos", mean_z_pos},
          {"mean_z_neg", mean_z_neg},
          {"theory_z", theory_z},
          {"null_fpr", null_fpr},
          {"wrong_key_fpr", wrong_key_fpr},
          {"wrong_key_mean_z", wrong_key_mean_z},
          {"response_green", response_green},
          {"retrieval_accuracy", retrieval_accuracy},
          {"seed", std::to_string(seed)}};
}

std::string SweepResult::Jsonl() const {
  std::string out;
  for (const auto& row : rows) out += row.ToJson().dump() + "\n";
  return out;
}

std::string SweepResult::Table() const {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-9s %7s %6s %5s %7s %17s %9s %9s %8s %8s %8s\n", "axis",
                "value", "quota", "q/c", "auc", "auc 95% ci", "tpr@1%", "tpr@10%", "z_pos",
                "z_theory", "z_neg");
  out += line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line),
                  "%-9s %7.3g %6zu %5zu %7.4f [%7.4f, %7.4f] %9.4f %9.4f %8.3f %8.3f %8.3f\n",
                  r.axis.c_str(), r.value, r.quota, r.queries_per_canary, r.auc, r.auc_lo,
                  r.auc_hi, r.tpr_at_1, r.tpr_at_10, r.mean_z_pos, r.theory_z, r.mean_z_neg);
    out += line;
  }
  return out;
}

namespace {

SweepRow RunRow(const AuditBench& bench, const ExperimentConfig& cfg, double value,
                std::size_t quota, std::size_t qpc) {
  const double eta = ThresholdForFpr(cfg.eta_fpr);
  const auto& world = bench.world();
  SweepRow row;
  row.axis = cfg.axis;
  row.value = value;
  row.quota = quota;
  row.queries_per_canary = qpc;
  row.trials = cfg.positive_trials;
  row.seed = cfg.seed;
  row.positive_z.resize(cfg.positive_trials);
  row.negative_z.resize(cfg.negative_trials);
  std::vector<double> wrong_z(cfg.positive_trials), expected_green(cfg.positive_trials);
  std::vector<std::size_t> green(cfg.positive_trials), tokens(cfg.positive_trials);
  // Map canary id back to its index for the expected green share.
  std::unordered_map<std::string, std::size_t> index_of;
  for (std::size_t i = 0; i < world.registry.canaries.size(); ++i) {
    index_of.emplace(world.registry.canaries[i].canary_id, i);
  }
  ParallelFor(cfg.positive_trials, cfg.threads, [&](std::size_t t) {
    const AuditOutcome o = bench.Trial(true, t, quota, qpc, eta);
    row.positive_z[t] = o.report.z;
    green[t] = o.report.green_count;
    tokens[t] = o.report.token_count;
    WatermarkKey wrong = world.config.key;
    wrong.seed = DeriveSeed(DeriveSeed(cfg.seed, kStreamWrongKey), t);
    const GreenList wrong_green = DeriveGreenList(wrong, world.vocab->size());
    wrong_z[t] = RescoreOutcome(o, *world.vocab, wrong_green, wrong.gamma, eta).z;
    double e = 0.0;
    for (const auto& q : o.queries) e += bench.ExpectedResponseGreen(index_of.at(q.canary_id));
    expected_green[t] = e / static_cast<double>(o.queries.size());
  });
  ParallelFor(cfg.negative_trials, cfg.threads, [&](std::size_t t) {
    row.negative_z[t] = bench.Trial(false, t, quota, qpc, eta).report.z;
  });
  const RocCurve roc = EvaluateRoc(row.positive_z, row.negative_z);
  row.auc = roc.auc;
  row.tpr_at_1 = roc.tpr_at.at(0.01);
  row.tpr_at_10 = roc.tpr_at.at(0.10);
  std::tie(row.auc_lo, row.auc_hi) = BootstrapAucInterval(
      row.positive_z, row.negative_z, cfg.bootstrap_replicates,
      DeriveSeed(DeriveSeed(cfg.seed, kStreamBootstrap), static_cast<std::uint64_t>(value * 1000)));
  row.mean_z_pos = Mean(row.positive_z);
  row.mean_z_neg = Mean(row.negative_z);
  row.wrong_key_mean_z = Mean(wrong_z);
  const auto over = [&](const std::vector<double>& z) {
    return static_cast<double>(std::count_if(z.begin(), z.end(), [&](double s) { return s > eta; })) /
           static_cast<double>(z.size());
  };
  row.null_fpr = over(row.negative_z);
  row.wrong_key_fpr = over(wrong_z);
  row.response_green = static_cast<double>(std::accumulate(green.begin(), green.end(), std::size_t{0})) /
                       static_cast<double>(std::accumulate(tokens.begin(), tokens.end(), std::size_t{0}));
  const double gamma = world.config.key.gamma;
  const double length = static_cast<double>(bench.protected_sim().channel().response_length);
  row.theory_z = std::sqrt(static_cast<double>(quota) * length) * (Mean(expected_green) - gamma) /
                 std::sqrt(gamma * (1.0 - gamma));
  row.retrieval_accuracy = bench.retrieval_accuracy();
  return row;
}

}  // namespace

SweepResult RunExperiment(const ExperimentConfig& cfg) {
  cfg.Validate();
  SweepResult result;
  if (cfg.axis == "delta") {
    for (double delta : cfg.values) {
      WorldConfig w = cfg.world;
      w.key.delta = delta;
      AuditBench bench(BuildWorld(w), cfg.channel, cfg.seed);
      result.rows.push_back(RunRow(bench, cfg, delta, cfg.quota, cfg.queries_per_canary));
    }
    return result;
  }
  AuditBench bench(BuildWorld(cfg.world), cfg.channel, cfg.seed);
  for (double value : cfg.values) {
    const auto n = static_cast<std::size_t>(value);
    if (cfg.axis == "quota") {
      result.rows.push_back(RunRow(bench, cfg, value, n, cfg.queries_per_canary));
    } else {
      result.rows.push_back(
          RunRow(bench, cfg, value, n * cfg.queries_per_canary, cfg.queries_per_canary));
    }
  }
  return result;
}

}  // namespace canary
