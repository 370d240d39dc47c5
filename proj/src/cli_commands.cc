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


#include "canary/cli_commands.h"

#include <filesystem>
#include <memory>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "CLI11.hpp"
#include "canary/audit.h"
#include "canary/canary_synthesis.h"
#include "canary/corpus.h"
#include "canary/experiment.h"
#include "canary/generation.h"
#include "canary/hash.h"
#include "canary/llm_gateway.h"
#include "canary/metrics.h"
#include "canary/rag_simulator.h"
#include "canary/registry.h"
#include "canary/retrieval.h"
#include "canary/rng.h"
#include "canary/tokenization.h"
#include "canary/watermark.h"

namespace canary::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kStreamSynthesis = 1;
constexpr std::uint64_t kStreamSelection = 2;
constexpr std::uint64_t kStreamChannel = 3;
constexpr std::uint64_t kStreamEmbed = 4;
constexpr std::uint64_t kStreamResponder = 5;

// Leaves whose value is an object but replaced as a whole.
const std::set<std::string> kOpaqueLeaves = {"audit.remote.request_template"};

std::string Join(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

void MergeAt(json& base, const json& overlay, const std::string& prefix) {
  Require(overlay.is_object(), ErrorKind::kValidation,
          "config section '" + (prefix.empty() ? std::string("<root>") : prefix) +
              "' must be an object");
  for (const auto& [key, value] : overlay.items()) {
    const std::string path = Join(prefix, key);
    Require(base.contains(key), ErrorKind::kValidation, "unknown config key '" + path + "'");
    json& slot = base[key];
    if (slot.is_object() && !kOpaqueLeaves.count(path)) {
      MergeAt(slot, value, path);
    } else {
      slot = value;
    }
  }
}

json::json_pointer Pointer(const std::string& dotted) {
  std::string p;
  std::stringstream in(dotted);
  std::string seg;
  while (std::getline(in, seg, '.')) p += "/" + seg;
  return json::json_pointer(p);
}

template <typename T>
T Get(const json& cfg, const std::string& dotted) {
  try {
    return cfg.at(Pointer(dotted)).get<T>();
  } catch (const json::exception& e) {
    Fail(ErrorKind::kValidation, "config key '" + dotted + "': " + e.what());
  }
}

std::uint64_t GetU64(const json& cfg, const std::string& dotted) {
  const json& v = cfg.at(Pointer(dotted));
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer() && v.get<std::int64_t>() >= 0) return v.get<std::uint64_t>();
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    std::size_t used = 0;
    try {
      const std::uint64_t out = std::stoull(s, &used);
      if (used == s.size()) return out;
    } catch (const std::logic_error&) {
    }
  }
  Fail(ErrorKind::kValidation, "config key '" + dotted + "' must be an unsigned integer");
}

json Without(json j, std::initializer_list<const char*> keys) {
  for (const char* k : keys) j.erase(k);
  return j;
}

struct Context {
  json config;
  fs::path base_dir;
  std::string fingerprint;
  bool force = false;
  std::ostream& out;
  std::ostream& err;
  HttpTransport transport;

  std::string Raw(const std::string& key) const { return Get<std::string>(config, "paths." + key); }

  fs::path Path(const std::string& key) const {
    const std::string raw = Raw(key);
    Require(!raw.empty(), ErrorKind::kValidation, "paths." + key + " is not set");
    const fs::path p(raw);
    return p.is_absolute() ? p : base_dir / p;
  }

  fs::path Existing(const std::string& key) const {
    const fs::path p = Path(key);
    Require(fs::exists(p), ErrorKind::kNotFound,
            "paths." + key + " does not exist: " + p.string());
    return p;
  }

  std::uint64_t Seed() const { return GetU64(config, "seed"); }
  int Threads() const { return Get<int>(config, "threads"); }

  fs::path ResultFile(const std::string& verb, const std::string& ext) const {
    return Path("results_dir") / (verb + "-" + fingerprint.substr(0, 16) + ext);
  }

  void AppendResult(const std::string& verb, json record) const {
    record["config_fingerprint"] = fingerprint;
    const fs::path file = ResultFile(verb, ".jsonl");
    fs::create_directories(file.parent_path());
    AppendTextFile(file, record.dump() + "\n");
  }

  // Identical contents are left alone; differing contents need --force.
  void GuardedWrite(const fs::path& path, const std::string& contents) const {
    if (fs::exists(path) && !force) {
      Require(ReadTextFile(path) == contents, ErrorKind::kIo,
              "refusing to overwrite " + path.string() + " with different contents; pass --force");
      return;
    }
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    WriteTextFile(path, contents);
  }
};

WatermarkKey KeyFromConfig(const json& cfg) {
  WatermarkKey key{GetU64(cfg, "watermark.seed"), Get<double>(cfg, "watermark.gamma"),
                   Get<double>(cfg, "watermark.delta")};
  key.Validate();
  return key;
}

GatewayOptions GatewayFromConfig(const Context& ctx) {
  const json& cfg = ctx.config;
  GatewayOptions options;
  options.mode = ParseGatewayMode(Get<std::string>(cfg, "gateway.mode"));
  Endpoint endpoint;
  endpoint.base_url = Get<std::string>(cfg, "gateway.base_url");
  endpoint.chat_model = Get<std::string>(cfg, "gateway.chat_model");
  endpoint.embedding_model = Get<std::string>(cfg, "gateway.embedding_model");
  endpoint.completion_model = Get<std::string>(cfg, "gateway.completion_model");
  endpoint.timeout_seconds = Get<double>(cfg, "gateway.timeout_seconds");
  options.endpoint = ResolveEndpointFromEnv(endpoint);
  options.retry.max_attempts = Get<int>(cfg, "gateway.max_attempts");
  Require(options.retry.max_attempts >= 1, ErrorKind::kValidation,
          "gateway.max_attempts must be >= 1");
  options.max_concurrency = ctx.Threads();
  options.transport = ctx.transport;
  if (options.mode == GatewayMode::kReplay) {
    options.fixture_dir = ctx.Existing("fixtures");
  } else if (options.mode == GatewayMode::kRecord) {
    options.fixture_dir = ctx.Path("fixtures");
  }
  return options;
}

void RequireReachableEndpoint(const GatewayOptions& options) {
  if (options.mode == GatewayMode::kReplay) return;
  Require(!options.endpoint.base_url.empty(), ErrorKind::kValidation,
          "gateway.base_url is not set and CANARY_API_BASE is empty");
}

std::shared_ptr<const Vocabulary> LoadRegistryVocab(const Context& ctx, const Registry& registry) {
  auto vocab = std::make_shared<const Vocabulary>(LoadVocabulary(ctx.Existing("vocab")));
  Require(registry.vocabulary.fingerprint.empty() ||
              vocab->Fingerprint() == registry.vocabulary.fingerprint,
          ErrorKind::kValidation, "vocabulary does not match the registry fingerprint");
  return vocab;
}

std::unordered_set<std::string> CanaryIds(const Registry& registry) {
  std::unordered_set<std::string> ids;
  for (const auto& c : registry.canaries) ids.insert(c.canary_id);
  return ids;
}

ExperimentConfig ExperimentFromConfig(const Context& ctx) {
  ExperimentConfig exp = ExperimentConfig::FromJson(ctx.config.at("experiment"));
  exp.seed = ctx.Seed();
  exp.threads = ctx.Threads();
  return exp;
}

int CmdProtect(const Context& ctx) {
  const json& cfg = ctx.config;
  const fs::path corpus_path = ctx.Existing("corpus");
  const fs::path out_corpus = ctx.Path("protected_corpus");
  const fs::path registry_path = ctx.Path("registry");
  ProtectOptions options;
  options.count = Get<std::size_t>(cfg, "protect.count");
  options.queries_per_canary = Get<std::size_t>(cfg, "protect.queries_per_canary");
  options.vocab_max_size = Get<std::size_t>(cfg, "protect.vocab_max_size");
  options.key = KeyFromConfig(cfg);
  options.synthesis = SynthesisConfig::FromJson(cfg.at(Pointer("protect.synthesis")));
  options.synthesis.seed = DeriveSeed(ctx.Seed(), kStreamSynthesis);
  options.vocab_path = ctx.Raw("vocab");
  const GatewayOptions gateway_options = GatewayFromConfig(ctx);
  RequireReachableEndpoint(gateway_options);
  // Fixture order must not depend on thread scheduling.
  options.synthesis.max_concurrency =
      gateway_options.mode == GatewayMode::kLive ? ctx.Threads() : 1;
  options.synthesis.Validate();
  Require(options.count >= 1, ErrorKind::kValidation, "protect.count must be >= 1");
  Require(options.queries_per_canary >= 1, ErrorKind::kValidation,
          "protect.queries_per_canary must be >= 1");

  const std::vector<Document> docs = LoadCorpus(corpus_path);
  std::optional<Vocabulary> vocab;
  if (!options.vocab_path.empty() && fs::exists(ctx.Path("vocab"))) {
    vocab = LoadVocabulary(ctx.Path("vocab"));
  }

  Gateway gateway(gateway_options);
  const ProtectResult result =
      ProtectDataset(docs, options, gateway, vocab ? &*vocab : nullptr);
  for (const auto& f : result.failures) {
    ctx.err << json{{"error", ErrorKindName(ErrorKind::kSynthesis)},
                    {"canary_index", f.index},
                    {"source_doc_id", f.source_doc_id},
                    {"stage", f.stage},
                    {"attempts", f.attempts},
                    {"message", f.message},
                    {"raw_output", f.raw_output}}
                   .dump()
            << "\n";
  }
  if (!result.registry.canaries.empty()) {
    ctx.GuardedWrite(out_corpus, SerializeCorpus(result.corpus));
    ctx.GuardedWrite(registry_path, SerializeRegistry(result.registry));
    if (!vocab && result.vocab && !options.vocab_path.empty()) {
      ctx.GuardedWrite(ctx.Path("vocab"), SerializeVocabulary(*result.vocab));
    }
  }
  const json summary = {{"command", "protect"},
                        {"canaries", result.registry.canaries.size()},
                        {"failures", result.failures.size()},
                        {"mean_green_fraction", result.mean_green_fraction},
                        {"corpus_documents", result.corpus.size()},
                        {"key_fingerprint", options.key.Fingerprint()}};
  ctx.out << summary.dump() << "\n";
  ctx.AppendResult("protect", summary);
  return result.failures.empty() && !result.registry.canaries.empty() ? kExitOk : kExitSynthesis;
}

int CmdAudit(const Context& ctx) {
  const json& cfg = ctx.config;
  const std::string target = Get<std::string>(cfg, "audit.target");
  Require(target == "sim" || target == "remote", ErrorKind::kValidation,
          "audit.target must be 'sim' or 'remote', got '" + target + "'");
  const Registry registry = LoadRegistry(ctx.Existing("registry"));
  const auto vocab = LoadRegistryVocab(ctx, registry);
  AuditPlan plan;
  plan.registry = &registry;
  plan.quota = Get<std::size_t>(cfg, "audit.quota");
  plan.queries_per_canary = Get<std::size_t>(cfg, "audit.queries_per_canary");
  plan.eta = ThresholdForFpr(Get<double>(cfg, "audit.fpr"));
  plan.selection_seed = DeriveSeed(ctx.Seed(), kStreamSelection);
  plan.mask_echo = Get<bool>(cfg, "audit.mask_echo");
  plan.Validate();
  SelectQueries(registry, plan.quota, plan.queries_per_canary, plan.selection_seed);
  const GreenList green = DeriveGreenList(registry.key, vocab->size());

  AuditOutcome outcome;
  if (target == "sim") {
    const std::vector<Document> docs = LoadCorpus(ctx.Existing("protected_corpus"));
    HashingEmbedder embedder(Get<std::size_t>(cfg, "audit.embed_dim"),
                             DeriveSeed(ctx.Seed(), kStreamEmbed));
    const IndexBuild built = BuildIndex(docs, embedder);
    for (const auto& [id, reason] : built.failures) {
      ctx.err << json{{"warning", "index"}, {"doc_id", id}, {"message", reason}}.dump() << "\n";
    }
    auto index = std::make_shared<const VectorIndex>(built.index);
    const auto canary_ids = CanaryIds(registry);
    std::unordered_map<std::string, TokenSequence> tokens;
    std::vector<TokenSequence> originals;
    for (const auto& d : docs) {
      TokenSequence seq = Encode(d.text, *vocab);
      if (!canary_ids.count(d.id)) originals.push_back(seq);
      tokens.emplace(d.id, std::move(seq));
    }
    if (originals.empty()) {
      for (const auto& [id, seq] : tokens) originals.push_back(seq);
    }
    auto background = std::make_shared<const NGramModel>(
        TrainNGram(originals, vocab->size(), Get<std::size_t>(cfg, "audit.background_order"),
                   Get<double>(cfg, "audit.background_alpha")));
    ChannelSpec spec;
    spec.preset = Get<std::string>(cfg, "audit.channel.preset");
    spec.preservation_prob = Get<double>(cfg, "audit.channel.preservation_prob");
    spec.response_length = Get<std::size_t>(cfg, "audit.channel.response_length");
    spec.k = Get<std::size_t>(cfg, "audit.k");
    const RagSimulator sim(index, std::move(tokens), vocab,
                           spec.Resolve(background, DeriveSeed(ctx.Seed(), kStreamChannel)),
                           spec.k);
    SimResponder responder(sim, embedder, DeriveSeed(ctx.Seed(), kStreamResponder));
    outcome = RunAudit(responder, plan, *vocab, green);
  } else {
    RemoteResponderConfig remote;
    remote.url = Get<std::string>(cfg, "audit.remote.url");
    remote.request_template = cfg.at(Pointer("audit.remote.request_template"));
    remote.answer_path = Get<std::string>(cfg, "audit.remote.answer_path");
    remote.Validate();
    GatewayOptions options = GatewayFromConfig(ctx);
    if (options.mode == GatewayMode::kLive && options.endpoint.base_url.empty()) {
      options.endpoint.base_url = remote.url;
    }
    Gateway gateway(options);
    RemoteResponder responder(gateway, remote);
    outcome = RunAudit(responder, plan, *vocab, green);
  }
  for (const auto& q : outcome.queries) {
    if (!q.error.empty()) {
      ctx.err << json{{"warning", "query_failed"}, {"canary_id", q.canary_id}, {"message", q.error}}
                     .dump()
              << "\n";
    }
  }
  json record = outcome.ToJson();
  record["command"] = "audit";
  record["target"] = target;
  ctx.AppendResult("audit", record);
  ctx.out << json{{"command", "audit"},
                  {"target", target},
                  {"z", outcome.report.z},
                  {"eta", outcome.report.eta},
                  {"p_value", outcome.report.p_value},
                  {"tokens", outcome.report.token_count},
                  {"green", outcome.report.green_count},
                  {"failures", outcome.failures},
                  {"verdict", outcome.verdict ? "watermarked" : "not_watermarked"}}
                 .dump()
          << "\n";
  return outcome.verdict ? kExitOk : kExitNotWatermarked;
}

void EmitSweep(const Context& ctx, const std::string& verb, const SweepResult& result) {
  for (const auto& row : result.rows) {
    json record = row.ToJson();
    record["command"] = verb;
    ctx.AppendResult(verb, record);
  }
  ctx.out << result.Table();
}

int CmdSimulate(const Context& ctx) {
  ExperimentConfig exp = ExperimentFromConfig(ctx);
  const std::size_t canaries = Get<std::size_t>(ctx.config, "simulate.canaries");
  exp.queries_per_canary = Get<std::size_t>(ctx.config, "audit.queries_per_canary");
  if (canaries > 0) {
    exp.axis = "canaries";
    exp.values = {static_cast<double>(canaries)};
  } else {
    exp.axis = "quota";
    exp.values = {static_cast<double>(Get<std::size_t>(ctx.config, "audit.quota"))};
  }
  exp.Validate();
  EmitSweep(ctx, "simulate", RunExperiment(exp));
  return kExitOk;
}

int CmdSweep(const Context& ctx) {
  const ExperimentConfig exp = ExperimentFromConfig(ctx);
  exp.Validate();
  fs::create_directories(ctx.Path("results_dir"));
  const SweepResult result = RunExperiment(exp);
  EmitSweep(ctx, "sweep", result);
  ctx.GuardedWrite(ctx.ResultFile("sweep", ".txt"), result.Table());
  return kExitOk;
}

int CmdMetrics(const Context& ctx) {
  const json& cfg = ctx.config;
  const std::vector<Document> originals = LoadCorpus(ctx.Existing("corpus"));
  const std::vector<Document> protected_docs = LoadCorpus(ctx.Existing("protected_corpus"));
  const Registry registry = LoadRegistry(ctx.Existing("registry"));
  const auto vocab = LoadRegistryVocab(ctx, registry);
  const std::string scorer_name = Get<std::string>(cfg, "metrics.scorer");
  Require(scorer_name == "ngram" || scorer_name == "gateway", ErrorKind::kValidation,
          "metrics.scorer must be 'ngram' or 'gateway'");
  const std::size_t words = Get<std::size_t>(cfg, "metrics.words_per_block");
  Require(words >= 1, ErrorKind::kValidation, "metrics.words_per_block must be >= 1");

  std::unordered_map<std::string, const Document*> by_id;
  for (const auto& d : protected_docs) by_id.emplace(d.id, &d);
  std::vector<std::string> refs, cands;
  for (const auto& d : originals) {
    const auto it = by_id.find(d.id);
    if (it == by_id.end()) continue;
    refs.push_back(d.text);
    cands.push_back(it->second->text);
  }
  Require(!refs.empty(), ErrorKind::kValidation, "no original id occurs in the protected corpus");
  const double bleu = Bleu(refs, cands);

  std::vector<std::string> original_blocks, canary_blocks;
  for (const auto& d : originals) {
    for (auto& b : SplitBlocks(d.text, words)) original_blocks.push_back(std::move(b));
  }
  for (const auto& c : registry.canaries) {
    for (auto& b : SplitBlocks(c.text, words)) canary_blocks.push_back(std::move(b));
  }
  Require(!original_blocks.empty() && !canary_blocks.empty(), ErrorKind::kValidation,
          "metrics need original and canary text");

  std::unique_ptr<PerplexityScorer> scorer;
  std::unique_ptr<NGramModel> model;
  std::unique_ptr<Gateway> gateway;
  if (scorer_name == "ngram") {
    std::vector<TokenSequence> train;
    for (const auto& d : originals) train.push_back(Encode(d.text, *vocab));
    model = std::make_unique<NGramModel>(TrainNGram(train, vocab->size(),
                                                    Get<std::size_t>(cfg, "metrics.ngram_order"),
                                                    Get<double>(cfg, "metrics.ngram_alpha")));
    scorer = std::make_unique<NGramPerplexityScorer>(*model, *vocab);
  } else {
    const GatewayOptions options = GatewayFromConfig(ctx);
    RequireReachableEndpoint(options);
    gateway = std::make_unique<Gateway>(options);
    scorer = std::make_unique<GatewayPerplexityScorer>(*gateway);
  }
  const BlockReport reference = FilteringRate(original_blocks, *scorer,
                                              std::numeric_limits<double>::infinity());
  double threshold = 0.0;
  for (double p : reference.perplexities) {
    if (std::isfinite(p)) threshold = std::max(threshold, p);
  }
  const BlockReport canary_report = FilteringRate(canary_blocks, *scorer, threshold);

  const std::string lines =
      MetricRecordLine("bleu", "paired_originals", bleu, ctx.fingerprint) +
      MetricRecordLine("perplexity_threshold", "max_original_block", threshold, ctx.fingerprint) +
      MetricRecordLine("filtering_rate", "canary_blocks", canary_report.filtered_fraction,
                       ctx.fingerprint);
  ctx.out << lines;
  const fs::path file = ctx.ResultFile("metrics", ".jsonl");
  fs::create_directories(file.parent_path());
  AppendTextFile(file, lines);
  return kExitOk;
}

int CmdRegistryInspect(const Context& ctx) {
  const Registry registry = LoadRegistry(ctx.Existing("registry"));
  json canaries = json::array();
  for (const auto& c : registry.canaries) {
    canaries.push_back({{"canary_id", c.canary_id},
                        {"source_doc_id", c.source_doc_id},
                        {"fictional_entities", c.entities.fictional_entities},
                        {"questions", c.query_questions.size()},
                        {"token_count", c.token_count},
                        {"green_fraction", c.green_fraction}});
  }
  ctx.out << json{{"command", "registry inspect"},
                  {"format", kRegistryFormat},
                  {"key_fingerprint", registry.key.Fingerprint()},
                  {"gamma", registry.key.gamma},
                  {"delta", registry.key.delta},
                  {"vocabulary", {{"path", registry.vocabulary.path},
                                  {"size", registry.vocabulary.size},
                                  {"fingerprint", registry.vocabulary.fingerprint}}},
                  {"canary_count", registry.canaries.size()},
                  {"question_count", registry.QuestionCount()},
                  {"canaries", canaries}}
                 .dump(2)
          << "\n";
  return kExitOk;
}

int CmdRegistryVerify(const Context& ctx) {
  const Registry registry = LoadRegistry(ctx.Existing("registry"));
  std::optional<std::vector<Document>> corpus;
  if (!ctx.Raw("protected_corpus").empty()) corpus = LoadCorpus(ctx.Existing("protected_corpus"));
  std::vector<std::string> problems = VerifyRegistry(registry, corpus ? &*corpus : nullptr);
  if (!ctx.Raw("vocab").empty() && fs::exists(ctx.Path("vocab"))) {
    const Vocabulary vocab = LoadVocabulary(ctx.Path("vocab"));
    if (vocab.Fingerprint() != registry.vocabulary.fingerprint) {
      problems.push_back("vocabulary fingerprint differs from " + ctx.Path("vocab").string());
    }
    if (vocab.size() != registry.vocabulary.size) {
      problems.push_back("vocabulary size differs from the registry");
    }
  }
  ctx.out << json{{"command", "registry verify"},
                  {"ok", problems.empty()},
                  {"canary_count", registry.canaries.size()},
                  {"problems", problems}}
                 .dump()
          << "\n";
  Require(problems.empty(), ErrorKind::kValidation,
          std::to_string(problems.size()) + " registry problem(s)");
  return kExitOk;
}

int CmdVocabBuild(const Context& ctx) {
  const std::vector<Document> docs = LoadCorpus(ctx.Existing("corpus"));
  const fs::path out = ctx.Path("vocab");
  const std::vector<std::string> texts = CorpusTexts(docs);
  const Vocabulary vocab =
      BuildVocabulary(texts, Get<std::size_t>(ctx.config, "protect.vocab_max_size"));
  ctx.GuardedWrite(out, SerializeVocabulary(vocab));
  ctx.out << json{{"command", "vocab build"},
                  {"size", vocab.size()},
                  {"fingerprint", vocab.Fingerprint()}}
                 .dump()
          << "\n";
  return kExitOk;
}

void PrintError(std::ostream& err, const Error& e) {
  json record = {{"error", ErrorKindName(e.kind())}, {"message", e.what()}};
  if (const auto* s = dynamic_cast<const SynthesisError*>(&e)) {
    record["stage"] = s->stage();
    record["attempts"] = s->attempts();
  }
  err << record.dump() << "\n";
}

}  // namespace

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kValidation:
    case ErrorKind::kNotFound:
      return kExitValidation;
    case ErrorKind::kIo:
      return kExitIo;
    case ErrorKind::kTransport:
      return kExitTransport;
    case ErrorKind::kSynthesis:
      return kExitSynthesis;
    case ErrorKind::kDetectionPrecondition:
      return kExitDetectionPrecondition;
    case ErrorKind::kMissingFixture:
      return kExitMissingFixture;
    case ErrorKind::kInternal:
      return kExitInternal;
  }
  return kExitInternal;
}

json DefaultConfig() {
  const Endpoint endpoint;
  const RetryPolicy retry;
  const ProtectOptions protect;
  const SynthesisConfig synthesis;
  const ChannelSpec channel;
  const RemoteResponderConfig remote;
  return {
      {"seed", 1},
      {"threads", 1},
      {"paths",
       {{"corpus", ""},
        {"protected_corpus", ""},
        {"registry", ""},
        {"vocab", ""},
        {"fixtures", ""},
        {"results_dir", "results"}}},
      {"watermark", {{"seed", "0"}, {"gamma", 0.5}, {"delta", 2.0}}},
      {"gateway",
       {{"mode", "live"},
        {"base_url", ""},
        {"chat_model", endpoint.chat_model},
        {"embedding_model", endpoint.embedding_model},
        {"completion_model", endpoint.completion_model},
        {"timeout_seconds", endpoint.timeout_seconds},
        {"max_attempts", retry.max_attempts}}},
      {"protect",
       {{"count", protect.count},
        {"queries_per_canary", 14},
        {"vocab_max_size", protect.vocab_max_size},
        {"synthesis", Without(synthesis.ToJson(), {"seed"})}}},
      {"audit",
       {{"target", "sim"},
        {"quota", 12},
        {"queries_per_canary", 1},
        {"fpr", 0.01},
        {"mask_echo", false},
        {"k", channel.k},
        {"embed_dim", 1024},
        {"background_order", 2},
        {"background_alpha", 0.01},
        {"channel",
         {{"preset", channel.preset},
          {"preservation_prob", channel.preservation_prob},
          {"response_length", channel.response_length}}},
        {"remote",
         {{"url", remote.url},
          {"request_template", remote.request_template},
          {"answer_path", remote.answer_path}}}}},
      {"simulate", {{"canaries", 0}}},
      {"experiment", Without(ExperimentConfig{}.ToJson(), {"seed", "threads"})},
      {"metrics",
       {{"words_per_block", 50}, {"ngram_order", 3}, {"ngram_alpha", 0.1}, {"scorer", "ngram"}}},
  };
}

void MergeConfig(json& base, const json& overlay) { MergeAt(base, overlay, ""); }

void ApplyOverride(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  Require(eq != std::string::npos && eq > 0, ErrorKind::kInvalidArgument,
          "override must look like key.path=value: '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json* node = &config;
  std::stringstream in(path);
  std::string seg;
  while (std::getline(in, seg, '.')) {
    Require(node->is_object() && node->contains(seg), ErrorKind::kValidation,
            "unknown config key '" + path + "'");
    node = &(*node)[seg];
  }
  if (node->is_string()) {
    *node = text;
    return;
  }
  try {
    *node = json::parse(text);
  } catch (const json::exception&) {
    Fail(ErrorKind::kValidation, "value for '" + path + "' is not valid JSON: " + text);
  }
}

std::string ConfigFingerprint(const json& config) { return Sha256Hex(config.dump()); }

int Run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const RunHooks& hooks) {
  CLI::App app{"Watermarked canary documents for dataset protection and RAG audits", "canary"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  std::size_t quota = 0, canaries = 0, qpc = 0;
  double delta = 0.0, fpr = 0.0;
  std::string target, fixtures, axis, values;
  std::vector<std::string> sets;
  bool force = false;
  app.add_option("--config", config_path, "JSON config file");
  auto* seed_opt = app.add_option("--seed", seed, "Seed for all derived randomness");
  auto* quota_opt = app.add_option("--quota", quota, "Audit query quota N");
  auto* delta_opt = app.add_option("--delta", delta, "Watermark logit bias");
  auto* canaries_opt = app.add_option("--canaries", canaries, "Number of canaries");
  auto* qpc_opt = app.add_option("--queries-per-canary", qpc, "Queries per canary");
  auto* fpr_opt = app.add_option("--fpr", fpr, "Target false-positive rate");
  auto* target_opt = app.add_option("--target", target, "Audit target: sim or remote");
  auto* fixtures_opt = app.add_option("--fixtures", fixtures, "Replay gateway fixtures from dir");
  auto* axis_opt = app.add_option("--axis", axis, "Sweep axis: quota, delta or canaries");
  auto* values_opt = app.add_option("--values", values, "Comma-separated sweep values");
  app.add_option("--set", sets, "Override a config leaf, key.path=value");
  app.add_flag("--force", force, "Overwrite output files that differ");

  auto* protect = app.add_subcommand("protect", "Mint canaries and write the protected corpus");
  auto* audit = app.add_subcommand("audit", "Query a suspect system and test for the watermark");
  auto* simulate = app.add_subcommand("simulate", "One simulated audit experiment row");
  auto* sweep = app.add_subcommand("sweep", "Simulated experiment over a parameter axis");
  auto* metrics = app.add_subcommand("metrics", "BLEU and filtering rate of a protected corpus");
  auto* registry = app.add_subcommand("registry", "Registry tools");
  registry->require_subcommand(1);
  auto* inspect = registry->add_subcommand("inspect", "Summarize a registry");
  auto* verify = registry->add_subcommand("verify", "Check registry consistency");
  auto* vocab = app.add_subcommand("vocab", "Vocabulary tools");
  vocab->require_subcommand(1);
  auto* vocab_build = vocab->add_subcommand("build", "Build a vocabulary from the corpus");

  std::vector<std::string> argv_store{"canary"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << json{{"error", ErrorKindName(ErrorKind::kInvalidArgument)}, {"message", e.what()}}.dump()
        << "\n";
    return kExitValidation;
  }

  try {
    json config = DefaultConfig();
    fs::path base_dir = fs::current_path();
    if (!config_path.empty()) {
      const fs::path p(config_path);
      Require(fs::exists(p), ErrorKind::kNotFound, "config file does not exist: " + config_path);
      json file;
      try {
        file = json::parse(ReadTextFile(p));
      } catch (const json::exception& e) {
        Fail(ErrorKind::kValidation, "config " + config_path + " is not valid JSON: " + e.what());
      }
      MergeConfig(config, file);
      base_dir = fs::absolute(p).parent_path();
    }
    const bool on_protect = protect->parsed();
    if (seed_opt->count()) config["seed"] = seed;
    if (quota_opt->count()) {
      config["audit"]["quota"] = quota;
      config["experiment"]["quota"] = quota;
    }
    if (delta_opt->count()) {
      config["watermark"]["delta"] = delta;
      config["experiment"]["world"]["key"]["delta"] = delta;
    }
    if (canaries_opt->count()) {
      if (on_protect) {
        config["protect"]["count"] = canaries;
      } else {
        config["simulate"]["canaries"] = canaries;
      }
    }
    if (qpc_opt->count()) {
      if (on_protect) {
        config["protect"]["queries_per_canary"] = qpc;
      } else {
        config["audit"]["queries_per_canary"] = qpc;
        config["experiment"]["queries_per_canary"] = qpc;
      }
    }
    if (fpr_opt->count()) {
      config["audit"]["fpr"] = fpr;
      config["experiment"]["eta_fpr"] = fpr;
    }
    if (target_opt->count()) config["audit"]["target"] = target;
    if (fixtures_opt->count()) {
      config["paths"]["fixtures"] = fixtures;
      config["gateway"]["mode"] = "replay";
    }
    if (axis_opt->count()) config["experiment"]["axis"] = axis;
    if (values_opt->count()) {
      json list = json::array();
      std::stringstream in(values);
      std::string item;
      while (std::getline(in, item, ',')) {
        try {
          std::size_t used = 0;
          const double v = std::stod(item, &used);
          Require(used == item.size(), ErrorKind::kInvalidArgument, "");
          list.push_back(v);
        } catch (const std::logic_error&) {
          Fail(ErrorKind::kInvalidArgument, "--values item is not a number: '" + item + "'");
        }
      }
      config["experiment"]["values"] = list;
    }
    for (const auto& s : sets) ApplyOverride(config, s);
    Require(Get<int>(config, "threads") >= 1, ErrorKind::kValidation, "threads must be >= 1");
    GetU64(config, "seed");

    Context ctx{config, base_dir, ConfigFingerprint(config), force, out, err, hooks.transport};
    out << json{{"effective_config", config}, {"fingerprint", ctx.fingerprint}}.dump() << "\n";
    if (protect->parsed()) return CmdProtect(ctx);
    if (audit->parsed()) return CmdAudit(ctx);
    if (simulate->parsed()) return CmdSimulate(ctx);
    if (sweep->parsed()) return CmdSweep(ctx);
    if (metrics->parsed()) return CmdMetrics(ctx);
    if (inspect->parsed()) return CmdRegistryInspect(ctx);
    if (verify->parsed()) return CmdRegistryVerify(ctx);
    if (vocab_build->parsed()) return CmdVocabBuild(ctx);
    Fail(ErrorKind::kInvalidArgument, "no command given");
  } catch (const Error& e) {
    PrintError(err, e);
    return ExitCodeFor(e.kind());
  } catch (const fs::filesystem_error& e) {
    PrintError(err, Error(ErrorKind::kIo, e.what()));
    return kExitIo;
  } catch (const std::exception& e) {
    PrintError(err, Error(ErrorKind::kInternal, e.what()));
    return kExitInternal;
  }
}

}  // namespace canary::cli
