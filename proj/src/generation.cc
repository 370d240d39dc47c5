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

#include "canary/generation.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "canary/error.h"

namespace canary {
namespace {

std::vector<std::string_view> SplitOn(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = s.find(sep, start);
    parts.push_back(s.substr(start, end == std::string_view::npos
                                        ? std::string_view::npos
                                        : end - start));
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return parts;
}

std::uint64_t ParseUnsigned(std::string_view text, std::size_t line) {
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    Fail(ErrorKind::kValidation, "n-gram counts line " + std::to_string(line) +
                                     ": bad integer '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

void UniformLogitSource::Logits(std::span<const TokenId>,
                                std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
}

InterpolatedLogitSource::InterpolatedLogitSource(
    std::vector<std::shared_ptr<const LogitSource>> parts,
    std::vector<double> weights, std::vector<TokenId> banned)
    : parts_(std::move(parts)),
      weights_(std::move(weights)),
      banned_(std::move(banned)) {
  Require(!parts_.empty() && parts_.size() == weights_.size(),
          ErrorKind::kInvalidArgument,
          "interpolation needs one weight per component");
  double total = 0.0;
  for (std::size_t k = 0; k < parts_.size(); ++k) {
    Require(parts_[k] != nullptr, ErrorKind::kInvalidArgument,
            "null interpolation component");
    Require(weights_[k] > 0.0 && std::isfinite(weights_[k]),
            ErrorKind::kInvalidArgument, "interpolation weights must be positive");
    total += weights_[k];
  }
  for (double& w : weights_) w /= total;
  vocab_size_ = parts_[0]->vocab_size();
  for (const auto& part : parts_) {
    Require(part->vocab_size() == vocab_size_, ErrorKind::kInvalidArgument,
            "interpolation components disagree on vocabulary size");
  }
  for (TokenId id : banned_) {
    Require(id < vocab_size_, ErrorKind::kInvalidArgument,
            "banned token outside vocabulary");
  }
}

void InterpolatedLogitSource::Logits(std::span<const TokenId> context,
                                     std::span<double> out) const {
  Require(out.size() == vocab_size_, ErrorKind::kInvalidArgument,
          "logit buffer size does not match the vocabulary");
  std::vector<double> mix(vocab_size_, 0.0);
  std::vector<double> part(vocab_size_);
  for (std::size_t k = 0; k < parts_.size(); ++k) {
    parts_[k]->Logits(context, part);
    const double max_logit = *std::max_element(part.begin(), part.end());
    if (!std::isfinite(max_logit)) continue;
    double norm = 0.0;
    for (double& l : part) {
      l = std::exp(l - max_logit);
      norm += l;
    }
    const double scale = weights_[k] / norm;
    for (std::size_t i = 0; i < vocab_size_; ++i) mix[i] += part[i] * scale;
  }
  for (TokenId id : banned_) mix[id] = 0.0;
  for (std::size_t i = 0; i < vocab_size_; ++i) {
    out[i] = mix[i] > 0.0 ? std::log(mix[i])
                          : -std::numeric_limits<double>::infinity();
  }
}

std::uint64_t NGramModel::Row::CountOf(TokenId token) const {
  auto it = std::lower_bound(tokens.begin(), tokens.end(), token);
  if (it == tokens.end() || *it != token) return 0;
  const std::size_t i = it - tokens.begin();
  return cumulative[i] - (i == 0 ? 0 : cumulative[i - 1]);
}

std::string NGramModel::Key(std::span<const TokenId> ids) {
  std::string key(ids.size() * sizeof(TokenId), '\0');
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::memcpy(key.data() + i * sizeof(TokenId), &ids[i], sizeof(TokenId));
  }
  return key;
}

NGramModel::NGramModel(std::size_t order, double alpha, std::size_t vocab_size,
                       ContextCounts top_counts)
    : order_(order),
      alpha_(alpha),
      vocab_size_(vocab_size),
      top_counts_(std::move(top_counts)) {
  Require(order_ >= 1, ErrorKind::kInvalidArgument, "n-gram order must be >= 1");
  Require(alpha_ >= 0.0 && std::isfinite(alpha_), ErrorKind::kInvalidArgument,
          "n-gram alpha must be a finite nonnegative number");
  Require(vocab_size_ >= 2, ErrorKind::kInvalidArgument,
          "n-gram vocabulary must have at least 2 tokens");
  Require(!top_counts_.empty(), ErrorKind::kInvalidArgument,
          "n-gram model has no counts");

  std::vector<std::unordered_map<std::string, std::map<TokenId, std::uint64_t>>>
      staged(order_);
  for (const auto& [context, counts] : top_counts_) {
    Require(context.size() == order_ - 1, ErrorKind::kValidation,
            "n-gram context has the wrong length");
    for (TokenId id : context) {
      Require(id <= vocab_size_, ErrorKind::kValidation,
              "n-gram context id out of range");
    }
    for (std::size_t k = 0; k < order_; ++k) {
      const std::span<const TokenId> suffix(context.data() + context.size() - k, k);
      auto& row = staged[k][Key(suffix)];
      for (const auto& [token, count] : counts) {
        Require(token < vocab_size_, ErrorKind::kValidation,
                "n-gram token id out of range");
        row[token] += count;
      }
    }
  }
  rows_.resize(order_);
  for (std::size_t k = 0; k < order_; ++k) {
    for (auto& [key, counts] : staged[k]) {
      Row row;
      row.tokens.reserve(counts.size());
      row.cumulative.reserve(counts.size());
      for (const auto& [token, count] : counts) {
        if (count == 0) continue;
        row.total += count;
        row.tokens.push_back(token);
        row.cumulative.push_back(row.total);
      }
      if (row.total > 0) rows_[k].emplace(key, std::move(row));
    }
  }
  Require(rows_[0].count(std::string()) == 1, ErrorKind::kInvalidArgument,
          "n-gram model has no counts");
}

const NGramModel::Row& NGramModel::RowFor(
    std::span<const TokenId> context) const {
  std::vector<TokenId> history(order_ - 1, begin_marker());
  const std::size_t take = std::min(context.size(), order_ - 1);
  std::copy(context.end() - take, context.end(), history.end() - take);
  for (std::size_t k = order_ - 1;; --k) {
    const std::span<const TokenId> suffix(history.data() + history.size() - k, k);
    auto it = rows_[k].find(Key(suffix));
    if (it != rows_[k].end()) return it->second;
    if (k == 0) break;
  }
  Fail(ErrorKind::kInternal, "n-gram model lost its empty-context row");
}

void NGramModel::Logits(std::span<const TokenId> context,
                        std::span<double> out) const {
  Require(out.size() == vocab_size_, ErrorKind::kInvalidArgument,
          "logit buffer size does not match the vocabulary");
  const Row& row = RowFor(context);
  const double denom =
      static_cast<double>(row.total) + alpha_ * static_cast<double>(vocab_size_);
  const double floor_logit = alpha_ > 0.0
                                 ? std::log(alpha_ / denom)
                                 : -std::numeric_limits<double>::infinity();
  std::fill(out.begin(), out.end(), floor_logit);
  std::uint64_t previous = 0;
  for (std::size_t i = 0; i < row.tokens.size(); ++i) {
    const double count = static_cast<double>(row.cumulative[i] - previous);
    previous = row.cumulative[i];
    out[row.tokens[i]] = std::log((count + alpha_) / denom);
  }
}

double NGramModel::Probability(std::span<const TokenId> context,
                               TokenId token) const {
  const Row& row = RowFor(context);
  const double denom =
      static_cast<double>(row.total) + alpha_ * static_cast<double>(vocab_size_);
  return (static_cast<double>(row.CountOf(token)) + alpha_) / denom;
}

double NGramModel::LogProbability(std::span<const TokenId> context,
                                  TokenId token) const {
  return std::log(Probability(context, token));
}

TokenId NGramModel::Sample(std::span<const TokenId> context, Rng& rng) const {
  const Row& row = RowFor(context);
  const double total = static_cast<double>(row.total);
  const double mass = total + alpha_ * static_cast<double>(vocab_size_);
  const double u = rng.NextDouble() * mass;
  if (u < total) {
    auto it = std::upper_bound(row.cumulative.begin(), row.cumulative.end(),
                               static_cast<std::uint64_t>(u));
    if (it == row.cumulative.end()) --it;
    return row.tokens[it - row.cumulative.begin()];
  }
  return static_cast<TokenId>(rng.NextBelow(vocab_size_));
}

NGramModel TrainNGram(std::span<const TokenSequence> corpus,
                      std::size_t vocab_size, std::size_t order, double alpha) {
  Require(order >= 1, ErrorKind::kInvalidArgument, "n-gram order must be >= 1");
  Require(!corpus.empty(), ErrorKind::kInvalidArgument,
          "cannot train an n-gram model on an empty corpus");
  const auto marker = static_cast<TokenId>(vocab_size);
  NGramModel::ContextCounts counts;
  std::size_t seen = 0;
  for (const auto& seq : corpus) {
    std::vector<TokenId> history(order - 1, marker);
    for (TokenId id : seq.ids) {
      Require(id < vocab_size, ErrorKind::kInvalidArgument,
              "training token id out of range");
      ++counts[history][id];
      ++seen;
      if (order > 1) {
        history.erase(history.begin());
        history.push_back(id);
      }
    }
  }
  Require(seen > 0, ErrorKind::kInvalidArgument,
          "cannot train an n-gram model on a corpus without tokens");
  return NGramModel(order, alpha, vocab_size, std::move(counts));
}

std::string SerializeNGram(const NGramModel& model) {
  std::ostringstream out;
  char alpha[64];
  std::snprintf(alpha, sizeof(alpha), "%.17g", model.alpha());
  out << "# canary-ngram-counts v1\n"
      << "order\t" << model.order() << "\n"
      << "alpha\t" << alpha << "\n"
      << "vocab_size\t" << model.vocab_size() << "\n";
  for (const auto& [context, counts] : model.top_counts()) {
    std::string ctx;
    if (context.empty()) ctx = "-";
    for (std::size_t i = 0; i < context.size(); ++i) {
      if (i) ctx.push_back(' ');
      ctx += context[i] == model.begin_marker() ? std::string("<s>")
                                                : std::to_string(context[i]);
    }
    for (const auto& [token, count] : counts) {
      out << ctx << '\t' << token << '\t' << count << '\n';
    }
  }
  return out.str();
}

NGramModel ParseNGram(std::string_view contents) {
  std::size_t order = 0;
  double alpha = -1.0;
  std::size_t vocab_size = 0;
  NGramModel::ContextCounts counts;
  std::size_t line_number = 0;
  bool saw_magic = false;
  for (std::string_view line : SplitOn(contents, '\n')) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line_number == 1) {
      Require(line == "# canary-ngram-counts v1", ErrorKind::kValidation,
              "not an n-gram counts file (bad header)");
      saw_magic = true;
      continue;
    }
    const auto fields = SplitOn(line, '\t');
    if (fields.size() == 2) {
      if (fields[0] == "order") {
        order = ParseUnsigned(fields[1], line_number);
      } else if (fields[0] == "alpha") {
        alpha = std::strtod(std::string(fields[1]).c_str(), nullptr);
      } else if (fields[0] == "vocab_size") {
        vocab_size = ParseUnsigned(fields[1], line_number);
      } else {
        Fail(ErrorKind::kValidation, "n-gram counts line " +
                                         std::to_string(line_number) +
                                         ": unknown header field");
      }
      continue;
    }
    Require(fields.size() == 3 && order >= 1 && vocab_size >= 2,
            ErrorKind::kValidation,
            "n-gram counts line " + std::to_string(line_number) +
                ": malformed record or missing header");
    std::vector<TokenId> context;
    if (fields[0] != "-") {
      for (std::string_view id : SplitOn(fields[0], ' ')) {
        context.push_back(id == "<s>" ? static_cast<TokenId>(vocab_size)
                                      : static_cast<TokenId>(
                                            ParseUnsigned(id, line_number)));
      }
    }
    Require(context.size() == order - 1, ErrorKind::kValidation,
            "n-gram counts line " + std::to_string(line_number) +
                ": context length does not match order");
    const auto token = static_cast<TokenId>(ParseUnsigned(fields[1], line_number));
    counts[context][token] += ParseUnsigned(fields[2], line_number);
  }
  Require(saw_magic, ErrorKind::kValidation, "n-gram counts file is empty");
  return NGramModel(order, alpha, vocab_size, std::move(counts));
}

void SaveNGram(const NGramModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  out << SerializeNGram(model);
  Require(out.good(), ErrorKind::kIo, "write failed: " + path.string());
}

NGramModel LoadNGram(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  Require(in.good(), ErrorKind::kNotFound, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return ParseNGram(buffer.str());
}

void SamplerConfig::Validate() const {
  Require(temperature > 0.0 && std::isfinite(temperature),
          ErrorKind::kInvalidArgument, "sampler temperature must be positive");
  Require(max_tokens >= 1, ErrorKind::kInvalidArgument,
          "sampler max_tokens must be >= 1");
}

TokenId SampleSoftmax(std::span<const double> logits, double temperature,
                      Rng& rng, std::vector<double>& scratch) {
  scratch.resize(logits.size());
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  Require(std::isfinite(max_logit), ErrorKind::kInvalidArgument,
          "logit vector has no finite maximum");
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    total += std::exp((logits[k] - max_logit) / temperature);
    scratch[k] = total;
  }
  const double u = rng.NextDouble() * total;
  auto it = std::upper_bound(scratch.begin(), scratch.end(), u);
  if (it == scratch.end()) --it;
  return static_cast<TokenId>(it - scratch.begin());
}

namespace {

TokenSequence RunSampler(const LogitSource& source, const GreenList* green,
                         double delta, const SamplerConfig& cfg,
                         const TokenSequence& prompt) {
  cfg.Validate();
  const std::size_t vocab = source.vocab_size();
  std::vector<TokenId> context = prompt.ids;
  context.reserve(prompt.size() + cfg.max_tokens);
  std::vector<double> logits(vocab);
  std::vector<double> scratch;
  Rng rng(cfg.rng_seed);
  TokenSequence out;
  out.ids.reserve(cfg.max_tokens);
  for (std::size_t step = 0; step < cfg.max_tokens; ++step) {
    source.Logits(context, logits);
    if (green) BiasLogitsInPlace(logits, *green, delta);
    const TokenId next = SampleSoftmax(logits, cfg.temperature, rng, scratch);
    out.ids.push_back(next);
    context.push_back(next);
    if (cfg.end_token && next == *cfg.end_token) break;
  }
  return out;
}

}  // namespace

TokenSequence GenerateWatermarked(const LogitSource& source,
                                  const WatermarkKey& key,
                                  const GreenList& green,
                                  const SamplerConfig& cfg,
                                  const TokenSequence& prompt) {
  key.Validate();
  Require(source.vocab_size() == green.vocab_size(),
          ErrorKind::kInvalidArgument,
          "logit source vocabulary (" + std::to_string(source.vocab_size()) +
              ") does not match the green list (" +
              std::to_string(green.vocab_size()) + ")");
  return RunSampler(source, &green, key.delta, cfg, prompt);
}

TokenSequence Generate(const LogitSource& source, const SamplerConfig& cfg,
                       const TokenSequence& prompt) {
  return RunSampler(source, nullptr, 0.0, cfg, prompt);
}

double GreenFraction(const TokenSequence& seq, const GreenList& green) {
  Require(!seq.empty(), ErrorKind::kDetectionPrecondition,
          "green fraction is undefined for an empty sequence");
  const GreenCounts counts = CountGreen(seq.view(), green);
  return static_cast<double>(counts.green) / static_cast<double>(counts.tokens);
}

}  // namespace canary
