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

#ifndef CANARY_WATERMARK_H_
#define CANARY_WATERMARK_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "canary/tokenization.h"

namespace canary {

// Secret that defines the green list and the detection statistic.
struct WatermarkKey {
  std::uint64_t seed = 0;
  double gamma = 0.5;  // green fraction, in (0, 1)
  double delta = 2.0;  // logit bias, >= 0

  // Throws kInvalidArgument unless 0 < gamma < 1 and delta >= 0.
  void Validate() const;

  // sha256 of "seed=<decimal>;gamma=<%.17g>;delta=<%.17g>", hex.
  std::string Fingerprint() const;

  friend bool operator==(const WatermarkKey&, const WatermarkKey&) = default;
};

// Fixed partition of the vocabulary into green and red ids.
class GreenList {
 public:
  GreenList() = default;
  GreenList(std::vector<std::uint8_t> membership, std::size_t green_count)
      : membership_(std::move(membership)), green_count_(green_count) {}

  bool IsGreen(TokenId id) const {
    return id < membership_.size() && membership_[id] != 0;
  }
  std::size_t vocab_size() const { return membership_.size(); }
  std::size_t green_count() const { return green_count_; }
  std::span<const std::uint8_t> membership() const { return membership_; }

  friend bool operator==(const GreenList&, const GreenList&) = default;

 private:
  std::vector<std::uint8_t> membership_;
  std::size_t green_count_ = 0;
};

// floor(gamma * vocab_size).
std::size_t GreenCountFor(double gamma, std::size_t vocab_size);

// Seeded Fisher-Yates over 0..|V|-1 (Rng(key.seed), i from |V|-1 down to 1,
// j = NextBelow(i + 1)); the first floor(gamma*|V|) permuted ids are green.
// Throws kInvalidArgument for |V| < 2 or a degenerate partition.
GreenList DeriveGreenList(const WatermarkKey& key, std::size_t vocab_size);

// Adds `delta` to every green logit; red logits are copied unchanged.
std::vector<double> BiasLogits(std::span<const double> logits,
                               const GreenList& green, double delta);
void BiasLogitsInPlace(std::span<double> logits, const GreenList& green,
                       double delta);

enum class CountMode {
  kAllOccurrences,  // every occurrence counts (default)
  kUniqueTokens,    // each distinct id counts once
};

struct GreenCounts {
  std::size_t tokens = 0;
  std::size_t green = 0;
};

GreenCounts CountGreen(std::span<const TokenId> ids, const GreenList& green,
                       CountMode mode = CountMode::kAllOccurrences);

// (green - gamma*T) / sqrt(gamma*(1-gamma)*T). Throws
// kDetectionPrecondition when T == 0.
double ZFromCounts(std::size_t green, std::size_t tokens, double gamma);

struct ZResult {
  double z = 0.0;
  std::size_t green_count = 0;
};

ZResult ZStatistic(const TokenSequence& seq, const GreenList& green,
                   double gamma, CountMode mode = CountMode::kAllOccurrences);

// Standard normal CDF and its complement.
double NormalCdf(double x);
double NormalSf(double x);

// Phi^-1(p) for p in (0, 1). Absolute error below 1e-12 over (1e-300, 1).
double NormalQuantile(double p);

// eta = Phi^-1(1 - fpr). Throws kInvalidArgument unless 0 < fpr < 1.
double ThresholdForFpr(double fpr);

struct DetectionReport {
  std::size_t token_count = 0;
  std::size_t green_count = 0;
  double z = 0.0;
  double eta = 0.0;
  bool watermarked = false;
  double p_value = 1.0;  // 1 - Phi(z)
};

DetectionReport ReportFromCounts(GreenCounts counts, double gamma, double eta);

DetectionReport Detect(const TokenSequence& seq, const GreenList& green,
                       double gamma, double eta,
                       CountMode mode = CountMode::kAllOccurrences);

// Derives the green list from the key on every call.
DetectionReport Detect(const TokenSequence& seq, const WatermarkKey& key,
                       std::size_t vocab_size, double eta,
                       CountMode mode = CountMode::kAllOccurrences);

}  // namespace canary

#endif  // CANARY_WATERMARK_H_
