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

#include "canary/watermark.h"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_set>

#include "canary/error.h"
#include "canary/hash.h"
#include "canary/rng.h"

namespace canary {

void WatermarkKey::Validate() const {
  Require(gamma > 0.0 && gamma < 1.0, ErrorKind::kInvalidArgument,
          "watermark gamma must lie in (0, 1)");
  Require(delta >= 0.0 && std::isfinite(delta), ErrorKind::kInvalidArgument,
          "watermark delta must be a finite nonnegative number");
}

std::string WatermarkKey::Fingerprint() const {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "seed=%llu;gamma=%.17g;delta=%.17g",
                static_cast<unsigned long long>(seed), gamma, delta);
  return Sha256Hex(buf);
}

std::size_t GreenCountFor(double gamma, std::size_t vocab_size) {
  return static_cast<std::size_t>(
      std::floor(gamma * static_cast<double>(vocab_size)));
}

GreenList DeriveGreenList(const WatermarkKey& key, std::size_t vocab_size) {
  key.Validate();
  Require(vocab_size >= 2, ErrorKind::kInvalidArgument,
          "green list needs a vocabulary of at least 2 tokens");
  const std::size_t green_count = GreenCountFor(key.gamma, vocab_size);
  Require(green_count > 0 && green_count < vocab_size,
          ErrorKind::kInvalidArgument,
          "degenerate green list: floor(gamma*|V|) = " +
              std::to_string(green_count) + " for |V| = " +
              std::to_string(vocab_size));

  std::vector<TokenId> perm(vocab_size);
  std::iota(perm.begin(), perm.end(), TokenId{0});
  Rng rng(key.seed);
  for (std::size_t i = vocab_size - 1; i > 0; --i) {
    const std::size_t j = rng.NextBelow(i + 1);
    std::swap(perm[i], perm[j]);
  }
  std::vector<std::uint8_t> membership(vocab_size, 0);
  for (std::size_t i = 0; i < green_count; ++i) membership[perm[i]] = 1;
  return GreenList(std::move(membership), green_count);
}

void BiasLogitsInPlace(std::span<double> logits, const GreenList& green,
                       double delta) {
  Require(logits.size() == green.vocab_size(), ErrorKind::kInvalidArgument,
          "logit vector has " + std::to_string(logits.size()) +
              " entries but the green list covers " +
              std::to_string(green.vocab_size()));
  const auto membership = green.membership();
  for (std::size_t k = 0; k < logits.size(); ++k) {
    if (membership[k]) logits[k] += delta;
  }
}

std::vector<double> BiasLogits(std::span<const double> logits,
                               const GreenList& green, double delta) {
  std::vector<double> out(logits.begin(), logits.end());
  BiasLogitsInPlace(out, green, delta);
  return out;
}

GreenCounts CountGreen(std::span<const TokenId> ids, const GreenList& green,
                       CountMode mode) {
  GreenCounts counts;
  if (mode == CountMode::kAllOccurrences) {
    counts.tokens = ids.size();
    for (TokenId id : ids) counts.green += green.IsGreen(id) ? 1 : 0;
    return counts;
  }
  std::unordered_set<TokenId> seen;
  for (TokenId id : ids) {
    if (!seen.insert(id).second) continue;
    ++counts.tokens;
    counts.green += green.IsGreen(id) ? 1 : 0;
  }
  return counts;
}

double ZFromCounts(std::size_t green, std::size_t tokens, double gamma) {
  Require(tokens >= 1, ErrorKind::kDetectionPrecondition,
          "z statistic is undefined for an empty token sequence");
  Require(green <= tokens, ErrorKind::kInvalidArgument,
          "green count exceeds token count");
  const double t = static_cast<double>(tokens);
  return (static_cast<double>(green) - gamma * t) /
         std::sqrt(gamma * (1.0 - gamma) * t);
}

ZResult ZStatistic(const TokenSequence& seq, const GreenList& green,
                   double gamma, CountMode mode) {
  const GreenCounts counts = CountGreen(seq.view(), green, mode);
  return {ZFromCounts(counts.green, counts.tokens, gamma), counts.green};
}

double NormalCdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double NormalSf(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double NormalQuantile(double p) {
  Require(p > 0.0 && p < 1.0, ErrorKind::kInvalidArgument,
          "normal quantile needs p in (0, 1)");
  // Acklam's rational approximation (relative error ~1e-9) followed by one
  // Halley step against erfc.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double kLow = 0.02425;

  double x;
  if (p < kLow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - kLow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Refine in whichever tail keeps the residual well conditioned.
  const double e = x < 0.0 ? NormalCdf(x) - p : (1.0 - p) - NormalSf(x);
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  x = x - u / (1.0 + 0.5 * x * u);
  return x;
}

double ThresholdForFpr(double fpr) {
  Require(fpr > 0.0 && fpr < 1.0, ErrorKind::kInvalidArgument,
          "false-positive rate must lie in (0, 1)");
  return -NormalQuantile(fpr);
}

DetectionReport ReportFromCounts(GreenCounts counts, double gamma, double eta) {
  DetectionReport report;
  report.token_count = counts.tokens;
  report.green_count = counts.green;
  report.z = ZFromCounts(counts.green, counts.tokens, gamma);
  report.eta = eta;
  report.watermarked = report.z > eta;
  report.p_value = NormalSf(report.z);
  return report;
}

DetectionReport Detect(const TokenSequence& seq, const GreenList& green,
                       double gamma, double eta, CountMode mode) {
  Require(!seq.empty(), ErrorKind::kDetectionPrecondition,
          "cannot run detection on an empty token sequence");
  return ReportFromCounts(CountGreen(seq.view(), green, mode), gamma, eta);
}

DetectionReport Detect(const TokenSequence& seq, const WatermarkKey& key,
                       std::size_t vocab_size, double eta, CountMode mode) {
  Require(!seq.empty(), ErrorKind::kDetectionPrecondition,
          "cannot run detection on an empty token sequence");
  const GreenList green = DeriveGreenList(key, vocab_size);
  for (TokenId id : seq.ids) {
    Require(id < vocab_size, ErrorKind::kInvalidArgument,
            "token id " + std::to_string(id) + " outside vocabulary");
  }
  return Detect(seq, green, key.gamma, eta, mode);
}

}  // namespace canary
