// Copyright 2026 The wmlab Authors.
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

#ifndef WMLAB_WATERMARK_HPP_
#define WMLAB_WATERMARK_HPP_

#include <span>
#include <string>
#include <vector>

#include "wmlab/common.hpp"
#include "wmlab/ngram.hpp"
#include "wmlab/vocab.hpp"

namespace wmlab {

enum class Scheme { kGreenList, kTournament };

const char* scheme_name(Scheme s);

struct WatermarkConfig {
  Scheme scheme = Scheme::kGreenList;
  std::uint64_t key = 0x6a09e667f3bcc908ull;
  double gamma = 0.5;        // green fraction of the vocabulary
  double delta = 3.0;        // logit boost on green tokens
  std::size_t context_width = 1;      // tokens hashed to seed each decision
  std::size_t tournament_depth = 4;   // knockout rounds; 2^depth candidates

  void validate() const;  // Error(Validation) naming the offending field
  /// Key fingerprint safe to put in reports: a salted hash, never the key.
  std::uint64_t key_fingerprint() const;
};

/// One pseudorandom split of the vocabulary, derived from (key, context
/// window). The green set always holds round(gamma * |V|) ids.
struct GreenPartition {
  std::vector<TokenId> green;  // sorted ascending
  std::uint64_t seed = 0;      // hash the permutation was drawn from

  bool contains(TokenId id) const;
};

/// Derives the partition for the last `width` tokens of `context`, padding
/// with the bos id when the context is shorter. Pure in all arguments: equal
/// inputs give equal partitions on any platform.
GreenPartition green_list(std::uint64_t key, std::span<const TokenId> context,
                          std::size_t width, double gamma,
                          std::size_t vocab_size);

/// Adds delta to every green logit, leaving the rest untouched.
LogitVector kgw_transform(LogitVector logits, const GreenPartition& part,
                          double delta);

// ---------------------------------------------------------------------------
// Detection statistics.
// ---------------------------------------------------------------------------

/// Normal approximation to the one-sided binomial test: how many standard
/// deviations the observed hit count sits above the unwatermarked
/// expectation rate * scored.
double z_score(std::uint64_t hits, std::uint64_t scored, double rate);

/// Upper-tail normal p-value for a z statistic.
double p_value(double z);

/// Exact upper tail P[X >= hits] for X ~ Binomial(trials, rate); preferred
/// over the normal approximation when only a handful of tokens is scored.
double binomial_upper_p(std::uint64_t hits, std::uint64_t trials, double rate);

struct DetectionReport {
  Scheme scheme = Scheme::kGreenList;
  std::uint64_t scored = 0;   // scoreable positions in the text
  std::uint64_t hits = 0;     // green tokens, or winning tournament bits
  double rate = 0.5;          // null expectation per trial
  double z = 0.0;
  double p = 1.0;
  bool watermarked = false;   // verdict at the fixed z >= 4 threshold
};

/// Scores a token sequence against the green-list scheme. The first
/// context_width tokens only seed contexts and are never scored;
/// Error(NoScorableTokens) when nothing remains. With exact_small and fewer
/// than 30 scored tokens the p-value comes from the exact binomial tail.
DetectionReport detect_green_list(std::span<const TokenId> tokens,
                                  const WatermarkConfig& cfg,
                                  std::size_t vocab_size,
                                  bool exact_small = false);

/// Pseudorandom per-(layer, token) bit driving tournament comparisons and
/// their detection.
bool tournament_bit(std::uint64_t key, std::span<const TokenId> window,
                    std::size_t layer, TokenId token);

/// Knockout sampler: draws 2^depth candidates from softmax(logits /
/// temperature), then resolves depth elimination rounds by comparing
/// tournament bits (ties keep the earlier candidate).
TokenId tournament_sample(const LogitVector& logits,
                          const WatermarkConfig& cfg,
                          std::span<const TokenId> context, double temperature,
                          SplitMix64& rng);

/// Scores a sequence against the tournament scheme by counting favourable
/// bits across all layers; under the null each bit is a fair coin.
DetectionReport detect_tournament(std::span<const TokenId> tokens,
                                  const WatermarkConfig& cfg);

/// Scheme dispatch used by every caller that should not care which scheme is
/// active.
DetectionReport detect(std::span<const TokenId> tokens,
                       const WatermarkConfig& cfg, std::size_t vocab_size,
                       bool exact_small = false);

/// Generation hooks implementing cfg over a base model's logits: a logit
/// transform for the green-list scheme, a replacement sampler for the
/// tournament scheme.
GenerationHooks watermark_hooks(const WatermarkConfig& cfg,
                                std::size_t vocab_size, double temperature);

}  // namespace wmlab

#endif  // WMLAB_WATERMARK_HPP_
