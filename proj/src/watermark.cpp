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

#include "wmlab/watermark.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <numeric>

namespace wmlab {

namespace {

// Domain separators so the two schemes and the fingerprint never share hash
// streams even under the same key.
constexpr std::uint64_t kTagGreen = 0x677265656e6c7374ull;
constexpr std::uint64_t kTagTournament = 0x746f75726e626974ull;
constexpr std::uint64_t kTagFingerprint = 0x6b657973616c7431ull;

std::uint64_t window_hash(std::uint64_t key, std::uint64_t tag,
                          std::span<const TokenId> context,
                          std::size_t width) {
  HashStream h(key);
  h.fold(tag);
  // Left-pad short contexts with the bos id so the stream always folds
  // exactly `width` tokens.
  for (std::size_t i = width; i > context.size(); --i)
    h.fold(Vocabulary::kBosId);
  std::size_t take = std::min(width, context.size());
  for (std::size_t i = context.size() - take; i < context.size(); ++i)
    h.fold(context[i]);
  return h.digest();
}

}  // namespace

const char* scheme_name(Scheme s) {
  return s == Scheme::kGreenList ? "greenlist" : "tournament";
}

void WatermarkConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0))
    fail(ErrorCode::Validation, "watermark.gamma must lie strictly in (0, 1)");
  if (!std::isfinite(delta) || delta < 0.0)
    fail(ErrorCode::Validation, "watermark.delta must be finite and >= 0");
  if (context_width < 1)
    fail(ErrorCode::Validation, "watermark.context_width must be >= 1");
  if (scheme == Scheme::kTournament &&
      (tournament_depth < 1 || tournament_depth > 16))
    fail(ErrorCode::Validation,
         "watermark.tournament_depth must lie in [1, 16]");
}

std::uint64_t WatermarkConfig::key_fingerprint() const {
  return HashStream(kTagFingerprint).fold(key).digest();
}

bool GreenPartition::contains(TokenId id) const {
  return std::binary_search(green.begin(), green.end(), id);
}

GreenPartition green_list(std::uint64_t key, std::span<const TokenId> context,
                          std::size_t width, double gamma,
                          std::size_t vocab_size) {
  if (vocab_size == 0)
    fail(ErrorCode::Validation, "green_list needs a non-empty vocabulary");
  GreenPartition part;
  part.seed = window_hash(key, kTagGreen, context, width);

  // Fisher-Yates permutation of the id range, then the green set is its
  // prefix. This pins the green cardinality to round(gamma * |V|) exactly,
  // which per-token threshold hashing would not.
  std::vector<TokenId> ids(vocab_size);
  std::iota(ids.begin(), ids.end(), TokenId(0));
  SplitMix64 rng(part.seed);
  for (std::size_t i = vocab_size - 1; i > 0; --i) {
    std::size_t j = std::size_t(rng.next_below(i + 1));
    std::swap(ids[i], ids[j]);
  }
  auto n_green = std::size_t(std::llround(gamma * double(vocab_size)));
  n_green = std::min(n_green, vocab_size);
  part.green.assign(ids.begin(), ids.begin() + n_green);
  std::sort(part.green.begin(), part.green.end());
  return part;
}

LogitVector kgw_transform(LogitVector logits, const GreenPartition& part,
                          double delta) {
  for (TokenId id : part.green) {
    if (id >= logits.size())
      fail(ErrorCode::VocabMismatch,
           "partition refers to ids beyond the logit vector");
    logits[id] += delta;
  }
  return logits;
}

double z_score(std::uint64_t hits, std::uint64_t scored, double rate) {
  if (scored == 0)
    fail(ErrorCode::NoScorableTokens, "z-score over zero scored tokens");
  if (!(rate > 0.0 && rate < 1.0))
    fail(ErrorCode::Validation, "null rate must lie strictly in (0, 1)");
  const double t = double(scored);
  return (double(hits) - rate * t) / std::sqrt(t * rate * (1.0 - rate));
}

double p_value(double z) {
  double p = 0.5 * std::erfc(z / std::sqrt(2.0));
  // erfc underflows to 0 around z = 38; detectors downstream take logs, so
  // pin the result to the smallest normal double instead.
  if (p < DBL_MIN) p = DBL_MIN;
  if (p > 1.0) p = 1.0;
  return p;
}

double binomial_upper_p(std::uint64_t hits, std::uint64_t trials,
                        double rate) {
  if (trials == 0)
    fail(ErrorCode::NoScorableTokens, "binomial tail over zero trials");
  if (!(rate > 0.0 && rate < 1.0))
    fail(ErrorCode::Validation, "null rate must lie strictly in (0, 1)");
  if (hits == 0) return 1.0;
  if (hits > trials) return 0.0;
  // Sum the tail in log space; trial counts here are small enough that the
  // direct sum is both fast and accurate.
  long double total = 0.0L;
  for (std::uint64_t i = hits; i <= trials; ++i) {
    long double lg = std::lgamma((long double)(trials + 1)) -
                     std::lgamma((long double)(i + 1)) -
                     std::lgamma((long double)(trials - i + 1)) +
                     (long double)(i)*std::log((long double)rate) +
                     (long double)(trials - i) *
                         std::log(1.0L - (long double)rate);
    total += std::exp(lg);
  }
  double p = double(total);
  if (p > 1.0) p = 1.0;
  if (p < DBL_MIN) p = DBL_MIN;
  return p;
}

DetectionReport detect_green_list(std::span<const TokenId> tokens,
                                  const WatermarkConfig& cfg,
                                  std::size_t vocab_size, bool exact_small) {
  cfg.validate();
  const std::size_t k = cfg.context_width;
  if (tokens.size() <= k)
    fail(ErrorCode::NoScorableTokens,
         "text too short to score: need more than " + std::to_string(k) +
             " tokens");
  DetectionReport r;
  r.scheme = Scheme::kGreenList;
  r.rate = cfg.gamma;
  for (std::size_t t = k; t < tokens.size(); ++t) {
    GreenPartition part =
        green_list(cfg.key, tokens.first(t), k, cfg.gamma, vocab_size);
    ++r.scored;
    if (part.contains(tokens[t])) ++r.hits;
  }
  r.z = z_score(r.hits, r.scored, r.rate);
  r.p = (exact_small && r.scored < 30)
            ? binomial_upper_p(r.hits, r.scored, r.rate)
            : p_value(r.z);
  r.watermarked = r.z >= 4.0;
  return r;
}

bool tournament_bit(std::uint64_t key, std::span<const TokenId> window,
                    std::size_t layer, TokenId token) {
  HashStream h(key);
  h.fold(kTagTournament);
  for (TokenId t : window) h.fold(t);
  h.fold(layer);
  h.fold(token);
  return (h.digest() & 1) != 0;
}

TokenId tournament_sample(const LogitVector& logits,
                          const WatermarkConfig& cfg,
                          std::span<const TokenId> context, double temperature,
                          SplitMix64& rng) {
  double sum = 0.0;
  std::vector<double> w = softmax_weights(logits, temperature, &sum);
  std::vector<double> cdf(w.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    cdf[i] = acc;
  }

  const std::size_t k = cfg.context_width;
  TokenSeq window(k, Vocabulary::kBosId);
  std::size_t take = std::min(k, context.size());
  std::copy(context.end() - std::ptrdiff_t(take), context.end(),
            window.end() - std::ptrdiff_t(take));

  std::vector<TokenId> round(std::size_t(1) << cfg.tournament_depth);
  for (auto& cand : round) {
    const double target = rng.next_double() * sum;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    if (it == cdf.end()) --it;
    cand = TokenId(it - cdf.begin());
  }
  for (std::size_t layer = 1; layer <= cfg.tournament_depth; ++layer) {
    std::vector<TokenId> next;
    next.reserve(round.size() / 2);
    for (std::size_t i = 0; i + 1 < round.size(); i += 2) {
      bool a = tournament_bit(cfg.key, window, layer, round[i]);
      bool b = tournament_bit(cfg.key, window, layer, round[i + 1]);
      // On a tie the earlier candidate survives.
      next.push_back(b && !a ? round[i + 1] : round[i]);
    }
    round = std::move(next);
  }
  return round.front();
}

DetectionReport detect_tournament(std::span<const TokenId> tokens,
                                  const WatermarkConfig& cfg) {
  cfg.validate();
  const std::size_t k = cfg.context_width;
  const std::size_t m = cfg.tournament_depth;
  if (tokens.size() <= k)
    fail(ErrorCode::NoScorableTokens,
         "text too short to score: need more than " + std::to_string(k) +
             " tokens");
  DetectionReport r;
  r.scheme = Scheme::kTournament;
  r.rate = 0.5;
  for (std::size_t t = k; t < tokens.size(); ++t) {
    auto window = tokens.subspan(t - k, k);
    for (std::size_t layer = 1; layer <= m; ++layer) {
      ++r.scored;
      if (tournament_bit(cfg.key, window, layer, tokens[t])) ++r.hits;
    }
  }
  r.z = z_score(r.hits, r.scored, r.rate);
  r.p = p_value(r.z);
  r.watermarked = r.z >= 4.0;
  return r;
}

DetectionReport detect(std::span<const TokenId> tokens,
                       const WatermarkConfig& cfg, std::size_t vocab_size,
                       bool exact_small) {
  return cfg.scheme == Scheme::kGreenList
             ? detect_green_list(tokens, cfg, vocab_size, exact_small)
             : detect_tournament(tokens, cfg);
}

GenerationHooks watermark_hooks(const WatermarkConfig& cfg,
                                std::size_t vocab_size, double temperature) {
  cfg.validate();
  GenerationHooks hooks;
  if (cfg.scheme == Scheme::kGreenList) {
    hooks.transform = [cfg, vocab_size](std::span<const TokenId> ctx,
                                        LogitVector& logits) {
      if (logits.size() != vocab_size)
        fail(ErrorCode::VocabMismatch,
             "logit vector does not match the configured vocabulary");
      GreenPartition part =
          green_list(cfg.key, ctx, cfg.context_width, cfg.gamma, vocab_size);
      for (TokenId id : part.green) logits[id] += cfg.delta;
    };
  } else {
    hooks.sampler = [cfg, temperature](std::span<const TokenId> ctx,
                                       const LogitVector& logits,
                                       SplitMix64& rng) {
      return tournament_sample(logits, cfg, ctx, temperature, rng);
    };
  }
  return hooks;
}

}  // namespace wmlab
