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

#ifndef WMLAB_NGRAM_HPP_
#define WMLAB_NGRAM_HPP_

#include <functional>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "wmlab/common.hpp"
#include "wmlab/vocab.hpp"

namespace wmlab {

/// Additively smoothed backoff n-gram model over token ids.
///
/// Conditioning always uses the last `order` tokens of the given context,
/// padded on the left with the bos id when the context is shorter. A context
/// that never occurred in training backs off to the next shorter suffix; a
/// context that did occur is used as-is, with the smoothing mass covering
/// tokens unseen after it. With no training data at all every distribution
/// is exactly uniform.
///
/// A model may carry a prior: probabilities are then the pointwise mixture
/// (1 - prior_mix) * own + prior_mix * prior. This is how a re-trained model
/// is anchored to the model it was derived from.
class NGramModel {
 public:
  NGramModel(VocabPtr vocab, std::size_t order, double smoothing);

  /// Fits on a single token sequence. The sequence must be longer than the
  /// model order (Error(CorpusTooSmall) otherwise).
  static NGramModel fit(VocabPtr vocab, std::span<const TokenId> seq,
                        std::size_t order, double smoothing);

  /// Fits on a batch of sequences, each padded independently. Empty
  /// sequences are skipped; an empty batch is Error(EmptyCorpus).
  static NGramModel fit(VocabPtr vocab, std::span<const TokenSeq> corpus,
                        std::size_t order, double smoothing);

  /// Accumulates counts from one sequence. Targets before first_target are
  /// excluded (their tokens still appear inside later conditioning
  /// contexts); this is how prompt tokens are kept out of a fit while the
  /// completions conditioned on them stay in.
  void add_sequence(std::span<const TokenId> seq, std::size_t first_target = 0);

  void set_prior(std::shared_ptr<const NGramModel> prior, double mix);

  const Vocabulary& vocab() const { return *vocab_; }
  VocabPtr vocab_ptr() const { return vocab_; }
  std::size_t order() const { return order_; }
  double smoothing() const { return smoothing_; }
  double prior_mix() const { return prior_mix_; }
  std::shared_ptr<const NGramModel> prior() const { return prior_; }
  std::uint64_t target_count() const { return targets_; }

  double prob(std::span<const TokenId> context, TokenId next) const;

  /// Full next-token distribution. probs(c)[x] is bitwise equal to
  /// prob(c, x).
  std::vector<double> probs(std::span<const TokenId> context) const;

  /// Natural-log probabilities; the canonical logit gauge of the toolkit,
  /// so that models fitted independently are comparable entry by entry.
  LogitVector logits(std::span<const TokenId> context) const;

  /// Per-token perplexity of a sequence under this model, contexts padded
  /// from the sequence start. Error(EmptySequence) on empty input.
  double perplexity(std::span<const TokenId> seq) const;

  /// Count lookup for the exact trailing context of length `len`; used by
  /// analysis code and serialization. Returns (count, total) pairs.
  std::uint64_t context_total(std::span<const TokenId> context) const;

  /// Content hash covering vocabulary, hyperparameters, counts and the
  /// prior chain; stable across platforms.
  std::uint64_t content_hash() const;

  /// Deterministic iteration for serialization and hashing: visits every
  /// stored context of every order with its successor rows, contexts sorted
  /// by packed id bytes and rows sorted by token id.
  using ContextRow = std::pair<TokenId, std::uint64_t>;
  void visit_contexts(
      const std::function<void(std::size_t ord, std::span<const TokenId> ctx,
                               std::span<const ContextRow> rows)>& fn) const;

  /// Persistence plumbing: adds n observations of (context, target) at the
  /// context's exact order without touching any shorter order, and restores
  /// the fitted-target total. Normal code paths fit models instead.
  void add_count(std::span<const TokenId> context, TokenId target,
                 std::uint64_t n);
  void set_target_count(std::uint64_t targets) { targets_ = targets; }

 private:
  struct ContextCounts {
    std::uint64_t total = 0;
    std::unordered_map<TokenId, std::uint64_t> by_token;
  };

  static std::string key_of(std::span<const TokenId> ctx);
  static TokenSeq key_to_ids(const std::string& key);
  // Trailing `order_` tokens of context, bos-padded on the left.
  TokenSeq effective_context(std::span<const TokenId> context) const;
  const ContextCounts* find_backoff(std::span<const TokenId> padded,
                                    std::size_t* level_out) const;
  double own_prob(std::span<const TokenId> context, TokenId next) const;
  std::vector<double> own_probs(std::span<const TokenId> context) const;

  VocabPtr vocab_;
  std::size_t order_;
  double smoothing_;
  // counts_[k] maps length-k contexts to their successor counts, k = 0..order.
  std::vector<std::unordered_map<std::string, ContextCounts>> counts_;
  std::uint64_t targets_ = 0;
  std::shared_ptr<const NGramModel> prior_;
  double prior_mix_ = 0.0;
};

using ModelPtr = std::shared_ptr<const NGramModel>;

// ---------------------------------------------------------------------------
// Sampling and generation.
// ---------------------------------------------------------------------------

/// Stabilised softmax weights exp(l_i / T - max) with their sum; the shared
/// kernel behind the samplers. Throws Error(InvalidLogits) on NaN or +inf
/// entries, an all -inf vector, or an empty vector.
std::vector<double> softmax_weights(std::span<const double> logits,
                                    double temperature, double* sum_out);

/// Draws an index from softmax(logits / temperature) using one uniform draw
/// and a cumulative scan.
TokenId sample_next(std::span<const double> logits, double temperature,
                    SplitMix64& rng);

/// Hook applied to the raw logits before sampling; receives the full
/// generated-so-far context (prompt included).
using LogitTransform =
    std::function<void(std::span<const TokenId> context, LogitVector& logits)>;

/// Replaces the default sampler entirely (the tournament scheme needs more
/// than a logit adjustment).
using TokenSampler = std::function<TokenId(
    std::span<const TokenId> context, const LogitVector& logits,
    SplitMix64& rng)>;

struct GenerationHooks {
  LogitTransform transform;  // optional
  TokenSampler sampler;      // optional, wins over plain sampling
};

/// Samples `length` tokens autoregressively, starting from `prompt` (which
/// is not echoed into the output). Error(EmptyRequest) when length is zero.
TokenSeq generate(const NGramModel& model, std::span<const TokenId> prompt,
                  std::size_t length, const GenerationHooks& hooks,
                  double temperature, SplitMix64& rng);

}  // namespace wmlab

#endif  // WMLAB_NGRAM_HPP_
