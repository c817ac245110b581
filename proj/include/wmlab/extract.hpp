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

#ifndef WMLAB_EXTRACT_HPP_
#define WMLAB_EXTRACT_HPP_

#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "wmlab/distill.hpp"
#include "wmlab/ngram.hpp"

namespace wmlab {

/// Any source of per-context logits; lets the estimators run against real
/// models or synthetic closures alike. Must be a pure function of the
/// trailing eval_width tokens of the context it is given.
using LogitFn = std::function<LogitVector(std::span<const TokenId>)>;

LogitFn model_logit_fn(const NGramModel& model);

/// Occurrence inventory of trailing n-grams over a corpus.
///
/// For every record the prompt and completion are concatenated; a length-o
/// window occurrence ends at each position t >= o-1, so a record of L tokens
/// contributes L - o + 1 occurrences of order o. The window ending at t
/// stands for the full context that runs up to and including t.
struct ContextCensus {
  struct Occurrence {
    std::uint32_t record = 0;
    std::uint32_t end = 0;  // index of the window's last token
  };

  const WatermarkedCorpus* corpus = nullptr;
  std::vector<std::size_t> orders;
  // by_order[i]: window key (packed ids) -> occurrence list, aligned with
  // orders[i].
  std::vector<std::unordered_map<std::string, std::vector<Occurrence>>>
      by_order;
  std::uint64_t total_contexts = 0;           // one per token of every record
  std::vector<std::uint64_t> max_count;       // per order

  static std::string key_of(std::span<const TokenId> ids);
  static TokenSeq key_to_ids(const std::string& key);
};

/// Orders must be distinct, non-zero and ascending. Error(EmptyCorpus) on a
/// corpus with no tokens.
ContextCensus collect_contexts(const WatermarkedCorpus& corpus,
                               std::span<const std::size_t> orders);

/// Mean logit difference (student - reference) over every context of the
/// census, one context per token of every record. eval_width must cover the
/// true context dependence of both logit sources.
LogitVector global_bias(const LogitFn& student, const LogitFn& reference,
                        const ContextCensus& census, std::size_t eval_width,
                        std::size_t vocab_size);

LogitVector global_bias(const NGramModel& student, const NGramModel& reference,
                        const ContextCensus& census);

/// Mean logit difference over exactly the contexts ending with `window`,
/// which must be one of the census orders. Error(InsufficientSupport) when
/// the window occurs fewer than min_support times.
LogitVector local_bias(const LogitFn& student, const LogitFn& reference,
                       const ContextCensus& census,
                       std::span<const TokenId> window,
                       std::size_t min_support, std::size_t vocab_size);

LogitVector local_bias(const NGramModel& student, const NGramModel& reference,
                       const ContextCensus& census,
                       std::span<const TokenId> window,
                       std::size_t min_support);

struct EwsParams {
  std::vector<std::size_t> orders{1, 2};
  std::size_t cap = 5000;       // most frequent windows kept per order
  double epsilon = 0.05;        // sparsification threshold on local entries
  std::size_t min_support = 5;  // occurrences needed to keep a window
};

/// Extracted watermark signal: a dense global bias plus sparse per-window
/// corrections, weighted by how often each window was observed.
class EwsTable {
 public:
  struct Entry {
    TokenSeq window;
    double weight = 0.0;       // occurrence count / max count of its order
    std::uint64_t support = 0;  // occurrence count
    std::vector<std::pair<TokenId, double>> values;  // sorted by token id
  };

  EwsTable() = default;
  EwsTable(EwsParams params, std::size_t vocab_size, std::uint64_t vocab_hash,
           LogitVector global, std::vector<std::vector<Entry>> per_order);

  const EwsParams& params() const { return params_; }
  std::size_t vocab_size() const { return vocab_size_; }
  std::uint64_t vocab_hash() const { return vocab_hash_; }
  const LogitVector& global() const { return global_; }
  const std::vector<Entry>& entries(std::size_t order_index) const {
    return per_order_[order_index];
  }
  std::size_t order_count() const { return per_order_.size(); }
  const Entry* find(std::span<const TokenId> window) const;

  /// Signal for one context: global plus the weighted sparse correction of
  /// every census order whose trailing window of the context is stored.
  /// Contexts matching no window get the global component alone.
  LogitVector lookup(std::span<const TokenId> context) const;

  std::uint64_t content_hash() const;

 private:
  EwsParams params_;
  std::size_t vocab_size_ = 0;
  std::uint64_t vocab_hash_ = 0;
  LogitVector global_;
  std::vector<std::vector<Entry>> per_order_;  // aligned with params_.orders
  std::vector<std::unordered_map<std::string, std::size_t>> index_;
};

/// Runs the full extraction: census, global bias, per-window local biases
/// for the cap most frequent windows of each order with enough support,
/// sparsified at epsilon.
EwsTable build_ews(const LogitFn& student, const LogitFn& reference,
                   const WatermarkedCorpus& corpus, const EwsParams& params,
                   std::size_t eval_width, std::size_t vocab_size,
                   std::uint64_t vocab_hash);

EwsTable build_ews(const NGramModel& student, const NGramModel& reference,
                   const WatermarkedCorpus& corpus, const EwsParams& params);

}  // namespace wmlab

#endif  // WMLAB_EXTRACT_HPP_
