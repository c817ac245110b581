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

#include "wmlab/ngram.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace wmlab {

NGramModel::NGramModel(VocabPtr vocab, std::size_t order, double smoothing)
    : vocab_(std::move(vocab)), order_(order), smoothing_(smoothing) {
  if (!vocab_) fail(ErrorCode::Validation, "model needs a vocabulary");
  if (order_ == 0) fail(ErrorCode::Validation, "model order must be >= 1");
  if (!(smoothing_ > 0.0) || !std::isfinite(smoothing_))
    fail(ErrorCode::Validation, "smoothing must be a positive finite value");
  counts_.resize(order_ + 1);
}

NGramModel NGramModel::fit(VocabPtr vocab, std::span<const TokenId> seq,
                           std::size_t order, double smoothing) {
  if (seq.empty()) fail(ErrorCode::EmptyCorpus, "fit on an empty sequence");
  if (seq.size() <= order)
    fail(ErrorCode::CorpusTooSmall,
         "need more tokens than the model order (got " +
             std::to_string(seq.size()) + ", order " + std::to_string(order) +
             ")");
  NGramModel m(std::move(vocab), order, smoothing);
  m.add_sequence(seq);
  return m;
}

NGramModel NGramModel::fit(VocabPtr vocab, std::span<const TokenSeq> corpus,
                           std::size_t order, double smoothing) {
  NGramModel m(std::move(vocab), order, smoothing);
  for (const auto& seq : corpus) m.add_sequence(seq);
  if (m.targets_ == 0)
    fail(ErrorCode::EmptyCorpus, "corpus holds no token sequences");
  return m;
}

std::string NGramModel::key_of(std::span<const TokenId> ctx) {
  std::string key(ctx.size() * sizeof(TokenId), '\0');
  if (!ctx.empty()) std::memcpy(key.data(), ctx.data(), key.size());
  return key;
}

TokenSeq NGramModel::key_to_ids(const std::string& key) {
  TokenSeq ids(key.size() / sizeof(TokenId));
  if (!ids.empty()) std::memcpy(ids.data(), key.data(), key.size());
  return ids;
}

void NGramModel::add_sequence(std::span<const TokenId> seq,
                              std::size_t first_target) {
  if (seq.empty()) return;
  TokenSeq padded(order_, Vocabulary::kBosId);
  padded.insert(padded.end(), seq.begin(), seq.end());
  for (std::size_t t = first_target; t < seq.size(); ++t) {
    TokenId target = seq[t];
    // Position of the target inside the padded buffer.
    std::size_t p = t + order_;
    for (std::size_t k = 0; k <= order_; ++k) {
      auto ctx = std::span<const TokenId>(padded).subspan(p - k, k);
      auto& cell = counts_[k][key_of(ctx)];
      cell.total += 1;
      cell.by_token[target] += 1;
    }
    ++targets_;
  }
}

void NGramModel::set_prior(std::shared_ptr<const NGramModel> prior,
                           double mix) {
  if (!(mix >= 0.0 && mix <= 1.0))
    fail(ErrorCode::Validation, "prior mix must lie in [0, 1]");
  if (prior && prior->vocab().content_hash() != vocab_->content_hash())
    fail(ErrorCode::VocabMismatch,
         "prior model was fitted on a different vocabulary");
  prior_ = std::move(prior);
  prior_mix_ = prior_ ? mix : 0.0;
}

TokenSeq NGramModel::effective_context(
    std::span<const TokenId> context) const {
  TokenSeq out;
  out.reserve(order_);
  if (context.size() >= order_) {
    auto tail = context.subspan(context.size() - order_);
    out.assign(tail.begin(), tail.end());
  } else {
    out.assign(order_ - context.size(), Vocabulary::kBosId);
    out.insert(out.end(), context.begin(), context.end());
  }
  return out;
}

const NGramModel::ContextCounts* NGramModel::find_backoff(
    std::span<const TokenId> padded, std::size_t* level_out) const {
  for (std::size_t k = padded.size(); k > 0; --k) {
    auto it = counts_[k].find(key_of(padded.subspan(padded.size() - k)));
    if (it != counts_[k].end() && it->second.total > 0) {
      if (level_out) *level_out = k;
      return &it->second;
    }
  }
  auto it = counts_[0].find(std::string());
  if (level_out) *level_out = 0;
  if (it != counts_[0].end() && it->second.total > 0) return &it->second;
  return nullptr;  // untrained model: uniform smoothing-only distribution
}

double NGramModel::own_prob(std::span<const TokenId> context,
                            TokenId next) const {
  TokenSeq padded = effective_context(context);
  const ContextCounts* cc = find_backoff(padded, nullptr);
  const double v = double(vocab_->size());
  std::uint64_t total = 0, cnt = 0;
  if (cc) {
    total = cc->total;
    auto it = cc->by_token.find(next);
    if (it != cc->by_token.end()) cnt = it->second;
  }
  return (double(cnt) + smoothing_) / (double(total) + smoothing_ * v);
}

std::vector<double> NGramModel::own_probs(
    std::span<const TokenId> context) const {
  TokenSeq padded = effective_context(context);
  const ContextCounts* cc = find_backoff(padded, nullptr);
  const double v = double(vocab_->size());
  const std::uint64_t total = cc ? cc->total : 0;
  const double denom = double(total) + smoothing_ * v;
  std::vector<double> out(vocab_->size(), smoothing_ / denom);
  if (cc) {
    for (const auto& [tok, cnt] : cc->by_token)
      out[tok] = (double(cnt) + smoothing_) / denom;
  }
  return out;
}

double NGramModel::prob(std::span<const TokenId> context, TokenId next) const {
  if (next >= vocab_->size())
    fail(ErrorCode::Validation, "token id out of range");
  double p = own_prob(context, next);
  if (prior_)
    p = (1.0 - prior_mix_) * p + prior_mix_ * prior_->prob(context, next);
  return p;
}

std::vector<double> NGramModel::probs(std::span<const TokenId> context) const {
  std::vector<double> p = own_probs(context);
  if (prior_) {
    std::vector<double> q = prior_->probs(context);
    for (std::size_t i = 0; i < p.size(); ++i)
      p[i] = (1.0 - prior_mix_) * p[i] + prior_mix_ * q[i];
  }
  return p;
}

LogitVector NGramModel::logits(std::span<const TokenId> context) const {
  std::vector<double> p = probs(context);
  LogitVector out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = std::log(p[i]);
  return out;
}

double NGramModel::perplexity(std::span<const TokenId> seq) const {
  if (seq.empty())
    fail(ErrorCode::EmptySequence, "perplexity of an empty sequence");
  double log_sum = 0.0;
  for (std::size_t t = 0; t < seq.size(); ++t)
    log_sum += std::log(prob(seq.first(t), seq[t]));
  return std::exp(-log_sum / double(seq.size()));
}

std::uint64_t NGramModel::context_total(
    std::span<const TokenId> context) const {
  if (context.size() >= counts_.size()) return 0;
  auto it = counts_[context.size()].find(key_of(context));
  return it == counts_[context.size()].end() ? 0 : it->second.total;
}

void NGramModel::visit_contexts(
    const std::function<void(std::size_t, std::span<const TokenId>,
                             std::span<const ContextRow>)>& fn) const {
  for (std::size_t k = 0; k < counts_.size(); ++k) {
    std::vector<const std::string*> keys;
    keys.reserve(counts_[k].size());
    for (const auto& [key, cc] : counts_[k]) keys.push_back(&key);
    std::sort(keys.begin(), keys.end(),
              [](const std::string* a, const std::string* b) { return *a < *b; });
    for (const std::string* key : keys) {
      const ContextCounts& cc = counts_[k].at(*key);
      TokenSeq ctx = key_to_ids(*key);
      std::vector<ContextRow> rows(cc.by_token.begin(), cc.by_token.end());
      std::sort(rows.begin(), rows.end());
      fn(k, ctx, rows);
    }
  }
}

void NGramModel::add_count(std::span<const TokenId> context, TokenId target,
                           std::uint64_t n) {
  if (context.size() >= counts_.size())
    fail(ErrorCode::Validation, "context longer than the model order");
  auto& cell = counts_[context.size()][key_of(context)];
  cell.total += n;
  cell.by_token[target] += n;
}

std::uint64_t NGramModel::content_hash() const {
  HashStream h;
  h.fold(vocab_->content_hash());
  h.fold(order_);
  h.fold_bytes(std::string_view(reinterpret_cast<const char*>(&smoothing_),
                                sizeof(smoothing_)));
  visit_contexts([&h](std::size_t k, std::span<const TokenId> ctx,
                      std::span<const ContextRow> rows) {
    h.fold(k);
    for (TokenId c : ctx) h.fold(c);
    h.fold(rows.size());
    for (const auto& [tok, cnt] : rows) {
      h.fold(tok);
      h.fold(cnt);
    }
  });
  if (prior_) {
    h.fold_bytes(std::string_view(reinterpret_cast<const char*>(&prior_mix_),
                                  sizeof(prior_mix_)));
    h.fold(prior_->content_hash());
  }
  return h.digest();
}

std::vector<double> softmax_weights(std::span<const double> logits,
                                    double temperature, double* sum_out) {
  if (logits.empty()) fail(ErrorCode::InvalidLogits, "empty logit vector");
  if (!(temperature > 0.0) || !std::isfinite(temperature))
    fail(ErrorCode::Validation, "temperature must be positive and finite");
  double m = -HUGE_VAL;
  for (double l : logits) {
    if (std::isnan(l) || l == HUGE_VAL)
      fail(ErrorCode::InvalidLogits, "logit vector has NaN or +inf entries");
    m = std::max(m, l / temperature);
  }
  if (m == -HUGE_VAL) fail(ErrorCode::InvalidLogits, "all logits are -inf");
  double sum = 0.0;
  std::vector<double> w(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    w[i] = std::exp(logits[i] / temperature - m);
    sum += w[i];
  }
  if (sum_out) *sum_out = sum;
  return w;
}

TokenId sample_next(std::span<const double> logits, double temperature,
                    SplitMix64& rng) {
  double sum = 0.0;
  std::vector<double> w = softmax_weights(logits, temperature, &sum);
  // One uniform draw, then a cumulative walk; this keeps sampling identical
  // across platforms, unlike the library distributions.
  const double target = rng.next_double() * sum;
  double acc = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    acc += w[i];
    if (target < acc) return TokenId(i);
  }
  // Rounding can leave the target at or past the final accumulated value;
  // fall back to the last sampleable index.
  for (std::size_t i = w.size(); i > 0; --i)
    if (w[i - 1] > 0.0) return TokenId(i - 1);
  return TokenId(w.size() - 1);
}

TokenSeq generate(const NGramModel& model, std::span<const TokenId> prompt,
                  std::size_t length, const GenerationHooks& hooks,
                  double temperature, SplitMix64& rng) {
  if (length == 0) fail(ErrorCode::EmptyRequest, "asked to generate 0 tokens");
  TokenSeq ctx(prompt.begin(), prompt.end());
  ctx.reserve(prompt.size() + length);
  TokenSeq out;
  out.reserve(length);
  for (std::size_t i = 0; i < length; ++i) {
    LogitVector logits = model.logits(ctx);
    if (hooks.transform) hooks.transform(ctx, logits);
    TokenId next = hooks.sampler ? hooks.sampler(ctx, logits, rng)
                                 : sample_next(logits, temperature, rng);
    ctx.push_back(next);
    out.push_back(next);
  }
  return out;
}

}  // namespace wmlab
