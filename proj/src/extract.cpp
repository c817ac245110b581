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

#include "wmlab/extract.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace wmlab {

namespace {

TokenSeq full_tokens(const WatermarkedRecord& rec) {
  TokenSeq full = rec.prompt;
  full.insert(full.end(), rec.completion.begin(), rec.completion.end());
  return full;
}

void check_orders(std::span<const std::size_t> orders) {
  if (orders.empty())
    fail(ErrorCode::Validation, "extract.orders must not be empty");
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (orders[i] == 0)
      fail(ErrorCode::Validation, "extract.orders entries must be >= 1");
    if (i > 0 && orders[i] <= orders[i - 1])
      fail(ErrorCode::Validation,
           "extract.orders must be strictly ascending");
  }
}

// Walks every context of the corpus grouped by its model-visible state: the
// trailing eval_width tokens plus how many of them are padding. Groups with
// identical windows produce identical logits, so each is evaluated once and
// its difference vector scattered with the group's multiplicity. The pad
// count is part of the key because a window reached through padding stands
// for different census prefixes than the same tokens occurring mid-sequence.
struct ContextGroup {
  std::uint8_t pad = 0;
  TokenSeq window;  // length eval_width, bos ids in the first `pad` slots
  std::uint64_t count = 0;
};

std::vector<ContextGroup> group_contexts(const WatermarkedCorpus& corpus,
                                         std::size_t eval_width) {
  if (eval_width == 0 || eval_width > 255)
    fail(ErrorCode::Validation, "context evaluation width out of range");
  std::unordered_map<std::string, std::uint64_t> counts;
  std::string key;
  for (const auto& rec : corpus.records) {
    TokenSeq full = full_tokens(rec);
    for (std::size_t j = 1; j <= full.size(); ++j) {
      const std::size_t take = std::min(eval_width, j);
      const std::size_t pad = eval_width - take;
      key.assign(1, char(pad));
      key.resize(1 + eval_width * sizeof(TokenId), '\0');
      // Padding slots stay zero, which is exactly the bos id.
      std::memcpy(key.data() + 1 + pad * sizeof(TokenId),
                  full.data() + (j - take), take * sizeof(TokenId));
      ++counts[key];
    }
  }
  std::vector<ContextGroup> groups;
  groups.reserve(counts.size());
  for (const auto& [k, n] : counts) {
    ContextGroup g;
    g.pad = std::uint8_t(k[0]);
    g.window.resize(eval_width);
    std::memcpy(g.window.data(), k.data() + 1, eval_width * sizeof(TokenId));
    g.count = n;
    groups.push_back(std::move(g));
  }
  return groups;
}

LogitVector diff_at(const LogitFn& student, const LogitFn& reference,
                    std::span<const TokenId> context, std::size_t vocab_size) {
  LogitVector s = student(context);
  LogitVector r = reference(context);
  if (s.size() != vocab_size || r.size() != vocab_size)
    fail(ErrorCode::VocabMismatch,
         "logit sources disagree on vocabulary size");
  for (std::size_t i = 0; i < s.size(); ++i) s[i] -= r[i];
  return s;
}

}  // namespace

std::string ContextCensus::key_of(std::span<const TokenId> ids) {
  std::string key(ids.size() * sizeof(TokenId), '\0');
  if (!ids.empty()) std::memcpy(key.data(), ids.data(), key.size());
  return key;
}

TokenSeq ContextCensus::key_to_ids(const std::string& key) {
  TokenSeq ids(key.size() / sizeof(TokenId));
  if (!ids.empty()) std::memcpy(ids.data(), key.data(), key.size());
  return ids;
}

ContextCensus collect_contexts(const WatermarkedCorpus& corpus,
                               std::span<const std::size_t> orders) {
  check_orders(orders);
  ContextCensus census;
  census.corpus = &corpus;
  census.orders.assign(orders.begin(), orders.end());
  census.by_order.resize(orders.size());
  census.max_count.assign(orders.size(), 0);

  for (std::uint32_t r = 0; r < corpus.records.size(); ++r) {
    TokenSeq full = full_tokens(corpus.records[r]);
    census.total_contexts += full.size();
    for (std::size_t oi = 0; oi < census.orders.size(); ++oi) {
      const std::size_t o = census.orders[oi];
      if (full.size() < o) continue;
      for (std::size_t t = o - 1; t < full.size(); ++t) {
        auto window = std::span<const TokenId>(full).subspan(t - o + 1, o);
        census.by_order[oi][ContextCensus::key_of(window)].push_back(
            {r, std::uint32_t(t)});
      }
    }
  }
  if (census.total_contexts == 0)
    fail(ErrorCode::EmptyCorpus, "census over a corpus with no tokens");
  for (std::size_t oi = 0; oi < census.orders.size(); ++oi)
    for (const auto& [key, occs] : census.by_order[oi])
      census.max_count[oi] =
          std::max(census.max_count[oi], std::uint64_t(occs.size()));
  return census;
}

LogitFn model_logit_fn(const NGramModel& model) {
  return [&model](std::span<const TokenId> ctx) { return model.logits(ctx); };
}

LogitVector global_bias(const LogitFn& student, const LogitFn& reference,
                        const ContextCensus& census, std::size_t eval_width,
                        std::size_t vocab_size) {
  if (!census.corpus)
    fail(ErrorCode::Validation, "census is not attached to a corpus");
  if (census.total_contexts == 0)
    fail(ErrorCode::EmptyCorpus, "census covers no contexts");
  LogitVector sum(vocab_size, 0.0);
  for (const auto& g : group_contexts(*census.corpus, eval_width)) {
    LogitVector d = diff_at(student, reference, g.window, vocab_size);
    for (std::size_t i = 0; i < vocab_size; ++i)
      sum[i] += double(g.count) * d[i];
  }
  for (double& v : sum) v /= double(census.total_contexts);
  return sum;
}

LogitVector global_bias(const NGramModel& student, const NGramModel& reference,
                        const ContextCensus& census) {
  if (student.vocab().content_hash() != reference.vocab().content_hash())
    fail(ErrorCode::VocabMismatch,
         "student and reference use different vocabularies");
  std::size_t width = std::max(student.order(), reference.order());
  return global_bias(model_logit_fn(student), model_logit_fn(reference),
                     census, width, student.vocab().size());
}

LogitVector local_bias(const LogitFn& student, const LogitFn& reference,
                       const ContextCensus& census,
                       std::span<const TokenId> window,
                       std::size_t min_support, std::size_t vocab_size) {
  if (!census.corpus)
    fail(ErrorCode::Validation, "census is not attached to a corpus");
  auto oi_it = std::find(census.orders.begin(), census.orders.end(),
                         window.size());
  if (oi_it == census.orders.end())
    fail(ErrorCode::Validation,
         "window length was not part of the census orders");
  const std::size_t oi = std::size_t(oi_it - census.orders.begin());
  auto it = census.by_order[oi].find(ContextCensus::key_of(window));
  const std::size_t n = it == census.by_order[oi].end() ? 0 : it->second.size();
  if (n < min_support)
    fail(ErrorCode::InsufficientSupport,
         "window occurs " + std::to_string(n) + " times, need " +
             std::to_string(min_support));

  LogitVector sum(vocab_size, 0.0);
  for (const auto& occ : it->second) {
    TokenSeq full = full_tokens(census.corpus->records[occ.record]);
    auto ctx = std::span<const TokenId>(full).first(occ.end + 1);
    LogitVector d = diff_at(student, reference, ctx, vocab_size);
    for (std::size_t i = 0; i < vocab_size; ++i) sum[i] += d[i];
  }
  for (double& v : sum) v /= double(n);
  return sum;
}

LogitVector local_bias(const NGramModel& student, const NGramModel& reference,
                       const ContextCensus& census,
                       std::span<const TokenId> window,
                       std::size_t min_support) {
  return local_bias(model_logit_fn(student), model_logit_fn(reference), census,
                    window, min_support, student.vocab().size());
}

EwsTable::EwsTable(EwsParams params, std::size_t vocab_size,
                   std::uint64_t vocab_hash, LogitVector global,
                   std::vector<std::vector<Entry>> per_order)
    : params_(std::move(params)),
      vocab_size_(vocab_size),
      vocab_hash_(vocab_hash),
      global_(std::move(global)),
      per_order_(std::move(per_order)) {
  if (global_.size() != vocab_size_)
    fail(ErrorCode::Validation, "global bias length disagrees with |V|");
  if (per_order_.size() != params_.orders.size())
    fail(ErrorCode::Validation, "per-order table count disagrees with orders");
  index_.resize(per_order_.size());
  for (std::size_t oi = 0; oi < per_order_.size(); ++oi) {
    for (std::size_t e = 0; e < per_order_[oi].size(); ++e) {
      const Entry& entry = per_order_[oi][e];
      if (entry.window.size() != params_.orders[oi])
        fail(ErrorCode::Validation, "entry window length mismatch");
      index_[oi].emplace(ContextCensus::key_of(entry.window), e);
    }
  }
}

const EwsTable::Entry* EwsTable::find(std::span<const TokenId> window) const {
  for (std::size_t oi = 0; oi < per_order_.size(); ++oi) {
    if (params_.orders[oi] != window.size()) continue;
    auto it = index_[oi].find(ContextCensus::key_of(window));
    if (it != index_[oi].end()) return &per_order_[oi][it->second];
  }
  return nullptr;
}

LogitVector EwsTable::lookup(std::span<const TokenId> context) const {
  LogitVector out = global_;
  for (std::size_t oi = 0; oi < per_order_.size(); ++oi) {
    const std::size_t o = params_.orders[oi];
    TokenSeq window(o, Vocabulary::kBosId);
    const std::size_t take = std::min(o, context.size());
    std::copy(context.end() - std::ptrdiff_t(take), context.end(),
              window.end() - std::ptrdiff_t(take));
    auto it = index_[oi].find(ContextCensus::key_of(window));
    if (it == index_[oi].end()) continue;
    const Entry& entry = per_order_[oi][it->second];
    for (const auto& [tok, val] : entry.values)
      out[tok] += entry.weight * val;
  }
  return out;
}

std::uint64_t EwsTable::content_hash() const {
  HashStream h;
  h.fold(vocab_hash_);
  h.fold(vocab_size_);
  auto fold_double = [&h](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    h.fold(bits);
  };
  fold_double(params_.epsilon);
  h.fold(params_.cap);
  h.fold(params_.min_support);
  for (std::size_t o : params_.orders) h.fold(o);
  for (double v : global_) fold_double(v);
  for (const auto& entries : per_order_) {
    h.fold(entries.size());
    for (const auto& e : entries) {
      for (TokenId t : e.window) h.fold(t);
      fold_double(e.weight);
      h.fold(e.support);
      for (const auto& [tok, val] : e.values) {
        h.fold(tok);
        fold_double(val);
      }
    }
  }
  return h.digest();
}

EwsTable build_ews(const LogitFn& student, const LogitFn& reference,
                   const WatermarkedCorpus& corpus, const EwsParams& params,
                   std::size_t eval_width, std::size_t vocab_size,
                   std::uint64_t vocab_hash) {
  check_orders(params.orders);
  if (!(params.epsilon >= 0.0) || !std::isfinite(params.epsilon))
    fail(ErrorCode::Validation, "extract.epsilon must be finite and >= 0");
  if (params.cap == 0)
    fail(ErrorCode::Validation, "extract.cap must be >= 1");
  for (std::size_t o : params.orders)
    if (o > eval_width)
      fail(ErrorCode::Validation,
           "census order exceeds the context evaluation width");

  ContextCensus census = collect_contexts(corpus, params.orders);

  // Pick the cap most frequent windows of each order with enough support;
  // ties resolve on the packed key so selection is deterministic.
  struct Slot {
    std::size_t oi = 0;
    std::uint64_t support = 0;
    LogitVector sum;
  };
  std::vector<std::unordered_map<std::string, std::size_t>> chosen(
      census.orders.size());
  std::vector<Slot> slots;
  std::vector<TokenSeq> slot_windows;
  for (std::size_t oi = 0; oi < census.orders.size(); ++oi) {
    std::vector<std::pair<const std::string*, std::uint64_t>> ranked;
    ranked.reserve(census.by_order[oi].size());
    for (const auto& [key, occs] : census.by_order[oi])
      if (occs.size() >= params.min_support)
        ranked.emplace_back(&key, occs.size());
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return *a.first < *b.first;
    });
    if (ranked.size() > params.cap) ranked.resize(params.cap);
    for (const auto& [key, support] : ranked) {
      chosen[oi].emplace(*key, slots.size());
      slots.push_back({oi, support, LogitVector(vocab_size, 0.0)});
      slot_windows.push_back(ContextCensus::key_to_ids(*key));
    }
  }

  LogitVector global_sum(vocab_size, 0.0);
  for (const auto& g : group_contexts(corpus, eval_width)) {
    LogitVector d = diff_at(student, reference, g.window, vocab_size);
    for (std::size_t i = 0; i < vocab_size; ++i)
      global_sum[i] += double(g.count) * d[i];
    for (std::size_t oi = 0; oi < census.orders.size(); ++oi) {
      const std::size_t o = census.orders[oi];
      // The trailing o tokens must all be real, not padding, to count as an
      // occurrence of the window.
      if (o + g.pad > eval_width) continue;
      auto suffix =
          std::span<const TokenId>(g.window).subspan(eval_width - o);
      auto it = chosen[oi].find(ContextCensus::key_of(suffix));
      if (it == chosen[oi].end()) continue;
      Slot& slot = slots[it->second];
      for (std::size_t i = 0; i < vocab_size; ++i)
        slot.sum[i] += double(g.count) * d[i];
    }
  }
  for (double& v : global_sum) v /= double(census.total_contexts);

  std::vector<std::vector<EwsTable::Entry>> per_order(census.orders.size());
  for (std::size_t s = 0; s < slots.size(); ++s) {
    const Slot& slot = slots[s];
    EwsTable::Entry entry;
    entry.window = slot_windows[s];
    entry.support = slot.support;
    entry.weight = double(slot.support) / double(census.max_count[slot.oi]);
    for (std::size_t i = 0; i < vocab_size; ++i) {
      const double v = slot.sum[i] / double(slot.support);
      if (std::fabs(v) >= params.epsilon)
        entry.values.emplace_back(TokenId(i), v);
    }
    per_order[slot.oi].push_back(std::move(entry));
  }
  // Entries come out ranked by support; re-order them by window key so the
  // table layout is independent of support ties' hash order.
  for (auto& entries : per_order)
    std::sort(entries.begin(), entries.end(),
              [](const EwsTable::Entry& a, const EwsTable::Entry& b) {
                return ContextCensus::key_of(a.window) <
                       ContextCensus::key_of(b.window);
              });

  return EwsTable(params, vocab_size, vocab_hash, std::move(global_sum),
                  std::move(per_order));
}

EwsTable build_ews(const NGramModel& student, const NGramModel& reference,
                   const WatermarkedCorpus& corpus, const EwsParams& params) {
  if (student.vocab().content_hash() != reference.vocab().content_hash())
    fail(ErrorCode::VocabMismatch,
         "student and reference use different vocabularies");
  std::size_t width = std::max(student.order(), reference.order());
  for (std::size_t o : params.orders) width = std::max(width, o);
  return build_ews(model_logit_fn(student), model_logit_fn(reference), corpus,
                   params, width, student.vocab().size(),
                   student.vocab().content_hash());
}

}  // namespace wmlab
