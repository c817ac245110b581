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

#include <doctest.h>

#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "wmlab/ngram.hpp"
#include "wmlab/vocab.hpp"

using namespace wmlab;

namespace {

VocabPtr letters_vocab() {
  return std::make_shared<Vocabulary>(
      Vocabulary::build("a b c d e f g h", TokenizerMode::kWhitespace, 100));
}

// Independent smoothed-backoff oracle: recounts every n-gram of the padded
// training data and answers queries by longest-suffix match, mirroring the
// documented model semantics with none of the model code.
class CountOracle {
 public:
  CountOracle(const std::vector<TokenSeq>& corpus, std::size_t order,
              double smoothing, std::size_t vocab_size)
      : order_(order), smoothing_(smoothing), vocab_size_(vocab_size) {
    for (const TokenSeq& seq : corpus) {
      if (seq.empty()) continue;
      TokenSeq padded(order, Vocabulary::kBosId);
      padded.insert(padded.end(), seq.begin(), seq.end());
      for (std::size_t t = 0; t < seq.size(); ++t) {
        const std::size_t p = t + order;
        for (std::size_t k = 0; k <= order; ++k) {
          TokenSeq ctx(padded.begin() + (p - k), padded.begin() + p);
          auto& cell = counts_[ctx];
          cell.total += 1;
          cell.by_token[seq[t]] += 1;
        }
      }
    }
  }

  double prob(TokenSeq context, TokenId next) const {
    TokenSeq padded(order_, Vocabulary::kBosId);
    padded.insert(padded.end(), context.begin(), context.end());
    padded.erase(padded.begin(), padded.end() - std::ptrdiff_t(order_));
    for (std::size_t k = order_ + 1; k > 0; --k) {
      TokenSeq suffix(padded.end() - std::ptrdiff_t(k - 1), padded.end());
      auto it = counts_.find(suffix);
      if (it == counts_.end()) continue;
      const auto& cell = it->second;
      std::uint64_t cnt = 0;
      auto jt = cell.by_token.find(next);
      if (jt != cell.by_token.end()) cnt = jt->second;
      return (double(cnt) + smoothing_) /
             (double(cell.total) + smoothing_ * double(vocab_size_));
    }
    return 1.0 / double(vocab_size_);
  }

 private:
  struct Cell {
    std::uint64_t total = 0;
    std::map<TokenId, std::uint64_t> by_token;
  };
  std::size_t order_;
  double smoothing_;
  std::size_t vocab_size_;
  std::map<TokenSeq, Cell> counts_;
};

std::vector<TokenSeq> random_corpus(const Vocabulary& vocab, std::size_t lines,
                                    std::size_t len, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<TokenSeq> out(lines);
  for (auto& seq : out) {
    seq.resize(len);
    for (auto& id : seq)
      id = TokenId(2 + rng.next_below(vocab.size() - 2));
  }
  return out;
}

}  // namespace

TEST_CASE("a deterministic bigram drives P(b|a) toward one") {
  VocabPtr v = letters_vocab();
  const TokenSeq seq = v->encode("a b a b a");
  const NGramModel m = NGramModel::fit(v, seq, 1, 1e-9);
  const TokenSeq ctx = v->encode("a");
  CHECK(m.prob(ctx, *v->find("b")) > 0.9999);
}

TEST_CASE("fit rejects sequences not longer than the order") {
  VocabPtr v = letters_vocab();
  CHECK_THROWS_AS(NGramModel::fit(v, v->encode("a b"), 2, 0.1), Error);
  try {
    NGramModel::fit(v, std::vector<TokenSeq>{}, 2, 0.1);
    FAIL("empty batch accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyCorpus);
  }
}

TEST_CASE("distributions normalise at random contexts") {
  VocabPtr v = letters_vocab();
  const auto corpus = random_corpus(*v, 50, 12, 11);
  const NGramModel m = NGramModel::fit(v, corpus, 2, 0.1);
  SplitMix64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    TokenSeq ctx(rng.next_below(4));
    for (auto& id : ctx) id = TokenId(rng.next_below(v->size()));
    const std::vector<double> p = m.probs(ctx);
    double sum = 0.0;
    for (double x : p) sum += x;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("model probabilities match an independent count oracle") {
  VocabPtr v = letters_vocab();
  const auto corpus = random_corpus(*v, 40, 10, 17);
  const NGramModel m = NGramModel::fit(v, corpus, 2, 0.1);
  const CountOracle oracle(corpus, 2, 0.1, v->size());
  SplitMix64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    TokenSeq ctx(rng.next_below(4));
    for (auto& id : ctx) id = TokenId(rng.next_below(v->size()));
    const TokenId next = TokenId(rng.next_below(v->size()));
    CHECK(m.prob(ctx, next) == doctest::Approx(oracle.prob(ctx, next))
                                   .epsilon(1e-12));
  }
}

TEST_CASE("an unfitted model is exactly uniform") {
  VocabPtr v = letters_vocab();
  const NGramModel m(v, 2, 0.1);
  const LogitVector l = m.logits(v->encode("a b"));
  for (double x : l) CHECK(x == l[0]);

  // Uniform next-token probability makes per-token perplexity exactly |V|.
  const double ppl = m.perplexity(v->encode("a b c d"));
  CHECK(ppl == doctest::Approx(double(v->size())).epsilon(1e-12));
}

TEST_CASE("logits are log-probabilities entry by entry") {
  VocabPtr v = letters_vocab();
  const auto corpus = random_corpus(*v, 30, 10, 23);
  const NGramModel m = NGramModel::fit(v, corpus, 2, 0.1);
  SplitMix64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    TokenSeq ctx(2);
    for (auto& id : ctx) id = TokenId(rng.next_below(v->size()));
    const std::vector<double> p = m.probs(ctx);
    const LogitVector l = m.logits(ctx);
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(std::exp(l[i]) == doctest::Approx(p[i]).epsilon(1e-12));
      sum += std::exp(l[i]);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("sampling is sharp when one logit dominates") {
  LogitVector l(6, -50.0);
  l[3] = 50.0;
  SplitMix64 rng(21);
  std::size_t hits = 0;
  for (int i = 0; i < 10000; ++i)
    if (sample_next(l, 1.0, rng) == 3) ++hits;
  CHECK(double(hits) / 10000.0 > 0.999);
}

TEST_CASE("sampling replays exactly under a fixed seed") {
  LogitVector l = {0.3, -0.2, 0.9, -1.0, 0.0};
  SplitMix64 a(77), b(77);
  for (int i = 0; i < 200; ++i)
    CHECK(sample_next(l, 0.8, a) == sample_next(l, 0.8, b));
}

TEST_CASE("sampling frequencies track softmax within multinomial bounds") {
  const LogitVector l = {0.0, 1.0, -0.5, 2.0, 0.3};
  double sum = 0.0;
  const std::vector<double> w = softmax_weights(l, 1.0, &sum);
  SplitMix64 rng(424242);
  const std::size_t n = 100000;
  std::vector<std::size_t> counts(l.size(), 0);
  for (std::size_t i = 0; i < n; ++i) ++counts[sample_next(l, 1.0, rng)];
  for (std::size_t i = 0; i < l.size(); ++i) {
    const double p = w[i] / sum;
    const double sigma = std::sqrt(p * (1.0 - p) / double(n));
    CHECK(std::abs(double(counts[i]) / double(n) - p) <= 3.0 * sigma);
  }
}

TEST_CASE("non-finite logits are rejected") {
  SplitMix64 rng(1);
  LogitVector nan_l = {0.0, std::nan("")};
  CHECK_THROWS_AS(sample_next(nan_l, 1.0, rng), Error);
  LogitVector inf_l = {0.0, std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(sample_next(inf_l, 1.0, rng), Error);
  LogitVector all_ninf(3, -std::numeric_limits<double>::infinity());
  try {
    sample_next(all_ninf, 1.0, rng);
    FAIL("all -inf accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidLogits);
  }
}

TEST_CASE("generation without hooks equals an identity transform") {
  VocabPtr v = letters_vocab();
  const auto corpus = random_corpus(*v, 30, 10, 31);
  const NGramModel m = NGramModel::fit(v, corpus, 2, 0.1);
  const TokenSeq prompt = v->encode("a b");

  SplitMix64 r1(5), r2(5);
  GenerationHooks none;
  GenerationHooks identity;
  identity.transform = [](std::span<const TokenId>, LogitVector&) {};
  const TokenSeq plain = generate(m, prompt, 40, none, 1.0, r1);
  const TokenSeq hooked = generate(m, prompt, 40, identity, 1.0, r2);
  CHECK(plain == hooked);
  CHECK(plain.size() == 40);

  SplitMix64 r3(5);
  CHECK_THROWS_AS(generate(m, prompt, 0, none, 1.0, r3), Error);
}

TEST_CASE("perplexity matches the direct log-probability sum") {
  VocabPtr v = letters_vocab();
  const auto corpus = random_corpus(*v, 30, 10, 37);
  const NGramModel m = NGramModel::fit(v, corpus, 2, 0.1);
  const TokenSeq seq = random_corpus(*v, 1, 25, 41)[0];

  double acc = 0.0;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const TokenSeq ctx(seq.begin(), seq.begin() + std::ptrdiff_t(t));
    acc += std::log(m.prob(ctx, seq[t]));
  }
  const double expected = std::exp(-acc / double(seq.size()));
  CHECK(m.perplexity(seq) == doctest::Approx(expected).epsilon(1e-12));

  CHECK_THROWS_AS(m.perplexity(TokenSeq{}), Error);
}

TEST_CASE("a memorised cycle scores perplexity near one") {
  VocabPtr v = letters_vocab();
  TokenSeq cycle;
  for (int i = 0; i < 50; ++i) {
    cycle.push_back(*v->find("a"));
    cycle.push_back(*v->find("b"));
  }
  const NGramModel m = NGramModel::fit(v, cycle, 1, 1e-12);
  CHECK(m.perplexity(cycle) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("logits ignore context beyond the model order") {
  VocabPtr v = letters_vocab();
  const auto corpus = random_corpus(*v, 40, 10, 43);
  const NGramModel m = NGramModel::fit(v, corpus, 2, 0.1);
  SplitMix64 rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    TokenSeq tail(2);
    for (auto& id : tail) id = TokenId(rng.next_below(v->size()));
    TokenSeq longer(5 + rng.next_below(5));
    for (auto& id : longer) id = TokenId(rng.next_below(v->size()));
    longer.insert(longer.end(), tail.begin(), tail.end());
    CHECK(m.logits(tail) == m.logits(longer));
  }
}

TEST_CASE("trained contexts never fall back to a shorter order") {
  VocabPtr v = letters_vocab();
  const auto corpus = random_corpus(*v, 40, 10, 47);
  const NGramModel m = NGramModel::fit(v, corpus, 2, 0.1);
  // Every bigram present in training must be answered from its own counts:
  // the smoothed ratio at the full order, never a shorter-suffix estimate.
  for (const TokenSeq& seq : corpus) {
    for (std::size_t t = 2; t < seq.size(); ++t) {
      const TokenSeq ctx(seq.begin() + std::ptrdiff_t(t) - 2,
                         seq.begin() + std::ptrdiff_t(t));
      const std::uint64_t total = m.context_total(ctx);
      REQUIRE(total > 0);
      std::uint64_t joint = 0;
      for (const TokenSeq& s2 : corpus) {
        TokenSeq padded(2, Vocabulary::kBosId);
        padded.insert(padded.end(), s2.begin(), s2.end());
        for (std::size_t u = 0; u + 2 < padded.size(); ++u)
          if (padded[u] == ctx[0] && padded[u + 1] == ctx[1] &&
              padded[u + 2] == seq[t])
            ++joint;
      }
      const double expect = (double(joint) + 0.1) /
                            (double(total) + 0.1 * double(v->size()));
      CHECK(m.prob(ctx, seq[t]) == doctest::Approx(expect).epsilon(1e-12));
    }
  }
}

TEST_CASE("prior mixing interpolates between own and prior estimates") {
  VocabPtr v = letters_vocab();
  const auto c1 = random_corpus(*v, 30, 10, 53);
  const auto c2 = random_corpus(*v, 30, 10, 59);
  auto prior = std::make_shared<NGramModel>(NGramModel::fit(v, c1, 2, 0.1));
  NGramModel own = NGramModel::fit(v, c2, 2, 0.1);
  NGramModel mixed = NGramModel::fit(v, c2, 2, 0.1);

  const TokenSeq ctx = v->encode("a b");
  mixed.set_prior(prior, 1.0);
  CHECK(mixed.probs(ctx) == prior->probs(ctx));
  mixed.set_prior(prior, 0.0);
  CHECK(mixed.probs(ctx) == own.probs(ctx));
  mixed.set_prior(prior, 0.3);
  const auto p = mixed.probs(ctx);
  const auto po = own.probs(ctx);
  const auto pp = prior->probs(ctx);
  for (std::size_t i = 0; i < p.size(); ++i)
    CHECK(p[i] == doctest::Approx(0.7 * po[i] + 0.3 * pp[i]).epsilon(1e-15));

  VocabPtr other = std::make_shared<Vocabulary>(
      Vocabulary::build("x y z", TokenizerMode::kWhitespace, 10));
  auto alien =
      std::make_shared<NGramModel>(NGramModel::fit(other, other->encode("x y z x"), 1, 0.1));
  CHECK_THROWS_AS(mixed.set_prior(alien, 0.5), Error);
}
