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

#include "wmlab/distill.hpp"

#include <algorithm>
#include <cmath>

namespace wmlab {

std::size_t WatermarkedCorpus::completion_tokens() const {
  std::size_t n = 0;
  for (const auto& r : records) n += r.completion.size();
  return n;
}

std::uint64_t WatermarkedCorpus::content_hash() const {
  HashStream h;
  h.fold(records.size());
  for (const auto& r : records) {
    h.fold(r.prompt.size());
    for (TokenId t : r.prompt) h.fold(t);
    h.fold(r.completion.size());
    for (TokenId t : r.completion) h.fold(t);
  }
  h.fold(provenance.vocab_hash);
  h.fold(provenance.teacher_hash);
  h.fold(provenance.seed);
  return h.digest();
}

void annotate_marks(WatermarkedCorpus& corpus, const WatermarkConfig& cfg,
                    std::size_t vocab_size) {
  cfg.validate();
  const std::size_t k = cfg.context_width;
  for (auto& rec : corpus.records) {
    rec.marks.assign(rec.completion.size(), 0);
    TokenSeq full = rec.prompt;
    full.insert(full.end(), rec.completion.begin(), rec.completion.end());
    for (std::size_t i = 0; i < rec.completion.size(); ++i) {
      const std::size_t t = rec.prompt.size() + i;
      auto ctx = std::span<const TokenId>(full).first(t);
      if (cfg.scheme == Scheme::kGreenList) {
        GreenPartition part =
            green_list(cfg.key, ctx, k, cfg.gamma, vocab_size);
        rec.marks[i] = part.contains(full[t]) ? 1 : 0;
      } else {
        TokenSeq window(k, Vocabulary::kBosId);
        std::size_t take = std::min(k, ctx.size());
        std::copy(ctx.end() - std::ptrdiff_t(take), ctx.end(),
                  window.end() - std::ptrdiff_t(take));
        std::uint8_t sum = 0;
        for (std::size_t layer = 1; layer <= cfg.tournament_depth; ++layer)
          if (tournament_bit(cfg.key, window, layer, full[t])) ++sum;
        rec.marks[i] = sum;
      }
    }
  }
}

WatermarkedCorpus generate_dataset(const NGramModel& teacher,
                                   const WatermarkConfig& cfg,
                                   std::span<const TokenSeq> prompts,
                                   std::size_t n, std::size_t length,
                                   double temperature, std::uint64_t seed) {
  cfg.validate();
  if (n == 0 || length == 0)
    fail(ErrorCode::EmptyRequest, "dataset request for zero tokens");
  if (prompts.empty())
    fail(ErrorCode::EmptyRequest, "dataset request without prompts");

  const std::size_t vocab_size = teacher.vocab().size();
  GenerationHooks hooks = watermark_hooks(cfg, vocab_size, temperature);

  WatermarkedCorpus corpus;
  corpus.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    WatermarkedRecord rec;
    rec.prompt = prompts[i % prompts.size()];
    SplitMix64 rng(derive_seed(seed, "dataset-record", i));
    rec.completion =
        generate(teacher, rec.prompt, length, hooks, temperature, rng);
    corpus.records.push_back(std::move(rec));
  }
  annotate_marks(corpus, cfg, vocab_size);

  CorpusProvenance& prov = corpus.provenance;
  prov.vocab_hash = teacher.vocab().content_hash();
  prov.teacher_hash = teacher.content_hash();
  prov.scheme = cfg.scheme;
  prov.gamma = cfg.gamma;
  prov.delta = cfg.delta;
  prov.context_width = cfg.context_width;
  prov.tournament_depth = cfg.tournament_depth;
  prov.key_fingerprint = cfg.key_fingerprint();
  HashStream ph;
  ph.fold(prompts.size());
  for (const auto& p : prompts) {
    ph.fold(p.size());
    for (TokenId t : p) ph.fold(t);
  }
  prov.prompt_set_hash = ph.digest();
  prov.temperature = temperature;
  prov.seed = seed;
  return corpus;
}

DistillationResult fit_student(ModelPtr base, const WatermarkedCorpus& corpus,
                               double mix, bool completions_only) {
  if (!base) fail(ErrorCode::Validation, "fit_student needs a base model");
  if (corpus.records.empty() || corpus.completion_tokens() == 0)
    fail(ErrorCode::EmptyCorpus, "watermarked corpus holds no completions");
  if (corpus.provenance.vocab_hash != 0 &&
      corpus.provenance.vocab_hash != base->vocab().content_hash())
    fail(ErrorCode::VocabMismatch,
         "corpus was generated under a different vocabulary");
  if (!(mix >= 0.0 && mix <= 1.0))
    fail(ErrorCode::Validation, "distill.mix must lie in [0, 1]");

  auto student = std::make_shared<NGramModel>(
      base->vocab_ptr(), base->order(), base->smoothing());
  for (const auto& rec : corpus.records) {
    TokenSeq full = rec.prompt;
    full.insert(full.end(), rec.completion.begin(), rec.completion.end());
    student->add_sequence(full, completions_only ? rec.prompt.size() : 0);
  }
  student->set_prior(base, mix);

  DistillationResult out;
  out.student = std::move(student);
  out.base = std::move(base);
  out.mix = mix;
  out.corpus_hash = corpus.content_hash();
  return out;
}

double median_lower(std::vector<double> values) {
  if (values.empty())
    fail(ErrorCode::EmptySequence, "median of an empty list");
  std::size_t idx = (values.size() - 1) / 2;
  std::nth_element(values.begin(), values.begin() + std::ptrdiff_t(idx),
                   values.end());
  return values[idx];
}

AggregateDetection score_model_emissions(const NGramModel& model,
                                         const WatermarkConfig& cfg,
                                         std::span<const TokenSeq> prompts,
                                         std::size_t n, std::size_t length,
                                         double temperature,
                                         std::uint64_t seed) {
  cfg.validate();
  if (n == 0 || length == 0 || prompts.empty())
    fail(ErrorCode::EmptyRequest, "emission scoring needs samples");
  AggregateDetection agg;
  agg.reports.reserve(n);
  std::vector<double> zs, ps;
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < n; ++i) {
    SplitMix64 rng(derive_seed(seed, "emission-sample", i));
    TokenSeq text = generate(model, prompts[i % prompts.size()], length,
                             GenerationHooks{}, temperature, rng);
    DetectionReport r = detect(text, cfg, model.vocab().size());
    zs.push_back(r.z);
    ps.push_back(r.p);
    if (r.watermarked) ++flagged;
    agg.reports.push_back(r);
  }
  agg.median_z = median_lower(zs);
  agg.median_p = median_lower(ps);
  agg.flagged_fraction = double(flagged) / double(n);
  return agg;
}

}  // namespace wmlab
