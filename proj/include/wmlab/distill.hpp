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

#ifndef WMLAB_DISTILL_HPP_
#define WMLAB_DISTILL_HPP_

#include <memory>
#include <span>
#include <vector>

#include "wmlab/ngram.hpp"
#include "wmlab/watermark.hpp"

namespace wmlab {

/// Everything needed to reproduce or audit a generated dataset, minus the
/// key itself (only its salted fingerprint is kept).
struct CorpusProvenance {
  std::uint64_t vocab_hash = 0;
  std::uint64_t teacher_hash = 0;
  Scheme scheme = Scheme::kGreenList;
  double gamma = 0.5;
  double delta = 3.0;
  std::size_t context_width = 1;
  std::size_t tournament_depth = 4;
  std::uint64_t key_fingerprint = 0;
  std::uint64_t prompt_set_hash = 0;
  double temperature = 1.0;
  std::uint64_t seed = 0;
};

struct WatermarkedRecord {
  TokenSeq prompt;
  TokenSeq completion;
  /// Per completion token: green flag (0/1) under the green-list scheme, or
  /// the favourable-bit count (0..depth) under the tournament scheme.
  /// Recomputed by replay, never captured during sampling, so it stays valid
  /// for any record regardless of how it was produced.
  std::vector<std::uint8_t> marks;
};

struct WatermarkedCorpus {
  std::vector<WatermarkedRecord> records;
  CorpusProvenance provenance;

  std::size_t completion_tokens() const;
  std::uint64_t content_hash() const;
};

/// Fills in record.marks by replaying the detector's per-token decision for
/// every completion position of every record.
void annotate_marks(WatermarkedCorpus& corpus, const WatermarkConfig& cfg,
                    std::size_t vocab_size);

/// Samples n watermarked completions of the given length from the teacher,
/// cycling through the prompt pool. Per-record seeds are derived from `seed`,
/// so any subset of records is reproducible in isolation.
/// Error(EmptyRequest) when n or length is zero or no prompts are given.
WatermarkedCorpus generate_dataset(const NGramModel& teacher,
                                   const WatermarkConfig& cfg,
                                   std::span<const TokenSeq> prompts,
                                   std::size_t n, std::size_t length,
                                   double temperature, std::uint64_t seed);

struct DistillationResult {
  ModelPtr student;
  ModelPtr base;
  double mix = 0.0;
  std::uint64_t corpus_hash = 0;
};

/// Re-trains a model of the base's order on the watermarked corpus and
/// anchors it to the base with the given mixture weight. With
/// completions_only (the default) prompt tokens are conditioned on but never
/// predicted, mirroring completion-masked fine-tuning.
DistillationResult fit_student(ModelPtr base, const WatermarkedCorpus& corpus,
                               double mix, bool completions_only = true);

struct AggregateDetection {
  std::vector<DetectionReport> reports;
  double median_z = 0.0;
  double median_p = 1.0;
  /// Fraction of reports crossing the fixed z >= 4 verdict line.
  double flagged_fraction = 0.0;
};

/// Lower median: for an even count the smaller of the two central order
/// statistics, so the reported value is always one actually observed.
double median_lower(std::vector<double> values);

/// Samples fresh, hook-free text from a model and runs the watermark
/// detector on every sample: the direct measurement of how much watermark
/// the model has absorbed.
AggregateDetection score_model_emissions(const NGramModel& model,
                                         const WatermarkConfig& cfg,
                                         std::span<const TokenSeq> prompts,
                                         std::size_t n, std::size_t length,
                                         double temperature,
                                         std::uint64_t seed);

}  // namespace wmlab

#endif  // WMLAB_DISTILL_HPP_
