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

#ifndef WMLAB_EVAL_HPP_
#define WMLAB_EVAL_HPP_

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "wmlab/distill.hpp"
#include "wmlab/extract.hpp"
#include "wmlab/ngram.hpp"
#include "wmlab/spoof.hpp"
#include "wmlab/watermark.hpp"

namespace wmlab {

/// Everything one experiment needs, with defaults chosen so an empty config
/// file runs the standard setup: green-list scheme, delta 3, gamma 0.5,
/// context width 1, alpha 4.5, verdict threshold z = 4.
struct ExperimentConfig {
  std::string corpus_path;
  std::string corpus_text;  // inline corpus; takes precedence over the path

  TokenizerMode tokenizer = TokenizerMode::kWhitespace;
  std::size_t max_vocab = 2000;
  std::size_t teacher_order = 3;
  std::size_t student_order = 2;
  std::size_t attack_order = 2;
  std::size_t reference_order = 2;
  double smoothing = 0.1;
  double temperature = 1.0;

  WatermarkConfig watermark;

  std::size_t n_sequences = 10000;  // records in the distillation dataset
  std::size_t distill_length = 64;  // completion tokens per record
  std::size_t prompt_length = 4;
  double mix = 0.3;                 // anchor weight toward the base model
  bool completions_only = true;

  EwsParams extract;

  std::vector<double> alphas{4.5};
  std::size_t n_positive = 100;
  std::size_t n_null = 500;
  std::size_t eval_length = 200;
  double z_threshold = 4.0;
  std::uint64_t seed = 1234;

  void validate() const;  // Error(Validation) naming the offending key
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// redact_key replaces the raw key with its salted fingerprint; every hash
  /// or report dump uses the redacted form so keys never leave the process.
  nlohmann::json to_json(bool redact_key) const;
  std::uint64_t content_hash() const;  // over the redacted canonical dump
};

// ---------------------------------------------------------------------------
// Detection-metric primitives.
// ---------------------------------------------------------------------------

/// Empirical (1 - fpr) quantile in the higher-interpolation convention: the
/// smallest null score such that the fraction of null scores strictly above
/// it does not exceed fpr. fpr = 0 returns +inf (nothing passes).
/// Error(EmptyRequest) on an empty list; Error(Validation) for fpr outside
/// [0, 1].
double calibrate_threshold(std::span<const double> null_scores, double fpr);

/// Fraction of positive scores strictly above the threshold calibrated for
/// each requested FPR level.
std::map<double, double> tpr_at_fpr(std::span<const double> positive_scores,
                                    std::span<const double> null_scores,
                                    std::span<const double> fpr_levels);

/// Lower median of the p fields of a report batch. Error(EmptyRequest).
double median_p(std::span<const DetectionReport> reports);

/// Spearman rank correlation with average ranks on ties.
/// Error(Validation) when the lists differ in size or hold fewer than two
/// points, or when either side is entirely tied.
double spearman(std::span<const double> x, std::span<const double> y);

/// Kolmogorov-Smirnov distance between a sample and the standard normal.
double ks_statistic_normal(std::vector<double> sample);

/// Large-sample KS critical value at significance alpha (supported levels:
/// 0.10, 0.05, 0.01).
double ks_critical(double alpha, std::size_t n);

/// 95% Wilson score interval for a binomial proportion.
std::pair<double, double> wilson_interval(std::uint64_t successes,
                                          std::uint64_t trials);

// ---------------------------------------------------------------------------
// Pipeline.
// ---------------------------------------------------------------------------

inline constexpr double kFprLevels[] = {0.10, 0.01, 0.001};

struct CalibrationRow {
  double fpr = 0.0;
  double threshold = 0.0;
  std::uint64_t null_above = 0;  // nulls strictly above the threshold
  bool underpowered = false;     // fewer than 1/fpr null samples
  double wilson_low = 0.0;       // 95% interval on the achieved FPR
  double wilson_high = 0.0;
};

struct MetricsRow {
  std::string label;     // "null", "teacher", "student", "spoof"
  bool has_alpha = false;
  double alpha = 0.0;
  std::size_t n_texts = 0;
  double tpr10 = 0.0;
  double tpr1 = 0.0;
  double tpr01 = 0.0;
  double median_p_value = 1.0;
  double median_z = 0.0;
  double median_perplexity = 0.0;
  double pass_rate = 0.0;  // fraction of texts at or above z_threshold
};

struct MetricsReport {
  std::string tool_version = kToolVersion;
  std::string scheme;
  std::string config_hash;  // hex, over the key-redacted config
  std::uint64_t seed = 0;
  double z_threshold = 4.0;
  std::vector<CalibrationRow> calibration;
  std::vector<MetricsRow> rows;

  nlohmann::json to_json() const;
  std::vector<nlohmann::json> rows_as_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

struct TextSample {
  TokenSeq tokens;
  DetectionReport detection;
  double perplexity = 0.0;
};

struct SampleSet {
  std::string label;
  bool has_alpha = false;
  double alpha = 0.0;
  std::vector<TextSample> samples;

  std::vector<double> z_values() const;
  std::vector<double> p_values() const;
  std::vector<double> perplexities() const;
};

/// Full pipeline state, kept so callers can interrogate any intermediate
/// stage (models, dataset, signal table, raw per-text detections).
struct PipelineResult {
  VocabPtr vocab;
  ModelPtr teacher;
  ModelPtr base;
  ModelPtr attack;
  ModelPtr reference;
  std::vector<TokenSeq> prompts;
  WatermarkedCorpus dataset;
  DistillationResult distilled;
  EwsTable ews;
  SampleSet nulls;                // attack model, alpha = 0
  std::vector<SampleSet> rows;    // teacher, student, one per alpha
  MetricsReport report;
};

/// Runs every stage: corpus sharding, model fits, watermarked dataset,
/// student distillation, signal extraction, spoofed generation at each
/// configured alpha, detection and metric assembly. Deterministic in
/// (config, seed).
PipelineResult run_pipeline_full(const ExperimentConfig& config);

MetricsReport run_pipeline(const ExperimentConfig& config);

/// run_pipeline with the alpha list replaced; all alphas share one
/// extraction.
MetricsReport alpha_sweep(const ExperimentConfig& config,
                          std::span<const double> alphas);

/// Writes report.json, report.csv and the two plot series
/// (alpha, median p) and (alpha, median perplexity) into the directory,
/// creating it if needed. Error(Io) with the offending path.
void emit_report(const MetricsReport& report, const std::string& directory);

}  // namespace wmlab

#endif  // WMLAB_EVAL_HPP_
