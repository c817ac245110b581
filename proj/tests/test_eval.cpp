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

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "wmlab/corpusgen.hpp"
#include "wmlab/eval.hpp"

using namespace wmlab;

namespace {

std::vector<double> iota_scores(std::size_t n) {
  std::vector<double> v(n);
  std::iota(v.begin(), v.end(), 1.0);
  return v;
}

std::vector<double> normal_sample(std::size_t n, double shift,
                                  std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<double> out;
  out.reserve(n);
  while (out.size() < n) {
    const double u1 = 1.0 - rng.next_double();
    const double u2 = rng.next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    out.push_back(r * std::cos(2.0 * 3.14159265358979323846 * u2) + shift);
    if (out.size() < n)
      out.push_back(r * std::sin(2.0 * 3.14159265358979323846 * u2) + shift);
  }
  return out;
}

// Exhaustive-search oracle for the higher-interpolation quantile: try every
// observed score as a candidate threshold, smallest one wins.
double threshold_oracle(std::vector<double> scores, double fpr) {
  std::sort(scores.begin(), scores.end());
  for (double candidate : scores) {
    std::size_t above = 0;
    for (double s : scores)
      if (s > candidate) ++above;
    if (double(above) / double(scores.size()) <= fpr) return candidate;
  }
  return scores.back();
}

ExperimentConfig tiny_config() {
  SynthParams params;
  params.n_words = 80;
  params.n_lines = 1500;
  params.zipf_exponent = 0.5;
  ExperimentConfig cfg;
  cfg.corpus_text = synth_corpus(params);
  cfg.max_vocab = 100;
  cfg.teacher_order = 2;
  cfg.student_order = 1;
  cfg.attack_order = 2;
  cfg.reference_order = 2;
  cfg.n_sequences = 200;
  cfg.distill_length = 32;
  cfg.n_positive = 30;
  cfg.n_null = 60;
  cfg.eval_length = 80;
  cfg.seed = 4242;
  return cfg;
}

const MetricsRow& row_labelled(const MetricsReport& report,
                               const std::string& label, double alpha = -1.0) {
  for (const auto& r : report.rows) {
    if (r.label != label) continue;
    if (alpha >= 0.0 && (!r.has_alpha || r.alpha != alpha)) continue;
    return r;
  }
  REQUIRE(false);
  return report.rows.front();
}

}  // namespace

TEST_CASE("threshold calibration on a 1..100 grid") {
  const auto scores = iota_scores(100);
  CHECK(calibrate_threshold(scores, 0.10) == 90.0);
  CHECK(calibrate_threshold(scores, 1.0) == 1.0);
  CHECK(calibrate_threshold(scores, 0.0) ==
        std::numeric_limits<double>::infinity());
  try {
    calibrate_threshold({}, 0.1);
    FAIL("empty score list accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyRequest);
  }
  CHECK_THROWS_AS(calibrate_threshold(scores, -0.1), Error);
  CHECK_THROWS_AS(calibrate_threshold(scores, 1.1), Error);
}

TEST_CASE("threshold calibration matches the exhaustive oracle") {
  SplitMix64 rng(814);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<double> scores(1 + rng.next_below(40));
    for (auto& s : scores) s = std::floor(rng.next_double() * 10.0);
    const double fpr = rng.next_double();
    CHECK(calibrate_threshold(scores, fpr) == threshold_oracle(scores, fpr));
  }
}

TEST_CASE("thresholds never rise as the allowed false-positive rate grows") {
  const auto scores = normal_sample(500, 0.0, 31);
  double prev = std::numeric_limits<double>::infinity();
  for (double fpr : {0.001, 0.01, 0.05, 0.10, 0.5, 1.0}) {
    const double t = calibrate_threshold(scores, fpr);
    CHECK(t <= prev);
    prev = t;
  }
}

TEST_CASE("paired score lists reproduce the nominal rates exactly") {
  const auto scores = iota_scores(100);
  const std::vector<double> levels = {0.10, 0.01};
  const auto tpr = tpr_at_fpr(scores, scores, levels);
  CHECK(tpr.at(0.10) == 0.10);
  CHECK(tpr.at(0.01) == 0.01);
}

TEST_CASE("independent same-distribution scores self-calibrate") {
  const std::size_t n = 5000;
  const auto nulls = normal_sample(n, 0.0, 101);
  const auto positives = normal_sample(n, 0.0, 202);
  const std::vector<double> levels = {0.10, 0.01, 0.001};
  const auto tpr = tpr_at_fpr(positives, nulls, levels);
  for (double fpr : levels) {
    const double sigma = std::sqrt(fpr * (1.0 - fpr) / double(n));
    CHECK(std::abs(tpr.at(fpr) - fpr) <= 3.0 * sigma + 1.0 / double(n));
  }
}

TEST_CASE("overwhelming positives saturate every level") {
  const auto nulls = iota_scores(200);
  const std::vector<double> positives(50, 201.0);
  const std::vector<double> levels = {0.10, 0.01, 0.001};
  const auto tpr = tpr_at_fpr(positives, nulls, levels);
  for (double fpr : levels) CHECK(tpr.at(fpr) == 1.0);
}

TEST_CASE("detection rates are monotone across levels") {
  SplitMix64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    auto nulls = normal_sample(300, 0.0, 1000 + std::uint64_t(trial));
    auto positives = normal_sample(200, 1.0, 2000 + std::uint64_t(trial));
    const std::vector<double> levels = {0.10, 0.01, 0.001};
    const auto tpr = tpr_at_fpr(positives, nulls, levels);
    CHECK(tpr.at(0.001) <= tpr.at(0.01));
    CHECK(tpr.at(0.01) <= tpr.at(0.10));
  }
}

TEST_CASE("median p-value reduces to the lower median of report fields") {
  const auto with_p = [](double p) {
    DetectionReport r;
    r.p = p;
    return r;
  };
  const std::vector<DetectionReport> single = {with_p(0.5)};
  CHECK(median_p(single) == 0.5);
  const std::vector<DetectionReport> three = {with_p(0.1), with_p(0.3),
                                              with_p(0.2)};
  CHECK(median_p(three) == 0.2);
  try {
    median_p({});
    FAIL("empty report list accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyRequest);
  }

  SplitMix64 rng(55);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<DetectionReport> reports(1 + rng.next_below(20));
    std::vector<double> ps;
    for (auto& r : reports) {
      r.p = rng.next_double();
      ps.push_back(r.p);
    }
    std::sort(ps.begin(), ps.end());
    CHECK(median_p(reports) == ps[(ps.size() - 1) / 2]);
  }
}

TEST_CASE("rank correlation handles perfect orderings and ties") {
  const std::vector<double> up = {1.0, 2.0, 3.0, 4.0, 5.0};
  std::vector<double> down = up;
  std::reverse(down.begin(), down.end());
  CHECK(spearman(up, up) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(spearman(up, down) == doctest::Approx(-1.0).epsilon(1e-12));

  // Monotone transforms leave the rank statistic untouched.
  std::vector<double> cubed;
  for (double x : up) cubed.push_back(x * x * x);
  CHECK(spearman(up, cubed) == doctest::Approx(1.0).epsilon(1e-12));

  // Average-rank tie handling, checked against the hand-computed value.
  const std::vector<double> tied = {1.0, 2.0, 2.0, 3.0};
  const std::vector<double> clean = {10.0, 20.0, 30.0, 40.0};
  CHECK(spearman(tied, clean) ==
        doctest::Approx(std::sqrt(0.9)).epsilon(1e-12));

  CHECK_THROWS_AS(spearman(up, std::vector<double>{1.0, 2.0}), Error);
  CHECK_THROWS_AS(spearman(std::vector<double>{1.0}, std::vector<double>{2.0}),
                  Error);
  const std::vector<double> flat = {3.0, 3.0, 3.0};
  const std::vector<double> vary = {1.0, 2.0, 3.0};
  CHECK_THROWS_AS(spearman(flat, vary), Error);
}

TEST_CASE("the KS statistic separates normal from shifted samples") {
  const auto centred = normal_sample(800, 0.0, 404);
  const auto shifted = normal_sample(800, 0.5, 405);
  const double d0 = ks_statistic_normal(centred);
  const double d1 = ks_statistic_normal(shifted);
  CHECK(d0 < ks_critical(0.01, 800));
  CHECK(d1 > ks_critical(0.01, 800));

  CHECK(ks_critical(0.05, 100) == doctest::Approx(0.135810).epsilon(1e-6));
  CHECK(ks_critical(0.01, 100) == doctest::Approx(0.162762).epsilon(1e-6));
  CHECK_THROWS_AS(ks_critical(0.2, 100), Error);
}

TEST_CASE("Wilson intervals bracket the observed proportion") {
  const auto [lo, hi] = wilson_interval(5, 10);
  CHECK(lo > 0.0);
  CHECK(hi < 1.0);
  CHECK(lo < 0.5);
  CHECK(hi > 0.5);
  CHECK(lo == doctest::Approx(0.2365931).epsilon(1e-6));
  CHECK(hi == doctest::Approx(0.7634069).epsilon(1e-6));

  const auto [zlo, zhi] = wilson_interval(0, 20);
  CHECK(zlo == 0.0);
  CHECK(zhi > 0.0);
  const auto [flo, fhi] = wilson_interval(20, 20);
  CHECK(fhi == 1.0);
  CHECK(flo < 1.0);
  CHECK_THROWS_AS(wilson_interval(1, 0), Error);
  CHECK_THROWS_AS(wilson_interval(5, 4), Error);
}

TEST_CASE("experiment configs validate counts and name bad keys") {
  ExperimentConfig cfg = tiny_config();
  cfg.alphas.clear();
  try {
    cfg.validate();
    FAIL("empty alpha list accepted");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("alpha") != std::string::npos);
  }
  cfg = tiny_config();
  cfg.watermark.gamma = 1.5;
  try {
    cfg.validate();
    FAIL("gamma 1.5 accepted");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("gamma") != std::string::npos);
  }
  cfg = tiny_config();
  cfg.n_positive = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("the pipeline is deterministic end to end") {
  const ExperimentConfig cfg = tiny_config();
  const MetricsReport a = run_pipeline(cfg);
  const MetricsReport b = run_pipeline(cfg);
  CHECK(a.to_json().dump(2) == b.to_json().dump(2));

  // A different master seed must actually change the outcome.
  ExperimentConfig reseeded = tiny_config();
  reseeded.seed = 999;
  const MetricsReport c = run_pipeline(reseeded);
  CHECK(a.to_json().dump(2) != c.to_json().dump(2));
}

TEST_CASE("a single-alpha sweep is exactly the plain pipeline") {
  const ExperimentConfig cfg = tiny_config();
  const MetricsReport plain = run_pipeline(cfg);
  const std::vector<double> alphas = cfg.alphas;
  const MetricsReport swept = alpha_sweep(cfg, alphas);
  CHECK(plain.to_json().dump(2) == swept.to_json().dump(2));
}

TEST_CASE("pipeline reports carry the documented structure") {
  const ExperimentConfig cfg = tiny_config();
  const PipelineResult result = run_pipeline_full(cfg);
  const MetricsReport& report = result.report;

  CHECK(report.scheme == "greenlist");
  CHECK(report.seed == cfg.seed);
  CHECK(report.z_threshold == cfg.z_threshold);
  CHECK(report.calibration.size() == 3);

  REQUIRE(report.rows.size() == 3 + cfg.alphas.size());
  CHECK(report.rows[0].label == "null");
  CHECK(report.rows[1].label == "teacher");
  CHECK(report.rows[2].label == "student");
  CHECK(report.rows[3].label == "spoof");
  CHECK(report.rows[3].has_alpha);
  CHECK(report.rows[3].alpha == 4.5);
  for (const auto& row : report.rows) {
    CHECK(row.tpr01 <= row.tpr1);
    CHECK(row.tpr1 <= row.tpr10);
    CHECK(row.median_p_value > 0.0);
    CHECK(row.median_p_value <= 1.0);
  }

  // The evaluation nulls are fresh attack-model text, not training data.
  CHECK(result.nulls.samples.size() == cfg.n_null);
  CHECK(result.dataset.records.size() == cfg.n_sequences);
  const auto& teacher_row = row_labelled(report, "teacher");
  CHECK(teacher_row.n_texts == cfg.n_positive);
}

TEST_CASE("a watermark-free teacher leaves spoofing at chance level") {
  ExperimentConfig cfg = tiny_config();
  cfg.watermark.delta = 0.0;
  cfg.n_positive = 100;
  cfg.n_null = 400;
  cfg.n_sequences = 400;
  cfg.seed = 606;
  const MetricsReport report = run_pipeline(cfg);
  const auto& spoof = row_labelled(report, "spoof", 4.5);
  CHECK(spoof.tpr10 >= 0.05);
  CHECK(spoof.tpr10 <= 0.15);
}

TEST_CASE("spoofing strength pays off across a sweep") {
  SynthParams params;
  params.n_words = 300;
  params.n_lines = 20000;
  params.zipf_exponent = 0.3;
  ExperimentConfig cfg;
  cfg.corpus_text = synth_corpus(params);
  cfg.max_vocab = 400;
  cfg.teacher_order = 3;
  cfg.student_order = 1;
  cfg.attack_order = 2;
  cfg.reference_order = 2;
  cfg.n_sequences = 3000;
  cfg.distill_length = 48;
  cfg.n_positive = 60;
  cfg.n_null = 200;
  cfg.eval_length = 150;
  cfg.seed = 1234;

  const std::vector<double> alphas = {2.5, 4.5, 5.0};
  const MetricsReport report = alpha_sweep(cfg, alphas);

  const auto& mid = row_labelled(report, "spoof", 4.5);
  CHECK(mid.tpr1 >= 0.8);
  CHECK(row_labelled(report, "spoof", 5.0).median_p_value <=
        row_labelled(report, "spoof", 2.5).median_p_value);

  // Stealth: spoofed text stays within 2x of the attack model's own
  // perplexity under the independent reference model.
  const auto& nulls = row_labelled(report, "null");
  for (double a : alphas)
    CHECK(row_labelled(report, "spoof", a).median_perplexity <=
          2.0 * nulls.median_perplexity);
}
