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

#include "wmlab/corpusgen.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace wmlab {

void SynthParams::validate() const {
  if (n_words < 2)
    fail(ErrorCode::Validation, "synth corpus needs at least 2 words");
  if (n_lines < 1)
    fail(ErrorCode::Validation, "synth corpus needs at least 1 line");
  if (!(zipf_exponent >= 0.0) || !std::isfinite(zipf_exponent))
    fail(ErrorCode::Validation, "zipf_exponent must be finite and >= 0");
  if (topics < 1) fail(ErrorCode::Validation, "topics must be >= 1");
  if (!(affinity >= 1.0) || !std::isfinite(affinity))
    fail(ErrorCode::Validation, "affinity must be finite and >= 1");
  if (min_line_words < 2 || max_line_words < min_line_words)
    fail(ErrorCode::Validation, "line length bounds are inconsistent");
}

std::string synth_word(std::size_t index, std::size_t n_words) {
  static const char* kSyllables[] = {"ba", "de", "ki", "lo", "mu", "na", "po",
                                     "ra", "su", "ta", "ve", "wi", "zo", "fe",
                                     "gu", "hi", "ja", "ke", "li", "mo"};
  constexpr std::size_t kBase = sizeof(kSyllables) / sizeof(kSyllables[0]);
  std::size_t width = 1, span = kBase;
  while (span < n_words) {
    ++width;
    span *= kBase;
  }
  std::string word;
  for (std::size_t d = 0; d < width; ++d) {
    word.insert(0, kSyllables[index % kBase]);
    index /= kBase;
  }
  return word;
}

std::string synth_corpus(const SynthParams& params) {
  params.validate();
  const std::size_t n = params.n_words;
  const std::size_t t = params.topics;

  std::vector<double> zipf(n);
  for (std::size_t i = 0; i < n; ++i)
    zipf[i] = 1.0 / std::pow(double(i + 1), params.zipf_exponent);

  // One cumulative table per topic state plus a neutral one for line starts.
  // A word's topic is its index modulo the topic count; the current topic
  // boosts its own words and the next topic's, which gives bigrams and
  // trigrams real structure without hiding the Zipf profile.
  auto build_cdf = [&](std::size_t topic, bool neutral) {
    std::vector<double> cdf(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double w = zipf[i];
      if (!neutral) {
        const std::size_t wt = i % t;
        if (wt == topic || wt == (topic + 1) % t) w *= params.affinity;
      }
      acc += w;
      cdf[i] = acc;
    }
    return cdf;
  };
  std::vector<std::vector<double>> topic_cdf(t);
  for (std::size_t k = 0; k < t; ++k) topic_cdf[k] = build_cdf(k, false);
  const std::vector<double> neutral_cdf = build_cdf(0, true);

  auto draw = [](const std::vector<double>& cdf, SplitMix64& rng) {
    const double target = rng.next_double() * cdf.back();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
    if (it == cdf.end()) --it;
    return std::size_t(it - cdf.begin());
  };

  std::vector<std::string> words(n);
  for (std::size_t i = 0; i < n; ++i) words[i] = synth_word(i, n);

  std::string out;
  const std::size_t spread = params.max_line_words - params.min_line_words + 1;
  for (std::size_t line = 0; line < params.n_lines; ++line) {
    SplitMix64 rng(derive_seed(params.seed, "synth-line", line));
    const std::size_t len =
        params.min_line_words + std::size_t(rng.next_below(spread));
    std::size_t word = draw(neutral_cdf, rng);
    out += words[word];
    for (std::size_t i = 1; i < len; ++i) {
      word = draw(topic_cdf[word % t], rng);
      out += ' ';
      out += words[word];
    }
    out += '\n';
  }
  return out;
}

}  // namespace wmlab
