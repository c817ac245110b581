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

#ifndef WMLAB_CORPUSGEN_HPP_
#define WMLAB_CORPUSGEN_HPP_

#include <string>

#include "wmlab/common.hpp"

namespace wmlab {

/// Knobs for the synthetic demo corpus: pronounceable nonsense words with a
/// Zipf-like frequency profile and a soft topic structure, so n-gram models
/// fitted on it have genuine low-order statistics to learn.
struct SynthParams {
  std::size_t n_words = 600;
  std::size_t n_lines = 30000;
  double zipf_exponent = 0.9;
  std::size_t topics = 8;
  double affinity = 4.0;  // weight boost for words near the current topic
  std::size_t min_line_words = 10;
  std::size_t max_line_words = 16;
  std::uint64_t seed = 7;

  void validate() const;
};

/// The i-th word of the synthetic lexicon; deterministic and all-distinct.
std::string synth_word(std::size_t index, std::size_t n_words);

/// Newline-separated corpus text generated from the parameters.
std::string synth_corpus(const SynthParams& params);

}  // namespace wmlab

#endif  // WMLAB_CORPUSGEN_HPP_
