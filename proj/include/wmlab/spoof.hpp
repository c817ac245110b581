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

#ifndef WMLAB_SPOOF_HPP_
#define WMLAB_SPOOF_HPP_

#include "wmlab/extract.hpp"
#include "wmlab/ngram.hpp"

namespace wmlab {

/// Adds alpha times the extracted signal for `context` onto the logits.
/// With alpha = 0 the logits come back bit-identical. The injection needs no
/// knowledge of any watermark scheme or key; everything it knows is in the
/// table.
LogitVector spoof_transform(LogitVector logits, const EwsTable& table,
                            std::span<const TokenId> context, double alpha);

/// Generation hook version of the same injection.
LogitTransform make_spoof_transform(const EwsTable& table, double alpha);

/// Samples text from the attack model with the injection applied at every
/// step. The attack model must share the vocabulary the table was extracted
/// under (Error(VocabMismatch) otherwise).
TokenSeq spoof_generate(const NGramModel& attack, const EwsTable& table,
                        double alpha, std::span<const TokenId> prompt,
                        std::size_t length, double temperature,
                        SplitMix64& rng);

}  // namespace wmlab

#endif  // WMLAB_SPOOF_HPP_
