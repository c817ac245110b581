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

#include "wmlab/spoof.hpp"

#include <cmath>

namespace wmlab {

namespace {

void check_alpha(double alpha) {
  if (!std::isfinite(alpha) || alpha < 0.0)
    fail(ErrorCode::Validation, "alpha must be finite and >= 0");
}

}  // namespace

LogitVector spoof_transform(LogitVector logits, const EwsTable& table,
                            std::span<const TokenId> context, double alpha) {
  check_alpha(alpha);
  if (logits.size() != table.vocab_size())
    fail(ErrorCode::VocabMismatch,
         "logit vector does not match the table's vocabulary size");
  if (alpha == 0.0) return logits;
  LogitVector signal = table.lookup(context);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    logits[i] += alpha * signal[i];
    if (!std::isfinite(logits[i]))
      fail(ErrorCode::InvalidLogits,
           "injection produced a non-finite logit");
  }
  return logits;
}

LogitTransform make_spoof_transform(const EwsTable& table, double alpha) {
  check_alpha(alpha);
  return [&table, alpha](std::span<const TokenId> ctx, LogitVector& logits) {
    logits = spoof_transform(std::move(logits), table, ctx, alpha);
  };
}

TokenSeq spoof_generate(const NGramModel& attack, const EwsTable& table,
                        double alpha, std::span<const TokenId> prompt,
                        std::size_t length, double temperature,
                        SplitMix64& rng) {
  if (attack.vocab().content_hash() != table.vocab_hash())
    fail(ErrorCode::VocabMismatch,
         "attack model and signal table use different vocabularies");
  GenerationHooks hooks;
  hooks.transform = make_spoof_transform(table, alpha);
  return generate(attack, prompt, length, hooks, temperature, rng);
}

}  // namespace wmlab
