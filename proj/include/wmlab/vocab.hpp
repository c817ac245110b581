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

#ifndef WMLAB_VOCAB_HPP_
#define WMLAB_VOCAB_HPP_

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "wmlab/common.hpp"

namespace wmlab {

enum class TokenizerMode { kWhitespace, kCharacter, kByte };

const char* tokenizer_mode_name(TokenizerMode mode);
std::optional<TokenizerMode> tokenizer_mode_from_name(std::string_view name);

/// Splits raw text into surface tokens without any vocabulary mapping.
/// Whitespace mode splits on runs of blanks, character mode yields one token
/// per UTF-8 code point (an invalid byte stands alone), byte mode yields one
/// token per byte.
std::vector<std::string> split_text(std::string_view text, TokenizerMode mode);

/// Frozen token table. Ids 0 and 1 are reserved for the sentinel tokens and
/// every remaining id maps to one surface string. Instances are immutable
/// after construction.
class Vocabulary {
 public:
  static constexpr TokenId kBosId = 0;
  static constexpr TokenId kUnkId = 1;
  static constexpr const char* kBosText = "<s>";
  static constexpr const char* kUnkText = "<unk>";

  /// Builds a table from the max_size most frequent surface tokens of the
  /// corpus (ties broken lexicographically). Surface forms that collide with
  /// the sentinel strings are dropped. Throws Error(EmptyCorpus) when the
  /// corpus yields no tokens at all.
  static Vocabulary build(std::string_view corpus, TokenizerMode mode,
                          std::size_t max_size);

  /// Reassembles a table from an explicit token list (ids 2.. in order), as
  /// stored on disk. The list must be free of duplicates and sentinels.
  static Vocabulary from_tokens(std::vector<std::string> tokens,
                                TokenizerMode mode);

  std::size_t size() const { return tokens_.size(); }
  TokenizerMode mode() const { return mode_; }
  const std::string& text(TokenId id) const;
  std::optional<TokenId> find(std::string_view token) const;
  TokenId id_or_unk(std::string_view token) const;

  /// Content hash over mode and token list; used to detect artifact
  /// mismatches when models and tables are re-loaded independently.
  std::uint64_t content_hash() const { return hash_; }

  /// Maps text to ids, unknown surface forms becoming the unk id. Tokenizing
  /// empty text yields an empty sequence; no sentinel padding is added here.
  TokenSeq encode(std::string_view text) const;

  /// Inverse of encode up to whitespace normalisation: whitespace mode joins
  /// tokens with single blanks, the other modes concatenate.
  std::string decode(std::span<const TokenId> ids) const;

 private:
  Vocabulary() = default;
  void finish();  // builds index + hash

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  TokenizerMode mode_ = TokenizerMode::kWhitespace;
  std::uint64_t hash_ = 0;
};

using VocabPtr = std::shared_ptr<const Vocabulary>;

}  // namespace wmlab

#endif  // WMLAB_VOCAB_HPP_
