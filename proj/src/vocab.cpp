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

#include "wmlab/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <map>

namespace wmlab {

const char* tokenizer_mode_name(TokenizerMode mode) {
  switch (mode) {
    case TokenizerMode::kWhitespace:
      return "whitespace";
    case TokenizerMode::kCharacter:
      return "character";
    case TokenizerMode::kByte:
      return "byte";
  }
  return "?";
}

std::optional<TokenizerMode> tokenizer_mode_from_name(std::string_view name) {
  if (name == "whitespace") return TokenizerMode::kWhitespace;
  if (name == "character") return TokenizerMode::kCharacter;
  if (name == "byte") return TokenizerMode::kByte;
  return std::nullopt;
}

static std::size_t utf8_len(unsigned char lead) {
  if (lead < 0x80) return 1;
  if ((lead >> 5) == 0x6) return 2;
  if ((lead >> 4) == 0xe) return 3;
  if ((lead >> 3) == 0x1e) return 4;
  return 0;  // continuation or invalid lead byte
}

std::vector<std::string> split_text(std::string_view text, TokenizerMode mode) {
  std::vector<std::string> out;
  switch (mode) {
    case TokenizerMode::kWhitespace: {
      std::size_t i = 0;
      while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) out.emplace_back(text.substr(start, i - start));
      }
      break;
    }
    case TokenizerMode::kCharacter: {
      std::size_t i = 0;
      while (i < text.size()) {
        std::size_t n = utf8_len(static_cast<unsigned char>(text[i]));
        if (n == 0 || i + n > text.size()) n = 1;
        // A multi-byte sequence with a broken continuation byte falls back
        // to a single-byte token.
        for (std::size_t j = 1; j < n; ++j) {
          if ((static_cast<unsigned char>(text[i + j]) >> 6) != 0x2) {
            n = 1;
            break;
          }
        }
        out.emplace_back(text.substr(i, n));
        i += n;
      }
      break;
    }
    case TokenizerMode::kByte: {
      out.reserve(text.size());
      for (char c : text) out.emplace_back(1, c);
      break;
    }
  }
  return out;
}

Vocabulary Vocabulary::build(std::string_view corpus, TokenizerMode mode,
                             std::size_t max_size) {
  std::vector<std::string> surface = split_text(corpus, mode);
  if (surface.empty())
    fail(ErrorCode::EmptyCorpus, "cannot build a vocabulary from empty text");

  std::unordered_map<std::string, std::uint64_t> freq;
  for (auto& t : surface) {
    if (t == kBosText || t == kUnkText) continue;
    ++freq[t];
  }
  if (freq.empty())
    fail(ErrorCode::EmptyCorpus,
         "corpus contains only reserved sentinel strings");

  std::vector<std::pair<std::string, std::uint64_t>> ranked(freq.begin(),
                                                            freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_size) ranked.resize(max_size);

  std::vector<std::string> kept;
  kept.reserve(ranked.size());
  for (auto& [tok, n] : ranked) kept.push_back(tok);
  return from_tokens(std::move(kept), mode);
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens,
                                   TokenizerMode mode) {
  Vocabulary v;
  v.mode_ = mode;
  v.tokens_.reserve(tokens.size() + 2);
  v.tokens_.push_back(kBosText);
  v.tokens_.push_back(kUnkText);
  for (auto& t : tokens) {
    if (t == kBosText || t == kUnkText)
      fail(ErrorCode::Format, "token list contains a reserved sentinel");
    v.tokens_.push_back(std::move(t));
  }
  v.finish();
  return v;
}

void Vocabulary::finish() {
  index_.reserve(tokens_.size());
  for (TokenId id = 0; id < tokens_.size(); ++id) {
    if (!index_.emplace(tokens_[id], id).second)
      fail(ErrorCode::Format, "duplicate token in vocabulary: " + tokens_[id]);
  }
  HashStream h;
  h.fold_bytes(tokenizer_mode_name(mode_));
  h.fold(tokens_.size());
  for (const auto& t : tokens_) h.fold_bytes(t);
  hash_ = h.digest();
}

const std::string& Vocabulary::text(TokenId id) const {
  if (id >= tokens_.size())
    fail(ErrorCode::Validation, "token id out of range");
  return tokens_[id];
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id_or_unk(std::string_view token) const {
  auto id = find(token);
  return id ? *id : kUnkId;
}

TokenSeq Vocabulary::encode(std::string_view text) const {
  TokenSeq out;
  for (const auto& t : split_text(text, mode_)) out.push_back(id_or_unk(t));
  return out;
}

std::string Vocabulary::decode(std::span<const TokenId> ids) const {
  std::string out;
  bool first = true;
  for (TokenId id : ids) {
    if (mode_ == TokenizerMode::kWhitespace && !first) out += ' ';
    out += text(id);
    first = false;
  }
  return out;
}

}  // namespace wmlab
