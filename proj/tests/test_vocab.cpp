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

#include <string>
#include <vector>

#include "wmlab/vocab.hpp"

using namespace wmlab;

TEST_CASE("small whitespace corpus builds the exact expected table") {
  const Vocabulary v = Vocabulary::build("a b a", TokenizerMode::kWhitespace, 10);
  CHECK(v.size() == 4);
  CHECK(v.text(Vocabulary::kBosId) == Vocabulary::kBosText);
  CHECK(v.text(Vocabulary::kUnkId) == Vocabulary::kUnkText);
  CHECK(v.find("a").has_value());
  CHECK(v.find("b").has_value());
  // "a" occurs twice, "b" once, so "a" gets the lower id.
  CHECK(*v.find("a") < *v.find("b"));

  const Vocabulary again =
      Vocabulary::build("a b a", TokenizerMode::kWhitespace, 10);
  CHECK(again.content_hash() == v.content_hash());
  CHECK(*again.find("a") == *v.find("a"));
}

TEST_CASE("empty corpus is rejected") {
  CHECK_THROWS_AS(Vocabulary::build("", TokenizerMode::kWhitespace, 10), Error);
  try {
    Vocabulary::build("  \n \t ", TokenizerMode::kWhitespace, 10);
    FAIL("whitespace-only corpus accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyCorpus);
  }
}

TEST_CASE("encode maps known tokens and falls back to unk") {
  const Vocabulary v = Vocabulary::build("a b a", TokenizerMode::kWhitespace, 10);
  const TokenSeq ab = v.encode("a b");
  REQUIRE(ab.size() == 2);
  CHECK(ab[0] == *v.find("a"));
  CHECK(ab[1] == *v.find("b"));

  const TokenSeq az = v.encode("a z");
  REQUIRE(az.size() == 2);
  CHECK(az[0] == *v.find("a"));
  CHECK(az[1] == Vocabulary::kUnkId);

  CHECK(v.encode("").empty());
}

TEST_CASE("decode inverts encode up to whitespace normalisation") {
  const Vocabulary v =
      Vocabulary::build("one two three", TokenizerMode::kWhitespace, 10);
  CHECK(v.decode(v.encode("two  three\tone")) == "two three one");
  CHECK(v.decode(v.encode("")).empty());
}

TEST_CASE("frequency ranking with lexicographic tie-break") {
  // c appears three times; a and b twice each, so the tie goes to "a".
  const Vocabulary v =
      Vocabulary::build("c b a c a b c", TokenizerMode::kWhitespace, 2);
  CHECK(v.size() == 4);
  CHECK(v.find("c").has_value());
  CHECK(v.find("a").has_value());
  CHECK(!v.find("b").has_value());
  CHECK(v.id_or_unk("b") == Vocabulary::kUnkId);
}

TEST_CASE("character mode splits code points, byte mode splits bytes") {
  const Vocabulary ch = Vocabulary::build("ab", TokenizerMode::kCharacter, 10);
  CHECK(ch.encode("ba").size() == 2);
  CHECK(ch.decode(ch.encode("ab")) == "ab");

  // A two-byte UTF-8 sequence is one character token but two byte tokens.
  CHECK(split_text("\xc3\xa9", TokenizerMode::kCharacter).size() == 1);
  CHECK(split_text("\xc3\xa9", TokenizerMode::kByte).size() == 2);
}

TEST_CASE("from_tokens restores a table and rejects bad lists") {
  const Vocabulary v = Vocabulary::build("a b a", TokenizerMode::kWhitespace, 10);
  std::vector<std::string> tail;
  for (TokenId id = 2; id < v.size(); ++id) tail.push_back(v.text(id));
  const Vocabulary restored =
      Vocabulary::from_tokens(tail, TokenizerMode::kWhitespace);
  CHECK(restored.content_hash() == v.content_hash());

  CHECK_THROWS_AS(
      Vocabulary::from_tokens({"x", "x"}, TokenizerMode::kWhitespace), Error);
  CHECK_THROWS_AS(Vocabulary::from_tokens({Vocabulary::kBosText},
                                          TokenizerMode::kWhitespace),
                  Error);
}

TEST_CASE("content hash covers tokenizer mode") {
  const Vocabulary a = Vocabulary::build("x y", TokenizerMode::kWhitespace, 10);
  const Vocabulary b = Vocabulary::build("x y", TokenizerMode::kByte, 10);
  CHECK(a.content_hash() != b.content_hash());
}
