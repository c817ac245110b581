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

#ifndef WMLAB_COMMON_HPP_
#define WMLAB_COMMON_HPP_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace wmlab {

inline constexpr const char* kToolVersion = "0.1.0";

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;
using LogitVector = std::vector<double>;

enum class ErrorCode {
  EmptyCorpus,
  CorpusTooSmall,
  EmptySequence,
  EmptyRequest,
  InvalidLogits,
  NoScorableTokens,
  VocabMismatch,
  InsufficientSupport,
  Validation,
  Format,
  Io,
};

/// All library failures are reported through this exception. The code is the
/// stable, machine-checkable part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

// ---------------------------------------------------------------------------
// Keyed hashing.
//
// One fixed 64-bit avalanche construction is used for every pseudorandom
// decision in the toolkit (green partitions, tournament bits, seed
// derivation, file content hashes). It is fully specified here so that an
// implementation in any language reproduces the same partitions bit for bit:
//
//   mix64(z):  z += 0x9e3779b97f4a7c15
//              z  = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
//              z  = (z ^ (z >> 27)) * 0x94d049bb133111eb
//              return z ^ (z >> 31)
//
//   a stream folds words as  h = mix64(h ^ word), starting from h = seed.
// ---------------------------------------------------------------------------

inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class HashStream {
 public:
  explicit HashStream(std::uint64_t seed = 0) : h_(mix64(seed)) {}
  HashStream& fold(std::uint64_t w) {
    h_ = mix64(h_ ^ w);
    return *this;
  }
  HashStream& fold_bytes(std::string_view bytes) {
    std::uint64_t acc = 0;
    int n = 0;
    for (unsigned char c : bytes) {
      acc |= std::uint64_t(c) << (8 * n);
      if (++n == 8) {
        fold(acc);
        acc = 0;
        n = 0;
      }
    }
    // Length fold keeps "ab","c" distinct from "a","bc".
    fold(acc);
    fold(bytes.size());
    return *this;
  }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_;
};

inline std::uint64_t hash_bytes(std::string_view bytes, std::uint64_t seed = 0) {
  return HashStream(seed).fold_bytes(bytes).digest();
}

/// splitmix64 sequence generator. The standard library distributions are not
/// portable across implementations, so all sampling goes through this engine
/// and the explicit constructions below.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix64_raw(state_);
  }
  /// Uniform draw in [0, 1) with 53 bits of precision.
  double next_double() { return double(next() >> 11) * 0x1.0p-53; }
  /// Uniform draw in [0, n). Modulo construction; the bias is ~n/2^64.
  std::uint64_t next_below(std::uint64_t n) { return next() % n; }

 private:
  static std::uint64_t mix64_raw(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  std::uint64_t state_;
};

/// Deterministic per-task seed derivation: every stage of a pipeline draws
/// its seed as derive_seed(master, "stage-tag", index), so stages can run in
/// any order or in parallel without changing results.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::uint64_t index = 0) {
  return HashStream(master).fold_bytes(tag).fold(index).digest();
}

/// Shortest text form that parses back to the identical double ("%.17g").
std::string format_double(double v);

inline std::string to_hex(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[std::size_t(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

std::uint64_t parse_hex64(std::string_view s);  // throws Error(Validation)

}  // namespace wmlab

#endif  // WMLAB_COMMON_HPP_
