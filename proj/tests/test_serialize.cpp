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

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "wmlab/corpusgen.hpp"
#include "wmlab/serialize.hpp"

using namespace wmlab;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("wmlab-test-" + std::to_string(mix64(std::uintptr_t(this))));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

std::string slurp(const std::string& path) { return read_text_file(path); }

void flip_byte(const std::string& path, std::size_t offset) {
  std::string bytes = slurp(path);
  REQUIRE(offset < bytes.size());
  bytes[offset] = char(bytes[offset] ^ 0x5a);
  write_text_file(path, bytes);
}

struct Fixture {
  VocabPtr vocab;
  ModelPtr teacher;
  Fixture() {
    SynthParams params;
    params.n_words = 60;
    params.n_lines = 800;
    const std::string text = synth_corpus(params);
    vocab = std::make_shared<Vocabulary>(
        Vocabulary::build(text, TokenizerMode::kWhitespace, 80));
    teacher = std::make_shared<NGramModel>(
        NGramModel::fit(vocab, vocab->encode(text), 2, 0.1));
  }
};

}  // namespace

TEST_CASE("model files round-trip bitwise and replay identically") {
  Fixture fx;
  TempDir dir;
  const std::string path = dir.file("teacher.model");
  save_model(*fx.teacher, path);

  const NGramModel loaded = load_model(path);
  CHECK(loaded.content_hash() == fx.teacher->content_hash());

  SplitMix64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    TokenSeq ctx;
    for (std::size_t j = 0; j < rng.next_below(4); ++j)
      ctx.push_back(TokenId(rng.next_below(fx.vocab->size())));
    const LogitVector a = fx.teacher->logits(ctx);
    const LogitVector b = loaded.logits(ctx);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }

  // Saving is canonical: a reload writes the same bytes.
  const std::string copy = dir.file("teacher2.model");
  save_model(loaded, copy);
  CHECK(slurp(path) == slurp(copy));
}

TEST_CASE("model files reject tampering and wrong headers") {
  Fixture fx;
  TempDir dir;
  const std::string path = dir.file("teacher.model");
  save_model(*fx.teacher, path);

  flip_byte(path, slurp(path).size() / 2);
  try {
    load_model(path);
    FAIL("tampered model accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Format);
  }

  const std::string bogus = dir.file("bogus.model");
  write_text_file(bogus, "not a model file at all");
  try {
    load_model(bogus);
    FAIL("garbage accepted as a model");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Format);
  }

  try {
    load_model(dir.file("missing.model"));
    FAIL("missing file accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
  }
}

TEST_CASE("signal tables survive a save and load unchanged") {
  Fixture fx;
  const std::size_t v = fx.vocab->size();

  LogitVector global(v, 0.0);
  global[3] = 0.25;
  global[7] = -0.4;
  std::vector<std::vector<EwsTable::Entry>> entries(2);
  EwsTable::Entry one;
  one.window = {TokenId(5)};
  one.weight = 0.75;
  one.support = 6;
  one.values = {{TokenId(2), 0.9}, {TokenId(9), -0.3}};
  entries[0].push_back(one);
  EwsTable::Entry two;
  two.window = {TokenId(4), TokenId(5)};
  two.weight = 0.5;
  two.support = 3;
  two.values = {{TokenId(0), 1.1}};
  entries[1].push_back(two);
  EwsParams params;
  params.orders = {1, 2};
  const EwsTable table(params, v, fx.vocab->content_hash(), global, entries);

  TempDir dir;
  const std::string path = dir.file("signal.ews");
  save_ews(table, path);
  const EwsTable loaded = load_ews(path);

  CHECK(loaded.content_hash() == table.content_hash());
  SplitMix64 rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    TokenSeq ctx;
    for (std::size_t j = 0; j < rng.next_below(5); ++j)
      ctx.push_back(TokenId(rng.next_below(v)));
    const LogitVector a = table.lookup(ctx);
    const LogitVector b = loaded.lookup(ctx);
    for (std::size_t i = 0; i < v; ++i) CHECK(a[i] == b[i]);
  }

  const std::string copy = dir.file("signal2.ews");
  save_ews(loaded, copy);
  CHECK(slurp(path) == slurp(copy));

  flip_byte(path, slurp(path).size() - 4);
  try {
    load_ews(path);
    FAIL("tampered table accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Format);
  }
}

TEST_CASE("watermarked corpora round-trip with their marks sidecar") {
  Fixture fx;
  WatermarkConfig cfg;
  cfg.key = 0xc0ffee;
  const std::vector<TokenSeq> prompts = {{TokenId(2), TokenId(3)},
                                         {TokenId(4)}};
  WatermarkedCorpus corpus =
      generate_dataset(*fx.teacher, cfg, prompts, 12, 20, 1.0, 99);

  TempDir dir;
  const std::string path = dir.file("dataset.txt");
  save_corpus(corpus, path);
  CHECK(fs::exists(path + ".marks"));

  const WatermarkedCorpus loaded = load_corpus(path);
  CHECK(loaded.content_hash() == corpus.content_hash());
  REQUIRE(loaded.records.size() == corpus.records.size());
  for (std::size_t i = 0; i < corpus.records.size(); ++i) {
    CHECK(loaded.records[i].prompt == corpus.records[i].prompt);
    CHECK(loaded.records[i].completion == corpus.records[i].completion);
    CHECK(loaded.records[i].marks == corpus.records[i].marks);
  }
  const auto& p = corpus.provenance;
  const auto& q = loaded.provenance;
  CHECK(q.vocab_hash == p.vocab_hash);
  CHECK(q.teacher_hash == p.teacher_hash);
  CHECK(q.scheme == p.scheme);
  CHECK(q.gamma == p.gamma);
  CHECK(q.delta == p.delta);
  CHECK(q.context_width == p.context_width);
  CHECK(q.key_fingerprint == p.key_fingerprint);
  CHECK(q.seed == p.seed);

  const std::string copy = dir.file("dataset2.txt");
  save_corpus(loaded, copy);
  CHECK(slurp(path) == slurp(copy));
  CHECK(slurp(path + ".marks") == slurp(copy + ".marks"));

  // The raw key must not appear anywhere in the artifact.
  CHECK(slurp(path).find("c0ffee") == std::string::npos);

  // A marks sidecar that disagrees with the records is rejected.
  write_text_file(path + ".marks", slurp(path + ".marks") + "0 0 0\n");
  try {
    load_corpus(path);
    FAIL("inconsistent sidecar accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Format);
  }
}

TEST_CASE("detection reports serialize every documented field") {
  Fixture fx;
  WatermarkConfig cfg;
  cfg.key = 7;
  SplitMix64 rng(31);
  TokenSeq text;
  for (int i = 0; i < 40; ++i)
    text.push_back(TokenId(rng.next_below(fx.vocab->size())));
  const DetectionReport report =
      detect_green_list(text, cfg, fx.vocab->size());

  const nlohmann::json j = detection_to_json(report);
  CHECK(j.size() == 7);
  CHECK(j.at("scheme").get<std::string>() == "greenlist");
  CHECK(j.at("scored").get<std::uint64_t>() == report.scored);
  CHECK(j.at("hits").get<std::uint64_t>() == report.hits);
  CHECK(j.at("rate").get<double>() == report.rate);
  CHECK(j.at("z").get<double>() == report.z);
  CHECK(j.at("p").get<double>() == report.p);
  CHECK(j.at("watermarked").get<bool>() == report.watermarked);
}

TEST_CASE("manifests record hashes that match the artifacts on disk") {
  TempDir dir;
  write_text_file(dir.file("alpha.txt"), "first artifact\n");
  write_text_file(dir.file("beta.txt"), "second artifact\n");

  ExperimentConfig cfg;
  cfg.corpus_text = "a b c";
  cfg.watermark.key = 0xdeadbeef01234567ull;
  cfg.seed = 321;
  write_manifest(dir.path.string(), cfg, {"alpha.txt", "beta.txt"});

  const std::string body = slurp(dir.file("manifest.json"));
  const nlohmann::json manifest = nlohmann::json::parse(body);
  CHECK(manifest.at("tool_version").get<std::string>() == kToolVersion);
  CHECK(manifest.at("seed").get<std::uint64_t>() == 321);
  CHECK(manifest.at("config_hash").get<std::string>() ==
        to_hex(cfg.content_hash()));
  for (const char* name : {"alpha.txt", "beta.txt"}) {
    const std::string expect = to_hex(hash_bytes(slurp(dir.file(name))));
    CHECK(manifest.at("artifacts").at(name).get<std::string>() == expect);
  }

  // Configs are stored key-redacted: the fingerprint appears, the key never.
  CHECK(body.find("key_fingerprint") != std::string::npos);
  CHECK(body.find("deadbeef01234567") == std::string::npos);
  CHECK(manifest.at("config").at("watermark").contains("key") == false);

  try {
    write_manifest(dir.path.string(), cfg, {"gone.txt"});
    FAIL("missing artifact accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
  }
}

TEST_CASE("text file helpers report unreadable paths") {
  try {
    read_text_file("/nonexistent/wmlab/file.txt");
    FAIL("missing path accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Io);
  }
  TempDir dir;
  write_text_file(dir.file("note.txt"), "hello\n");
  CHECK(read_text_file(dir.file("note.txt")) == "hello\n");
}
