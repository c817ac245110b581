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

#include "wmlab/serialize.hpp"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace wmlab {

namespace {

constexpr char kModelMagic[8] = {'W', 'M', 'N', 'G', 'R', 'A', 'M', '\0'};
constexpr char kEwsMagic[8] = {'W', 'M', 'E', 'W', 'S', 'I', 'G', '\0'};
constexpr std::uint32_t kModelVersion = 1;
constexpr std::uint32_t kEwsVersion = 1;
constexpr const char* kCorpusHeader = "# wmlab-corpus v1";
constexpr const char* kMarksHeader = "# wmlab-marks v1";

class ByteWriter {
 public:
  void raw(const void* data, std::size_t n) {
    buf_.append(static_cast<const char*>(data), n);
  }
  void u8(std::uint8_t v) { raw(&v, 1); }
  void u32(std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = char((v >> (8 * i)) & 0xff);
    raw(b, 4);
  }
  void u64(std::uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xff);
    raw(b, 8);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    u64(bits);
  }
  void str(std::string_view s) {
    u64(s.size());
    raw(s.data(), s.size());
  }
  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string_view data, std::string name)
      : data_(data), name_(std::move(name)) {}

  void raw(void* out, std::size_t n) {
    if (pos_ + n > data_.size())
      fail(ErrorCode::Format, name_ + ": truncated file");
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() {
    std::uint8_t v;
    raw(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    unsigned char b[4];
    raw(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    unsigned char b[8];
    raw(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  std::string str() {
    std::uint64_t n = u64();
    if (pos_ + n > data_.size())
      fail(ErrorCode::Format, name_ + ": truncated string");
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  /// A sanity bound on element counts so a corrupt length prefix fails
  /// cleanly instead of attempting a huge allocation.
  std::uint64_t count(std::uint64_t limit) {
    std::uint64_t n = u64();
    if (n > limit) fail(ErrorCode::Format, name_ + ": implausible count");
    return n;
  }
  void done() {
    if (pos_ != data_.size())
      fail(ErrorCode::Format, name_ + ": trailing bytes after payload");
  }

 private:
  std::string_view data_;
  std::string name_;
  std::size_t pos_ = 0;
};

void write_model_body(ByteWriter& w, const NGramModel& model) {
  w.u64(model.order());
  w.f64(model.smoothing());
  w.u64(model.target_count());

  // One block per order; visit_contexts is already in canonical order.
  std::vector<std::vector<std::pair<TokenSeq, std::vector<NGramModel::ContextRow>>>>
      per_order(model.order() + 1);
  model.visit_contexts([&per_order](std::size_t k,
                                    std::span<const TokenId> ctx,
                                    std::span<const NGramModel::ContextRow> rows) {
    per_order[k].emplace_back(TokenSeq(ctx.begin(), ctx.end()),
                              std::vector<NGramModel::ContextRow>(
                                  rows.begin(), rows.end()));
  });
  for (std::size_t k = 0; k <= model.order(); ++k) {
    w.u64(per_order[k].size());
    for (const auto& [ctx, rows] : per_order[k]) {
      for (TokenId t : ctx) w.u32(t);
      w.u64(rows.size());
      for (const auto& [tok, cnt] : rows) {
        w.u32(tok);
        w.u64(cnt);
      }
    }
  }

  if (model.prior()) {
    w.u8(1);
    w.f64(model.prior_mix());
    write_model_body(w, *model.prior());
  } else {
    w.u8(0);
  }
}

NGramModel read_model_body(ByteReader& r, const VocabPtr& vocab,
                           const std::string& name) {
  const std::uint64_t order = r.count(64);
  if (order == 0) fail(ErrorCode::Format, name + ": zero model order");
  const double smoothing = r.f64();
  const std::uint64_t targets = r.u64();
  NGramModel model(vocab, order, smoothing);
  for (std::size_t k = 0; k <= order; ++k) {
    const std::uint64_t n_ctx = r.count(std::uint64_t(1) << 40);
    for (std::uint64_t c = 0; c < n_ctx; ++c) {
      TokenSeq ctx(k);
      for (std::size_t i = 0; i < k; ++i) ctx[i] = r.u32();
      const std::uint64_t n_rows = r.count(std::uint64_t(1) << 32);
      for (std::uint64_t row = 0; row < n_rows; ++row) {
        TokenId tok = r.u32();
        std::uint64_t cnt = r.u64();
        model.add_count(ctx, tok, cnt);
      }
    }
  }
  model.set_target_count(targets);
  if (r.u8() != 0) {
    const double mix = r.f64();
    auto prior =
        std::make_shared<NGramModel>(read_model_body(r, vocab, name));
    model.set_prior(std::move(prior), mix);
  }
  return model;
}

void write_vocab(ByteWriter& w, const Vocabulary& vocab) {
  w.u8(std::uint8_t(vocab.mode()));
  w.u64(vocab.size() - 2);  // sentinels are implicit
  for (TokenId id = 2; id < vocab.size(); ++id) w.str(vocab.text(id));
  w.u64(vocab.content_hash());
}

Vocabulary read_vocab(ByteReader& r, const std::string& name) {
  const std::uint8_t mode_raw = r.u8();
  if (mode_raw > 2) fail(ErrorCode::Format, name + ": unknown tokenizer mode");
  const std::uint64_t n = r.count(std::uint64_t(1) << 32);
  std::vector<std::string> tokens;
  tokens.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) tokens.push_back(r.str());
  Vocabulary vocab =
      Vocabulary::from_tokens(std::move(tokens), TokenizerMode(mode_raw));
  const std::uint64_t stored_hash = r.u64();
  if (stored_hash != vocab.content_hash())
    fail(ErrorCode::Format,
         name + ": vocabulary hash mismatch, file corrupted or tampered");
  return vocab;
}

std::string read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_binary(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open " + path);
  out.write(bytes.data(), std::streamsize(bytes.size()));
  out.flush();
  if (!out) fail(ErrorCode::Io, "write failed for " + path);
}

}  // namespace

void save_model(const NGramModel& model, const std::string& path) {
  ByteWriter w;
  w.raw(kModelMagic, sizeof(kModelMagic));
  w.u32(kModelVersion);
  write_vocab(w, model.vocab());
  write_model_body(w, model);
  w.u64(model.content_hash());
  write_binary(path, w.bytes());
}

NGramModel load_model(const std::string& path) {
  const std::string bytes = read_binary(path);
  ByteReader r(bytes, path);
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kModelMagic, sizeof(magic)) != 0)
    fail(ErrorCode::Format, path + ": not a model file");
  const std::uint32_t version = r.u32();
  if (version != kModelVersion)
    fail(ErrorCode::Format, path + ": unsupported model format version " +
                                std::to_string(version));
  auto vocab = std::make_shared<Vocabulary>(read_vocab(r, path));
  NGramModel model = read_model_body(r, vocab, path);
  const std::uint64_t stored_hash = r.u64();
  r.done();
  if (stored_hash != model.content_hash())
    fail(ErrorCode::Format,
         path + ": model hash mismatch, file corrupted or tampered");
  return model;
}

void save_ews(const EwsTable& table, const std::string& path) {
  ByteWriter w;
  w.raw(kEwsMagic, sizeof(kEwsMagic));
  w.u32(kEwsVersion);
  w.u64(table.vocab_hash());
  w.u64(table.vocab_size());
  const EwsParams& p = table.params();
  w.u64(p.orders.size());
  for (std::size_t o : p.orders) w.u64(o);
  w.u64(p.cap);
  w.f64(p.epsilon);
  w.u64(p.min_support);
  for (double v : table.global()) w.f64(v);
  for (std::size_t oi = 0; oi < table.order_count(); ++oi) {
    const auto& entries = table.entries(oi);
    w.u64(entries.size());
    for (const auto& e : entries) {
      for (TokenId t : e.window) w.u32(t);
      w.f64(e.weight);
      w.u64(e.support);
      w.u64(e.values.size());
      for (const auto& [tok, val] : e.values) {
        w.u32(tok);
        w.f64(val);
      }
    }
  }
  w.u64(table.content_hash());
  write_binary(path, w.bytes());
}

EwsTable load_ews(const std::string& path) {
  const std::string bytes = read_binary(path);
  ByteReader r(bytes, path);
  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kEwsMagic, sizeof(magic)) != 0)
    fail(ErrorCode::Format, path + ": not a signal table file");
  const std::uint32_t version = r.u32();
  if (version != kEwsVersion)
    fail(ErrorCode::Format, path + ": unsupported table format version " +
                                std::to_string(version));
  const std::uint64_t vocab_hash = r.u64();
  const std::uint64_t vocab_size = r.count(std::uint64_t(1) << 32);
  EwsParams p;
  const std::uint64_t n_orders = r.count(64);
  p.orders.clear();
  for (std::uint64_t i = 0; i < n_orders; ++i) p.orders.push_back(r.count(255));
  p.cap = r.u64();
  p.epsilon = r.f64();
  p.min_support = r.u64();
  LogitVector global(vocab_size);
  for (auto& v : global) v = r.f64();
  std::vector<std::vector<EwsTable::Entry>> per_order(n_orders);
  for (std::uint64_t oi = 0; oi < n_orders; ++oi) {
    const std::uint64_t n_entries = r.count(std::uint64_t(1) << 32);
    per_order[oi].reserve(n_entries);
    for (std::uint64_t e = 0; e < n_entries; ++e) {
      EwsTable::Entry entry;
      entry.window.resize(p.orders[oi]);
      for (auto& t : entry.window) t = r.u32();
      entry.weight = r.f64();
      entry.support = r.u64();
      const std::uint64_t n_vals = r.count(vocab_size);
      entry.values.reserve(n_vals);
      for (std::uint64_t v = 0; v < n_vals; ++v) {
        TokenId tok = r.u32();
        double val = r.f64();
        entry.values.emplace_back(tok, val);
      }
      per_order[oi].push_back(std::move(entry));
    }
  }
  EwsTable table(std::move(p), vocab_size, vocab_hash, std::move(global),
                 std::move(per_order));
  const std::uint64_t stored_hash = r.u64();
  r.done();
  if (stored_hash != table.content_hash())
    fail(ErrorCode::Format,
         path + ": table hash mismatch, file corrupted or tampered");
  return table;
}

namespace {

void append_ids(std::string& out, const TokenSeq& ids) {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += std::to_string(ids[i]);
  }
}

TokenSeq parse_ids(const std::string& text, const std::string& where) {
  TokenSeq ids;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) {
    char* end = nullptr;
    unsigned long v = std::strtoul(tok.c_str(), &end, 10);
    if (end == tok.c_str() || *end != '\0')
      fail(ErrorCode::Format, where + ": bad token id \"" + tok + "\"");
    ids.push_back(TokenId(v));
  }
  return ids;
}

std::string header_value(const std::string& line, const std::string& key,
                         const std::string& where) {
  const std::string prefix = "# " + key + " ";
  if (line.rfind(prefix, 0) != 0)
    fail(ErrorCode::Format,
         where + ": expected header \"" + prefix + "...\", got \"" + line +
             "\"");
  return line.substr(prefix.size());
}

double parse_double(const std::string& text, const std::string& where) {
  char* end = nullptr;
  double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0')
    fail(ErrorCode::Format, where + ": bad number \"" + text + "\"");
  return v;
}

}  // namespace

void save_corpus(const WatermarkedCorpus& corpus, const std::string& path) {
  const CorpusProvenance& p = corpus.provenance;
  std::string out;
  out += kCorpusHeader;
  out += '\n';
  out += "# scheme " + std::string(scheme_name(p.scheme)) + "\n";
  out += "# gamma " + format_double(p.gamma) + "\n";
  out += "# delta " + format_double(p.delta) + "\n";
  out += "# context_width " + std::to_string(p.context_width) + "\n";
  out += "# tournament_depth " + std::to_string(p.tournament_depth) + "\n";
  out += "# temperature " + format_double(p.temperature) + "\n";
  out += "# seed " + to_hex(p.seed) + "\n";
  out += "# vocab_hash " + to_hex(p.vocab_hash) + "\n";
  out += "# teacher_hash " + to_hex(p.teacher_hash) + "\n";
  out += "# key_fingerprint " + to_hex(p.key_fingerprint) + "\n";
  out += "# prompt_set_hash " + to_hex(p.prompt_set_hash) + "\n";
  for (const auto& rec : corpus.records) {
    append_ids(out, rec.prompt);
    out += " | ";
    append_ids(out, rec.completion);
    out += '\n';
  }
  write_text_file(path, out);

  std::string marks;
  marks += kMarksHeader;
  marks += '\n';
  for (const auto& rec : corpus.records) {
    for (std::size_t i = 0; i < rec.marks.size(); ++i) {
      if (i) marks += ' ';
      marks += std::to_string(int(rec.marks[i]));
    }
    marks += '\n';
  }
  write_text_file(path + ".marks", marks);
}

WatermarkedCorpus load_corpus(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  auto next_line = [&](const char* what) -> std::string& {
    if (!std::getline(in, line))
      fail(ErrorCode::Format, path + ": missing " + what);
    return line;
  };

  WatermarkedCorpus corpus;
  CorpusProvenance& p = corpus.provenance;
  if (next_line("format header") != kCorpusHeader)
    fail(ErrorCode::Format, path + ": not a corpus file");
  const std::string scheme =
      header_value(next_line("scheme header"), "scheme", path);
  if (scheme == "greenlist")
    p.scheme = Scheme::kGreenList;
  else if (scheme == "tournament")
    p.scheme = Scheme::kTournament;
  else
    fail(ErrorCode::Format, path + ": unknown scheme \"" + scheme + "\"");
  p.gamma = parse_double(header_value(next_line("gamma"), "gamma", path), path);
  p.delta = parse_double(header_value(next_line("delta"), "delta", path), path);
  p.context_width = std::size_t(parse_double(
      header_value(next_line("context_width"), "context_width", path), path));
  p.tournament_depth = std::size_t(parse_double(
      header_value(next_line("tournament_depth"), "tournament_depth", path),
      path));
  p.temperature = parse_double(
      header_value(next_line("temperature"), "temperature", path), path);
  p.seed = parse_hex64(header_value(next_line("seed"), "seed", path));
  p.vocab_hash =
      parse_hex64(header_value(next_line("vocab_hash"), "vocab_hash", path));
  p.teacher_hash = parse_hex64(
      header_value(next_line("teacher_hash"), "teacher_hash", path));
  p.key_fingerprint = parse_hex64(header_value(
      next_line("key_fingerprint"), "key_fingerprint", path));
  p.prompt_set_hash = parse_hex64(header_value(
      next_line("prompt_set_hash"), "prompt_set_hash", path));

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t bar = line.find(" | ");
    if (bar == std::string::npos)
      fail(ErrorCode::Format,
           path + ": record line without a prompt separator");
    WatermarkedRecord rec;
    rec.prompt = parse_ids(line.substr(0, bar), path);
    rec.completion = parse_ids(line.substr(bar + 3), path);
    corpus.records.push_back(std::move(rec));
  }

  const std::string marks_path = path + ".marks";
  std::istringstream marks_in(read_text_file(marks_path));
  if (!std::getline(marks_in, line) || line != kMarksHeader)
    fail(ErrorCode::Format, marks_path + ": not a marks file");
  for (auto& rec : corpus.records) {
    if (!std::getline(marks_in, line))
      fail(ErrorCode::Format, marks_path + ": fewer lines than records");
    TokenSeq vals = parse_ids(line, marks_path);
    if (vals.size() != rec.completion.size())
      fail(ErrorCode::Format,
           marks_path + ": marks length disagrees with completion length");
    rec.marks.assign(vals.begin(), vals.end());
  }
  if (std::getline(marks_in, line) && !line.empty())
    fail(ErrorCode::Format, marks_path + ": more lines than records");
  return corpus;
}

nlohmann::json detection_to_json(const DetectionReport& report) {
  nlohmann::json j;
  j["scheme"] = scheme_name(report.scheme);
  j["scored"] = report.scored;
  j["hits"] = report.hits;
  j["rate"] = report.rate;
  j["z"] = report.z;
  j["p"] = report.p;
  j["watermarked"] = report.watermarked;
  return j;
}

void write_manifest(const std::string& directory,
                    const ExperimentConfig& config,
                    const std::vector<std::string>& artifact_files) {
  nlohmann::json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["seed"] = config.seed;
  manifest["config"] = config.to_json(/*redact_key=*/true);
  manifest["config_hash"] = to_hex(config.content_hash());
  nlohmann::json artifacts;
  for (const auto& name : artifact_files) {
    const std::string bytes =
        read_binary((std::filesystem::path(directory) / name).string());
    artifacts[name] = to_hex(hash_bytes(bytes));
  }
  manifest["artifacts"] = artifacts;
  write_text_file(
      (std::filesystem::path(directory) / "manifest.json").string(),
      manifest.dump(2) + "\n");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open " + path);
  out << body;
  out.flush();
  if (!out) fail(ErrorCode::Io, "write failed for " + path);
}

}  // namespace wmlab
