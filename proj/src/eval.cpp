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

#include "wmlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace wmlab {

namespace {

using nlohmann::json;

// Reads one level of a config object, collecting the keys it consumed so
// that leftovers can be reported as errors; a misspelled key should never
// silently fall back to a default.
class ConfigReader {
 public:
  ConfigReader(const json& j, std::string prefix)
      : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object())
      fail(ErrorCode::Validation, where("") + "must be a JSON object");
  }

  bool has(const std::string& key) {
    return j_.find(key) != j_.end();
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    seen_.insert(key);
    try {
      out = it->get<T>();
    } catch (const json::exception&) {
      fail(ErrorCode::Validation, where(key) + "has the wrong type");
    }
  }

  const json* object(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    if (!it->is_object())
      fail(ErrorCode::Validation, where(key) + "must be a JSON object");
    return &*it;
  }

  void finish() {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key()))
        fail(ErrorCode::Validation, where(it.key()) + "is not a known key");
  }

  std::string where(const std::string& key) const {
    std::string path = prefix_.empty() ? key : prefix_ + (key.empty() ? "" : "." + key);
    return "config key \"" + path + "\" ";
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok)
    fail(ErrorCode::Validation, "config key \"" + key + "\" " + what);
}

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig.
// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  require(max_vocab >= 1, "max_vocab", "must be >= 1");
  require(teacher_order >= 1, "orders.teacher", "must be >= 1");
  require(student_order >= 1, "orders.student", "must be >= 1");
  require(attack_order >= 1, "orders.attack", "must be >= 1");
  require(reference_order >= 1, "orders.reference", "must be >= 1");
  require(smoothing > 0.0 && std::isfinite(smoothing), "smoothing",
          "must be positive and finite");
  require(temperature > 0.0 && std::isfinite(temperature), "temperature",
          "must be positive and finite");
  watermark.validate();
  require(n_sequences >= 1, "distill.n_sequences", "must be >= 1");
  require(distill_length >= 1, "distill.length", "must be >= 1");
  require(prompt_length >= 1, "distill.prompt_length", "must be >= 1");
  require(mix >= 0.0 && mix <= 1.0, "distill.mix", "must lie in [0, 1]");
  require(!extract.orders.empty(), "extract.orders", "must not be empty");
  for (std::size_t i = 0; i < extract.orders.size(); ++i) {
    require(extract.orders[i] >= 1, "extract.orders",
            "entries must be >= 1");
    require(i == 0 || extract.orders[i] > extract.orders[i - 1],
            "extract.orders", "must be strictly ascending");
  }
  require(extract.cap >= 1, "extract.cap", "must be >= 1");
  require(extract.epsilon >= 0.0 && std::isfinite(extract.epsilon),
          "extract.epsilon", "must be finite and >= 0");
  require(!alphas.empty(), "alphas", "must not be empty");
  for (double a : alphas)
    require(std::isfinite(a) && a >= 0.0, "alphas",
            "entries must be finite and >= 0");
  require(n_positive >= 1, "eval.n_positive", "must be >= 1");
  require(n_null >= 1, "eval.n_null", "must be >= 1");
  require(eval_length >= 2, "eval.length",
          "must be >= 2 so at least one token is scorable");
  require(std::isfinite(z_threshold), "z_threshold", "must be finite");
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  ConfigReader top(j, "");
  top.read("corpus", c.corpus_path);
  top.read("corpus_text", c.corpus_text);

  std::string tok = tokenizer_mode_name(c.tokenizer);
  top.read("tokenizer", tok);
  auto mode = tokenizer_mode_from_name(tok);
  if (!mode)
    fail(ErrorCode::Validation,
         "config key \"tokenizer\" must be one of whitespace, character, "
         "byte");
  c.tokenizer = *mode;

  top.read("max_vocab", c.max_vocab);
  if (const json* orders = top.object("orders")) {
    ConfigReader r(*orders, "orders");
    r.read("teacher", c.teacher_order);
    r.read("student", c.student_order);
    r.read("attack", c.attack_order);
    r.read("reference", c.reference_order);
    r.finish();
  }
  top.read("smoothing", c.smoothing);
  top.read("temperature", c.temperature);

  if (const json* wm = top.object("watermark")) {
    ConfigReader r(*wm, "watermark");
    std::string scheme = scheme_name(c.watermark.scheme);
    r.read("scheme", scheme);
    if (scheme == "greenlist")
      c.watermark.scheme = Scheme::kGreenList;
    else if (scheme == "tournament")
      c.watermark.scheme = Scheme::kTournament;
    else
      fail(ErrorCode::Validation,
           "config key \"watermark.scheme\" must be greenlist or tournament");
    if (r.has("key")) {
      std::string key;
      r.read("key", key);
      c.watermark.key = parse_hex64(key);
    }
    r.read("gamma", c.watermark.gamma);
    r.read("delta", c.watermark.delta);
    r.read("context_width", c.watermark.context_width);
    r.read("tournament_depth", c.watermark.tournament_depth);
    r.finish();
  }

  if (const json* d = top.object("distill")) {
    ConfigReader r(*d, "distill");
    r.read("n_sequences", c.n_sequences);
    r.read("length", c.distill_length);
    r.read("prompt_length", c.prompt_length);
    r.read("mix", c.mix);
    r.read("completions_only", c.completions_only);
    r.finish();
  }

  if (const json* e = top.object("extract")) {
    ConfigReader r(*e, "extract");
    r.read("orders", c.extract.orders);
    r.read("cap", c.extract.cap);
    r.read("epsilon", c.extract.epsilon);
    r.read("min_support", c.extract.min_support);
    r.finish();
  }

  top.read("alphas", c.alphas);

  if (const json* e = top.object("eval")) {
    ConfigReader r(*e, "eval");
    r.read("n_positive", c.n_positive);
    r.read("n_null", c.n_null);
    r.read("length", c.eval_length);
    r.finish();
  }

  top.read("z_threshold", c.z_threshold);
  top.read("seed", c.seed);
  top.finish();

  c.validate();
  return c;
}

json ExperimentConfig::to_json(bool redact_key) const {
  json j;
  j["corpus"] = corpus_path;
  if (!corpus_text.empty()) j["corpus_text"] = corpus_text;
  j["tokenizer"] = tokenizer_mode_name(tokenizer);
  j["max_vocab"] = max_vocab;
  j["orders"] = {{"teacher", teacher_order},
                 {"student", student_order},
                 {"attack", attack_order},
                 {"reference", reference_order}};
  j["smoothing"] = smoothing;
  j["temperature"] = temperature;
  json wm;
  wm["scheme"] = scheme_name(watermark.scheme);
  if (redact_key)
    wm["key_fingerprint"] = to_hex(watermark.key_fingerprint());
  else
    wm["key"] = to_hex(watermark.key);
  wm["gamma"] = watermark.gamma;
  wm["delta"] = watermark.delta;
  wm["context_width"] = watermark.context_width;
  wm["tournament_depth"] = watermark.tournament_depth;
  j["watermark"] = wm;
  j["distill"] = {{"n_sequences", n_sequences},
                  {"length", distill_length},
                  {"prompt_length", prompt_length},
                  {"mix", mix},
                  {"completions_only", completions_only}};
  j["extract"] = {{"orders", extract.orders},
                  {"cap", extract.cap},
                  {"epsilon", extract.epsilon},
                  {"min_support", extract.min_support}};
  j["alphas"] = alphas;
  j["eval"] = {{"n_positive", n_positive},
               {"n_null", n_null},
               {"length", eval_length}};
  j["z_threshold"] = z_threshold;
  j["seed"] = seed;
  return j;
}

std::uint64_t ExperimentConfig::content_hash() const {
  return hash_bytes(to_json(/*redact_key=*/true).dump());
}

// ---------------------------------------------------------------------------
// Metric primitives.
// ---------------------------------------------------------------------------

double calibrate_threshold(std::span<const double> null_scores, double fpr) {
  if (null_scores.empty())
    fail(ErrorCode::EmptyRequest, "calibration needs null scores");
  if (!(fpr >= 0.0 && fpr <= 1.0))
    fail(ErrorCode::Validation, "fpr must lie in [0, 1]");
  if (fpr == 0.0) return HUGE_VAL;
  std::vector<double> desc(null_scores.begin(), null_scores.end());
  std::sort(desc.begin(), desc.end(), std::greater<double>());
  // Smallest score with at most floor(n * fpr) nulls strictly above it.
  auto allowed = std::size_t(std::floor(double(desc.size()) * fpr + 1e-9));
  if (allowed >= desc.size()) allowed = desc.size() - 1;
  return desc[allowed];
}

std::map<double, double> tpr_at_fpr(std::span<const double> positive_scores,
                                    std::span<const double> null_scores,
                                    std::span<const double> fpr_levels) {
  if (positive_scores.empty())
    fail(ErrorCode::EmptyRequest, "tpr_at_fpr needs positive scores");
  std::map<double, double> out;
  for (double f : fpr_levels) {
    const double thr = calibrate_threshold(null_scores, f);
    std::size_t above = 0;
    for (double s : positive_scores)
      if (s > thr) ++above;
    out[f] = double(above) / double(positive_scores.size());
  }
  return out;
}

double median_p(std::span<const DetectionReport> reports) {
  if (reports.empty())
    fail(ErrorCode::EmptyRequest, "median_p of an empty report list");
  std::vector<double> ps;
  ps.reserve(reports.size());
  for (const auto& r : reports) ps.push_back(r.p);
  return median_lower(std::move(ps));
}

namespace {

std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  std::sort(idx.begin(), idx.end(),
            [&v](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (double(i) + double(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    fail(ErrorCode::Validation, "rank correlation needs equal-length lists");
  if (x.size() < 2)
    fail(ErrorCode::Validation, "rank correlation needs at least two points");
  std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
  const double n = double(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0)
    fail(ErrorCode::Validation,
         "rank correlation is undefined for a fully tied list");
  return sxy / std::sqrt(sxx * syy);
}

double ks_statistic_normal(std::vector<double> sample) {
  if (sample.empty())
    fail(ErrorCode::EmptyRequest, "KS statistic of an empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = double(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = phi_cdf(sample[i]);
    d = std::max(d, f - double(i) / n);
    d = std::max(d, double(i + 1) / n - f);
  }
  return d;
}

double ks_critical(double alpha, std::size_t n) {
  if (n == 0) fail(ErrorCode::EmptyRequest, "KS critical value needs n >= 1");
  double c;
  if (alpha == 0.10)
    c = 1.22385;
  else if (alpha == 0.05)
    c = 1.35810;
  else if (alpha == 0.01)
    c = 1.62762;
  else
    fail(ErrorCode::Validation,
         "supported KS significance levels: 0.10, 0.05, 0.01");
  return c / std::sqrt(double(n));
}

std::pair<double, double> wilson_interval(std::uint64_t successes,
                                          std::uint64_t trials) {
  if (trials == 0)
    fail(ErrorCode::EmptyRequest, "Wilson interval needs trials >= 1");
  if (successes > trials)
    fail(ErrorCode::Validation, "more successes than trials");
  const double z = 1.959963984540054;  // 97.5th normal percentile
  const double n = double(trials);
  const double p = double(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half =
      z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

// ---------------------------------------------------------------------------
// Pipeline.
// ---------------------------------------------------------------------------

std::vector<double> SampleSet::z_values() const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.detection.z);
  return out;
}

std::vector<double> SampleSet::p_values() const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.detection.p);
  return out;
}

std::vector<double> SampleSet::perplexities() const {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.perplexity);
  return out;
}

namespace {

template <typename F>
auto stage(const char* name, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(e.code(), std::string("stage ") + name + ": " + e.what());
  }
}

struct Shards {
  std::vector<TokenSeq> teacher, base, attack, heldout;
};

// Deterministic round-robin split; line order is the only thing that
// matters, so re-running on the same corpus file reproduces the shards.
// Per 20 lines: 8 teacher, 5 base, 5 attack, 2 held out.
Shards shard_corpus(const std::string& text, const Vocabulary& vocab) {
  Shards shards;
  std::istringstream in(text);
  std::string line;
  std::size_t idx = 0;
  while (std::getline(in, line)) {
    TokenSeq ids = vocab.encode(line);
    if (ids.empty()) continue;
    const std::size_t r = idx++ % 20;
    if (r < 8)
      shards.teacher.push_back(std::move(ids));
    else if (r < 13)
      shards.base.push_back(std::move(ids));
    else if (r < 18)
      shards.attack.push_back(std::move(ids));
    else
      shards.heldout.push_back(std::move(ids));
  }
  return shards;
}

SampleSet collect_samples(const std::string& label, bool has_alpha,
                          double alpha, const NGramModel& model,
                          const GenerationHooks& hooks,
                          std::span<const TokenSeq> prompts, std::size_t n,
                          std::size_t length, double temperature,
                          const WatermarkConfig& wm, std::size_t vocab_size,
                          const NGramModel& reference, std::uint64_t seed,
                          const std::string& seed_tag) {
  SampleSet set;
  set.label = label;
  set.has_alpha = has_alpha;
  set.alpha = alpha;
  set.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TextSample s;
    SplitMix64 rng(derive_seed(seed, seed_tag, i));
    s.tokens = generate(model, prompts[i % prompts.size()], length, hooks,
                        temperature, rng);
    s.detection = detect(s.tokens, wm, vocab_size);
    s.perplexity = reference.perplexity(s.tokens);
    set.samples.push_back(std::move(s));
  }
  return set;
}

MetricsRow metrics_row(const SampleSet& set, std::span<const double> null_z,
                       double z_threshold) {
  MetricsRow row;
  row.label = set.label;
  row.has_alpha = set.has_alpha;
  row.alpha = set.alpha;
  row.n_texts = set.samples.size();
  std::vector<double> z = set.z_values();
  std::vector<double> levels(std::begin(kFprLevels), std::end(kFprLevels));
  auto tpr = tpr_at_fpr(z, null_z, levels);
  row.tpr10 = tpr.at(0.10);
  row.tpr1 = tpr.at(0.01);
  row.tpr01 = tpr.at(0.001);
  row.median_p_value = median_lower(set.p_values());
  row.median_z = median_lower(z);
  row.median_perplexity = median_lower(set.perplexities());
  std::size_t passed = 0;
  for (double v : z)
    if (v >= z_threshold) ++passed;
  row.pass_rate = double(passed) / double(z.size());
  return row;
}

}  // namespace

PipelineResult run_pipeline_full(const ExperimentConfig& config) {
  config.validate();
  PipelineResult out;

  std::string corpus = config.corpus_text;
  if (corpus.empty()) {
    if (config.corpus_path.empty())
      fail(ErrorCode::Validation,
           "config key \"corpus\" names no corpus and no inline text given");
    std::ifstream in(config.corpus_path, std::ios::binary);
    if (!in)
      fail(ErrorCode::Io, "cannot read corpus file " + config.corpus_path);
    std::ostringstream buf;
    buf << in.rdbuf();
    corpus = buf.str();
  }

  stage("vocabulary", [&] {
    out.vocab = std::make_shared<Vocabulary>(
        Vocabulary::build(corpus, config.tokenizer, config.max_vocab));
    return 0;
  });
  const std::size_t vsize = out.vocab->size();

  Shards shards = shard_corpus(corpus, *out.vocab);
  stage("model-fits", [&] {
    out.teacher = std::make_shared<NGramModel>(NGramModel::fit(
        out.vocab, shards.teacher, config.teacher_order, config.smoothing));
    out.base = std::make_shared<NGramModel>(NGramModel::fit(
        out.vocab, shards.base, config.student_order, config.smoothing));
    out.attack = std::make_shared<NGramModel>(NGramModel::fit(
        out.vocab, shards.attack, config.attack_order, config.smoothing));
    out.reference = std::make_shared<NGramModel>(NGramModel::fit(
        out.vocab, shards.heldout, config.reference_order, config.smoothing));
    return 0;
  });

  stage("prompts", [&] {
    for (const auto& line : shards.heldout)
      if (line.size() >= config.prompt_length)
        out.prompts.emplace_back(line.begin(),
                                 line.begin() + std::ptrdiff_t(config.prompt_length));
    if (out.prompts.empty())
      fail(ErrorCode::Validation,
           "held-out shard has no line of at least prompt_length tokens");
    return 0;
  });

  stage("dataset", [&] {
    out.dataset = generate_dataset(
        *out.teacher, config.watermark, out.prompts, config.n_sequences,
        config.distill_length, config.temperature,
        derive_seed(config.seed, "dataset"));
    return 0;
  });

  stage("distill", [&] {
    out.distilled = fit_student(out.base, out.dataset, config.mix,
                                config.completions_only);
    return 0;
  });

  stage("extract", [&] {
    out.ews = build_ews(*out.distilled.student, *out.base, out.dataset,
                        config.extract);
    return 0;
  });

  const WatermarkConfig& wm = config.watermark;
  stage("null-texts", [&] {
    out.nulls = collect_samples("null", false, 0.0, *out.attack,
                                GenerationHooks{}, out.prompts, config.n_null,
                                config.eval_length, config.temperature, wm,
                                vsize, *out.reference, config.seed,
                                "null-text");
    return 0;
  });
  std::vector<double> null_z = out.nulls.z_values();

  stage("teacher-texts", [&] {
    GenerationHooks hooks = watermark_hooks(wm, vsize, config.temperature);
    out.rows.push_back(collect_samples(
        "teacher", false, 0.0, *out.teacher, hooks, out.prompts,
        config.n_positive, config.eval_length, config.temperature, wm, vsize,
        *out.reference, config.seed, "teacher-text"));
    return 0;
  });

  stage("student-texts", [&] {
    out.rows.push_back(collect_samples(
        "student", false, 0.0, *out.distilled.student, GenerationHooks{},
        out.prompts, config.n_positive, config.eval_length,
        config.temperature, wm, vsize, *out.reference, config.seed,
        "student-text"));
    return 0;
  });

  stage("spoof-texts", [&] {
    for (std::size_t ai = 0; ai < config.alphas.size(); ++ai) {
      const double alpha = config.alphas[ai];
      GenerationHooks hooks;
      hooks.transform = make_spoof_transform(out.ews, alpha);
      out.rows.push_back(collect_samples(
          "spoof", true, alpha, *out.attack, hooks, out.prompts,
          config.n_positive, config.eval_length, config.temperature, wm,
          vsize, *out.reference, derive_seed(config.seed, "spoof-alpha", ai),
          "spoof-text"));
    }
    return 0;
  });

  MetricsReport& report = out.report;
  report.tool_version = kToolVersion;
  report.scheme = scheme_name(wm.scheme);
  report.config_hash = to_hex(config.content_hash());
  report.seed = config.seed;
  report.z_threshold = config.z_threshold;
  for (double f : kFprLevels) {
    CalibrationRow cal;
    cal.fpr = f;
    cal.threshold = calibrate_threshold(null_z, f);
    for (double z : null_z)
      if (z > cal.threshold) ++cal.null_above;
    cal.underpowered = double(null_z.size()) * f < 1.0;
    auto [lo, hi] = wilson_interval(cal.null_above, null_z.size());
    cal.wilson_low = lo;
    cal.wilson_high = hi;
    report.calibration.push_back(cal);
  }
  report.rows.push_back(metrics_row(out.nulls, null_z, config.z_threshold));
  for (const auto& set : out.rows)
    report.rows.push_back(metrics_row(set, null_z, config.z_threshold));
  return out;
}

MetricsReport run_pipeline(const ExperimentConfig& config) {
  return run_pipeline_full(config).report;
}

MetricsReport alpha_sweep(const ExperimentConfig& config,
                          std::span<const double> alphas) {
  if (alphas.empty())
    fail(ErrorCode::EmptyRequest, "alpha sweep needs at least one alpha");
  ExperimentConfig swept = config;
  swept.alphas.assign(alphas.begin(), alphas.end());
  return run_pipeline(swept);
}

// ---------------------------------------------------------------------------
// Report serialization.
// ---------------------------------------------------------------------------

json MetricsReport::to_json() const {
  json j;
  j["tool_version"] = tool_version;
  j["scheme"] = scheme;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["z_threshold"] = z_threshold;
  json cal = json::array();
  for (const auto& c : calibration) {
    cal.push_back({{"fpr", c.fpr},
                   {"threshold", c.threshold},
                   {"null_above", c.null_above},
                   {"underpowered", c.underpowered},
                   {"wilson_low", c.wilson_low},
                   {"wilson_high", c.wilson_high}});
  }
  j["calibration"] = cal;
  json row_array = json::array();
  for (const auto& r : rows_as_json()) row_array.push_back(r);
  j["rows"] = row_array;
  return j;
}

std::vector<json> MetricsReport::rows_as_json() const {
  std::vector<json> out;
  for (const auto& r : rows) {
    json row;
    row["label"] = r.label;
    if (r.has_alpha)
      row["alpha"] = r.alpha;
    else
      row["alpha"] = nullptr;
    row["n_texts"] = r.n_texts;
    row["tpr_at_10pct"] = r.tpr10;
    row["tpr_at_1pct"] = r.tpr1;
    row["tpr_at_01pct"] = r.tpr01;
    row["median_p"] = r.median_p_value;
    row["median_z"] = r.median_z;
    row["median_perplexity"] = r.median_perplexity;
    row["pass_rate"] = r.pass_rate;
    out.push_back(row);
  }
  return out;
}

MetricsReport MetricsReport::from_json(const json& j) {
  MetricsReport r;
  try {
    r.tool_version = j.at("tool_version").get<std::string>();
    r.scheme = j.at("scheme").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.z_threshold = j.at("z_threshold").get<double>();
    for (const auto& c : j.at("calibration")) {
      CalibrationRow cal;
      cal.fpr = c.at("fpr").get<double>();
      cal.threshold = c.at("threshold").get<double>();
      cal.null_above = c.at("null_above").get<std::uint64_t>();
      cal.underpowered = c.at("underpowered").get<bool>();
      cal.wilson_low = c.at("wilson_low").get<double>();
      cal.wilson_high = c.at("wilson_high").get<double>();
      r.calibration.push_back(cal);
    }
    for (const auto& row : j.at("rows")) {
      MetricsRow m;
      m.label = row.at("label").get<std::string>();
      if (!row.at("alpha").is_null()) {
        m.has_alpha = true;
        m.alpha = row.at("alpha").get<double>();
      }
      m.n_texts = row.at("n_texts").get<std::size_t>();
      m.tpr10 = row.at("tpr_at_10pct").get<double>();
      m.tpr1 = row.at("tpr_at_1pct").get<double>();
      m.tpr01 = row.at("tpr_at_01pct").get<double>();
      m.median_p_value = row.at("median_p").get<double>();
      m.median_z = row.at("median_z").get<double>();
      m.median_perplexity = row.at("median_perplexity").get<double>();
      m.pass_rate = row.at("pass_rate").get<double>();
      r.rows.push_back(m);
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::Format, std::string("malformed report JSON: ") + e.what());
  }
  return r;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::Io, "cannot open " + path.string());
  out << body;
  out.flush();
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

}  // namespace

void emit_report(const MetricsReport& report, const std::string& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec)
    fail(ErrorCode::Io, "cannot create directory " + directory + ": " +
                            ec.message());
  const std::filesystem::path dir(directory);

  write_file(dir / "report.json", report.to_json().dump(2) + "\n");

  std::string csv =
      "label,alpha,n_texts,tpr_at_10pct,tpr_at_1pct,tpr_at_01pct,"
      "median_p,median_z,median_perplexity,pass_rate\n";
  for (const auto& r : report.rows) {
    csv += r.label + ",";
    csv += (r.has_alpha ? format_double(r.alpha) : "") + std::string(",");
    csv += std::to_string(r.n_texts) + ",";
    csv += format_double(r.tpr10) + std::string(",");
    csv += format_double(r.tpr1) + std::string(",");
    csv += format_double(r.tpr01) + std::string(",");
    csv += format_double(r.median_p_value) + std::string(",");
    csv += format_double(r.median_z) + std::string(",");
    csv += format_double(r.median_perplexity) + std::string(",");
    csv += format_double(r.pass_rate) + std::string("\n");
  }
  write_file(dir / "report.csv", csv);

  std::string series_p = "alpha,median_p\n";
  std::string series_ppl = "alpha,median_perplexity\n";
  for (const auto& r : report.rows) {
    if (!r.has_alpha) continue;
    series_p += format_double(r.alpha) + std::string(",") +
                format_double(r.median_p_value) + "\n";
    series_ppl += format_double(r.alpha) + std::string(",") +
                  format_double(r.median_perplexity) + "\n";
  }
  write_file(dir / "series_median_p.csv", series_p);
  write_file(dir / "series_perplexity.csv", series_ppl);
}

}  // namespace wmlab
