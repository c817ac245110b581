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

#include "wmlab/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "wmlab/serialize.hpp"

namespace wmlab {

namespace {

void build_app(CLI::App& app, CommandSpec& spec) {
  app.require_subcommand(1);
  app.fallthrough(false);

  auto add_common = [&spec](CLI::App* sub) {
    sub->add_option("--config", spec.config_path, "JSON config file");
    sub->add_option("--out", spec.out_dir, "output directory");
    sub->add_option("--seed", spec.seed, "master seed override");
    sub->add_option("--scheme", spec.scheme, "watermark scheme override")
        ->check(CLI::IsMember({"greenlist", "tournament"}));
  };

  CLI::App* fit = app.add_subcommand("fit", "fit an n-gram model on a corpus");
  add_common(fit);
  fit->add_option("--corpus", spec.corpus, "plain-text corpus")->required();
  fit->add_option("--order", spec.order, "model order");
  fit->add_option("--smoothing", spec.smoothing, "additive smoothing");
  fit->add_option("--tokenizer", spec.tokenizer, "tokenizer mode")
      ->check(CLI::IsMember({"whitespace", "character", "byte"}));
  fit->add_option("--max-vocab", spec.max_vocab, "vocabulary size limit");

  CLI::App* gen = app.add_subcommand(
      "watermark-gen", "sample a watermarked dataset from a model");
  add_common(gen);
  gen->add_option("--model", spec.model, "teacher model file")->required();
  gen->add_option("--prompts", spec.prompts, "prompt pool text file")
      ->required();
  gen->add_option("--n", spec.n, "number of records");
  gen->add_option("--length", spec.length, "completion length");

  CLI::App* detect = app.add_subcommand(
      "detect", "score a text file against the watermark detector");
  add_common(detect);
  detect->add_option("--model", spec.model, "model file (for the vocabulary)")
      ->required();
  detect->add_option("--in", spec.input, "text file to score")->required();
  detect->add_flag("--exact-small", spec.exact_small,
                   "exact binomial tail below 30 scored tokens");

  CLI::App* distill = app.add_subcommand(
      "distill", "re-train a model on a watermarked dataset");
  add_common(distill);
  distill->add_option("--base", spec.base, "base model file")->required();
  distill->add_option("--corpus", spec.corpus, "watermarked dataset file")
      ->required();
  distill->add_option("--mix", spec.mix, "anchor weight toward the base");

  CLI::App* extract = app.add_subcommand(
      "extract", "build the signal table from student and base models");
  add_common(extract);
  extract->add_option("--student", spec.student, "student model file")
      ->required();
  extract->add_option("--base", spec.base, "base model file")->required();
  extract->add_option("--corpus", spec.corpus, "watermarked dataset file")
      ->required();

  CLI::App* spoof = app.add_subcommand(
      "spoof", "generate text from an attack model with the signal injected");
  add_common(spoof);
  spoof->add_option("--attack", spec.attack, "attack model file")->required();
  spoof->add_option("--ews", spec.ews, "signal table file")->required();
  spoof->add_option("--prompts", spec.prompts, "prompt pool text file")
      ->required();
  spoof->add_option("--alpha", spec.alpha, "injection strength");
  spoof->add_option("--n", spec.n, "number of texts");
  spoof->add_option("--length", spec.length, "tokens per text");

  CLI::App* eval =
      app.add_subcommand("eval", "run the full pipeline and report metrics");
  add_common(eval);
  eval->add_option("--corpus", spec.corpus, "plain-text corpus override");
  eval->add_option("--alpha", spec.alpha, "single alpha override");

  CLI::App* sweep = app.add_subcommand(
      "sweep", "run the pipeline across a grid of alphas");
  add_common(sweep);
  sweep->add_option("--corpus", spec.corpus, "plain-text corpus override");
  sweep->add_option("--alphas", spec.alphas, "alpha grid")
      ->delimiter(',');

  CLI::App* pipeline = app.add_subcommand(
      "pipeline", "run the full pipeline and persist every artifact");
  add_common(pipeline);
  pipeline->add_option("--corpus", spec.corpus, "plain-text corpus override");
  pipeline->add_option("--alpha", spec.alpha, "single alpha override");
}

std::string default_out_dir(const std::string& command) {
  const char* root = std::getenv("WMLAB_OUT");
  std::filesystem::path base(root && *root ? root : "wmlab-out");
  return (base / command).string();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    fail(ErrorCode::Io, "cannot create directory " + dir + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

std::vector<TokenSeq> prompt_pool(const std::string& path,
                                  const Vocabulary& vocab,
                                  std::size_t prompt_length) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::vector<TokenSeq> prompts;
  while (std::getline(in, line)) {
    TokenSeq ids = vocab.encode(line);
    if (ids.size() >= prompt_length)
      prompts.emplace_back(ids.begin(),
                           ids.begin() + std::ptrdiff_t(prompt_length));
  }
  if (prompts.empty())
    fail(ErrorCode::Validation,
         path + " has no line of at least " + std::to_string(prompt_length) +
             " tokens");
  return prompts;
}

std::vector<TokenSeq> corpus_lines(const std::string& text,
                                   const Vocabulary& vocab) {
  std::istringstream in(text);
  std::string line;
  std::vector<TokenSeq> out;
  while (std::getline(in, line)) {
    TokenSeq ids = vocab.encode(line);
    if (!ids.empty()) out.push_back(std::move(ids));
  }
  return out;
}

int cmd_fit(const CommandSpec& spec, const ExperimentConfig& cfg) {
  const std::string text = read_text_file(spec.corpus);
  auto vocab = std::make_shared<Vocabulary>(
      Vocabulary::build(text, cfg.tokenizer, cfg.max_vocab));
  std::vector<TokenSeq> lines = corpus_lines(text, *vocab);
  const std::size_t order = spec.order.value_or(cfg.teacher_order);
  NGramModel model = NGramModel::fit(vocab, lines, order, cfg.smoothing);
  ensure_dir(spec.out_dir);
  save_model(model, join(spec.out_dir, "model.bin"));
  write_manifest(spec.out_dir, cfg, {"model.bin"});
  std::cout << "fitted order-" << order << " model on " << lines.size()
            << " lines, |V| = " << vocab->size() << "\n";
  return kExitOk;
}

int cmd_watermark_gen(const CommandSpec& spec, const ExperimentConfig& cfg) {
  NGramModel teacher = load_model(spec.model);
  auto prompts =
      prompt_pool(spec.prompts, teacher.vocab(), cfg.prompt_length);
  const std::size_t n = spec.n.value_or(cfg.n_sequences);
  const std::size_t length = spec.length.value_or(cfg.distill_length);
  WatermarkedCorpus corpus =
      generate_dataset(teacher, cfg.watermark, prompts, n, length,
                       cfg.temperature, cfg.seed);
  ensure_dir(spec.out_dir);
  save_corpus(corpus, join(spec.out_dir, "corpus.txt"));
  write_manifest(spec.out_dir, cfg, {"corpus.txt", "corpus.txt.marks"});
  std::cout << "wrote " << corpus.records.size() << " records ("
            << corpus.completion_tokens() << " completion tokens)\n";
  return kExitOk;
}

int cmd_detect(const CommandSpec& spec, const ExperimentConfig& cfg) {
  NGramModel model = load_model(spec.model);
  TokenSeq ids = model.vocab().encode(read_text_file(spec.input));
  DetectionReport report =
      detect(ids, cfg.watermark, model.vocab().size(), spec.exact_small);
  const std::string body = detection_to_json(report).dump(2) + "\n";
  std::cout << body;
  if (!spec.out_dir.empty()) {
    ensure_dir(spec.out_dir);
    write_text_file(join(spec.out_dir, "detection.json"), body);
    write_manifest(spec.out_dir, cfg, {"detection.json"});
  }
  return kExitOk;
}

int cmd_distill(const CommandSpec& spec, const ExperimentConfig& cfg) {
  auto base = std::make_shared<NGramModel>(load_model(spec.base));
  WatermarkedCorpus corpus = load_corpus(spec.corpus);
  const double mix = spec.mix.value_or(cfg.mix);
  DistillationResult result =
      fit_student(base, corpus, mix, cfg.completions_only);
  ensure_dir(spec.out_dir);
  save_model(*result.student, join(spec.out_dir, "student.bin"));
  write_manifest(spec.out_dir, cfg, {"student.bin"});
  std::cout << "student fitted on " << corpus.records.size()
            << " records, mix " << format_double(mix) << "\n";
  return kExitOk;
}

int cmd_extract(const CommandSpec& spec, const ExperimentConfig& cfg) {
  NGramModel student = load_model(spec.student);
  NGramModel base = load_model(spec.base);
  WatermarkedCorpus corpus = load_corpus(spec.corpus);
  EwsTable table = build_ews(student, base, corpus, cfg.extract);
  ensure_dir(spec.out_dir);
  save_ews(table, join(spec.out_dir, "ews.bin"));
  write_manifest(spec.out_dir, cfg, {"ews.bin"});
  std::size_t entries = 0;
  for (std::size_t oi = 0; oi < table.order_count(); ++oi)
    entries += table.entries(oi).size();
  std::cout << "signal table: " << entries << " windows across "
            << table.order_count() << " orders\n";
  return kExitOk;
}

int cmd_spoof(const CommandSpec& spec, const ExperimentConfig& cfg) {
  NGramModel attack = load_model(spec.attack);
  EwsTable table = load_ews(spec.ews);
  auto prompts = prompt_pool(spec.prompts, attack.vocab(), cfg.prompt_length);
  const double alpha = spec.alpha.value_or(cfg.alphas.front());
  const std::size_t n = spec.n.value_or(cfg.n_positive);
  const std::size_t length = spec.length.value_or(cfg.eval_length);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    SplitMix64 rng(derive_seed(cfg.seed, "spoof-text", i));
    TokenSeq text = spoof_generate(attack, table, alpha,
                                   prompts[i % prompts.size()], length,
                                   cfg.temperature, rng);
    out += attack.vocab().decode(text);
    out += '\n';
  }
  ensure_dir(spec.out_dir);
  write_text_file(join(spec.out_dir, "spoofed.txt"), out);
  write_manifest(spec.out_dir, cfg, {"spoofed.txt"});
  std::cout << "wrote " << n << " spoofed texts at alpha "
            << format_double(alpha) << "\n";
  return kExitOk;
}

void emit_pipeline_reports(const MetricsReport& report,
                           const ExperimentConfig& cfg,
                           const std::string& out_dir,
                           std::vector<std::string> extra_artifacts) {
  emit_report(report, out_dir);
  std::vector<std::string> artifacts = {"report.json", "report.csv",
                                        "series_median_p.csv",
                                        "series_perplexity.csv"};
  artifacts.insert(artifacts.end(), extra_artifacts.begin(),
                   extra_artifacts.end());
  write_manifest(out_dir, cfg, artifacts);
}

int cmd_eval(const CommandSpec& spec, const ExperimentConfig& cfg) {
  MetricsReport report = run_pipeline(cfg);
  ensure_dir(spec.out_dir);
  emit_pipeline_reports(report, cfg, spec.out_dir, {});
  std::cout << "report written to " << spec.out_dir << "\n";
  return kExitOk;
}

int cmd_sweep(const CommandSpec& spec, const ExperimentConfig& cfg) {
  std::vector<double> alphas = spec.alphas.empty() ? cfg.alphas : spec.alphas;
  MetricsReport report = alpha_sweep(cfg, alphas);
  ensure_dir(spec.out_dir);
  emit_pipeline_reports(report, cfg, spec.out_dir, {});
  std::cout << "swept " << alphas.size() << " alphas, report in "
            << spec.out_dir << "\n";
  return kExitOk;
}

int cmd_pipeline(const CommandSpec& spec, const ExperimentConfig& cfg) {
  PipelineResult result = run_pipeline_full(cfg);
  ensure_dir(spec.out_dir);
  save_model(*result.teacher, join(spec.out_dir, "teacher.bin"));
  save_model(*result.base, join(spec.out_dir, "base.bin"));
  save_model(*result.attack, join(spec.out_dir, "attack.bin"));
  save_model(*result.reference, join(spec.out_dir, "reference.bin"));
  save_model(*result.distilled.student, join(spec.out_dir, "student.bin"));
  save_ews(result.ews, join(spec.out_dir, "ews.bin"));
  save_corpus(result.dataset, join(spec.out_dir, "corpus.txt"));
  emit_pipeline_reports(result.report, cfg, spec.out_dir,
                        {"teacher.bin", "base.bin", "attack.bin",
                         "reference.bin", "student.bin", "ews.bin",
                         "corpus.txt", "corpus.txt.marks"});
  std::cout << "pipeline artifacts and report written to " << spec.out_dir
            << "\n";
  return kExitOk;
}

int dispatch(CommandSpec& spec) {
  ExperimentConfig cfg;
  if (!spec.config_path.empty()) cfg = load_config(spec.config_path);
  apply_overrides(spec, cfg);
  cfg.validate();
  if (spec.out_dir.empty()) spec.out_dir = default_out_dir(spec.command);

  if (spec.command == "fit") return cmd_fit(spec, cfg);
  if (spec.command == "watermark-gen") return cmd_watermark_gen(spec, cfg);
  if (spec.command == "detect") return cmd_detect(spec, cfg);
  if (spec.command == "distill") return cmd_distill(spec, cfg);
  if (spec.command == "extract") return cmd_extract(spec, cfg);
  if (spec.command == "spoof") return cmd_spoof(spec, cfg);
  if (spec.command == "eval") return cmd_eval(spec, cfg);
  if (spec.command == "sweep") return cmd_sweep(spec, cfg);
  if (spec.command == "pipeline") return cmd_pipeline(spec, cfg);
  fail(ErrorCode::Validation, "unknown command " + spec.command);
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io:
      return kExitRuntime;
    default:
      return kExitValidation;
  }
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  const std::string text = read_text_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Format, path + ": " + e.what());
  }
  return ExperimentConfig::from_json(j);
}

void apply_overrides(const CommandSpec& spec, ExperimentConfig& config) {
  if (!spec.corpus.empty() && (spec.command == "eval" ||
                               spec.command == "sweep" ||
                               spec.command == "pipeline"))
    config.corpus_path = spec.corpus;
  if (spec.seed) config.seed = *spec.seed;
  if (spec.alpha) config.alphas = {*spec.alpha};
  if (spec.scheme) {
    if (*spec.scheme == "greenlist")
      config.watermark.scheme = Scheme::kGreenList;
    else if (*spec.scheme == "tournament")
      config.watermark.scheme = Scheme::kTournament;
    else
      fail(ErrorCode::Validation,
           "scheme must be greenlist or tournament, got " + *spec.scheme);
  }
  if (spec.tokenizer) {
    auto mode = tokenizer_mode_from_name(*spec.tokenizer);
    if (!mode)
      fail(ErrorCode::Validation, "unknown tokenizer " + *spec.tokenizer);
    config.tokenizer = *mode;
  }
  if (spec.max_vocab) config.max_vocab = *spec.max_vocab;
  if (spec.smoothing) config.smoothing = *spec.smoothing;
}

CommandSpec parse_args(int argc, const char* const* argv) {
  CommandSpec spec;
  CLI::App app{"watermark distillation and spoofing workbench", "wmlab"};
  build_app(app, spec);
  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::ParseError& e) {
    fail(ErrorCode::Validation, std::string("usage: ") + e.what());
  }
  spec.command = app.get_subcommands().front()->get_name();
  return spec;
}

int run_cli(int argc, const char* const* argv) {
  CommandSpec spec;
  CLI::App app{"watermark distillation and spoofing workbench", "wmlab"};
  build_app(app, spec);
  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  spec.command = app.get_subcommands().front()->get_name();
  try {
    return dispatch(spec);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace wmlab
