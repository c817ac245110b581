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

// Standalone generator for the synthetic demo corpus: topical lines over a
// Zipf-weighted invented lexicon, enough structure for n-gram models to have
// something to learn. Writes to stdout or --out.

#include <iostream>

#include <CLI11.hpp>

#include "wmlab/corpusgen.hpp"
#include "wmlab/serialize.hpp"

int main(int argc, char** argv) {
  CLI::App app{"synthetic corpus generator", "wmlab-make-corpus"};
  wmlab::SynthParams params;
  std::string out_path;
  app.add_option("--words", params.n_words, "lexicon size");
  app.add_option("--lines", params.n_lines, "number of lines");
  app.add_option("--zipf", params.zipf_exponent, "Zipf exponent");
  app.add_option("--topics", params.topics, "number of topics");
  app.add_option("--affinity", params.affinity, "topic weight boost");
  app.add_option("--min-words", params.min_line_words, "shortest line");
  app.add_option("--max-words", params.max_line_words, "longest line");
  app.add_option("--seed", params.seed, "generator seed");
  app.add_option("--out", out_path, "output file (stdout when omitted)");
  CLI11_PARSE(app, argc, argv);

  try {
    params.validate();
    const std::string corpus = wmlab::synth_corpus(params);
    if (out_path.empty())
      std::cout << corpus;
    else
      wmlab::write_text_file(out_path, corpus);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
