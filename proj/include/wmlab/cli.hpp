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

#ifndef WMLAB_CLI_HPP_
#define WMLAB_CLI_HPP_

#include <optional>
#include <string>
#include <vector>

#include "wmlab/eval.hpp"

namespace wmlab {

// Exit codes: tooling scripts branch on these, so they are part of the
// interface.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;       // bad flags or subcommand
inline constexpr int kExitValidation = 3;  // well-formed input, bad content
inline constexpr int kExitRuntime = 4;     // I/O and everything else

/// Parsed command line. Optional fields are flag overrides that win over
/// config-file values, which in turn win over built-in defaults.
struct CommandSpec {
  std::string command;
  std::string config_path;
  std::string out_dir;

  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::vector<double> alphas;  // sweep grid
  std::optional<std::string> scheme;

  std::string corpus;   // plain-text corpus path
  std::string model;    // single-model commands
  std::string base;     // distill/extract
  std::string student;  // extract
  std::string attack;   // spoof
  std::string ews;      // spoof
  std::string input;    // detect
  std::string prompts;  // prompt pool file

  std::optional<std::size_t> order;
  std::optional<std::size_t> n;
  std::optional<std::size_t> length;
  std::optional<std::size_t> max_vocab;
  std::optional<double> mix;
  std::optional<double> smoothing;
  std::optional<std::string> tokenizer;
  bool exact_small = false;
};

/// Parses without executing. Throws Error(Validation) with the usage message
/// on bad input; run_cli maps that to kExitUsage itself.
CommandSpec parse_args(int argc, const char* const* argv);

/// Reads and validates a JSON config file; missing keys take the documented
/// defaults.
ExperimentConfig load_config(const std::string& path);

/// Applies the flag overrides of a parsed command onto a config.
void apply_overrides(const CommandSpec& spec, ExperimentConfig& config);

/// Full tool entry point; never throws.
int run_cli(int argc, const char* const* argv);

}  // namespace wmlab

#endif  // WMLAB_CLI_HPP_
