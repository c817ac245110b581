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

#ifndef WMLAB_SERIALIZE_HPP_
#define WMLAB_SERIALIZE_HPP_

#include <string>

#include <json.hpp>

#include "wmlab/distill.hpp"
#include "wmlab/eval.hpp"
#include "wmlab/extract.hpp"
#include "wmlab/ngram.hpp"

namespace wmlab {

// Binary artifacts are little-endian with explicit byte packing, carry a
// magic string plus format version, and embed the content hashes they were
// written with; every load recomputes and compares, so tampering or version
// drift is a hard Error(Format). Saving is canonical: save(load(f)) equals f
// byte for byte.

void save_model(const NGramModel& model, const std::string& path);
NGramModel load_model(const std::string& path);

void save_ews(const EwsTable& table, const std::string& path);
EwsTable load_ews(const std::string& path);

/// The corpus lives as text: a provenance header (commented lines), then one
/// record per line as "prompt ids | completion ids". The per-token marks go
/// to a sidecar file at path + ".marks".
void save_corpus(const WatermarkedCorpus& corpus, const std::string& path);
WatermarkedCorpus load_corpus(const std::string& path);

nlohmann::json detection_to_json(const DetectionReport& report);

/// Writes manifest.json into the directory: tool version, seed, redacted
/// config, config hash, and the content hash of every artifact file listed
/// (paths relative to the directory).
void write_manifest(const std::string& directory,
                    const ExperimentConfig& config,
                    const std::vector<std::string>& artifact_files);

std::string read_text_file(const std::string& path);   // Error(Io)
void write_text_file(const std::string& path, const std::string& body);

}  // namespace wmlab

#endif  // WMLAB_SERIALIZE_HPP_
