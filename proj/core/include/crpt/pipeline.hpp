#pragma once

#include <string>

#include "crpt/config.hpp"

namespace crpt::pipeline {

struct PipelineResult {
  std::string run_dir;        // <out_root>/<config-hash prefix>
  std::string manifest_path;  // run_dir/manifest.json
};

// Executes the configured phases in canonical order
// (collect -> pretrain -> finetune -> train -> metrics) and writes a
// manifest recording the resolved config text, its hash, phase seeds and
// git-style blob hashes of every artifact. Re-running the same config
// reproduces identical artifacts and an identical manifest; nothing
// time-dependent is recorded.
PipelineResult run_pipeline(const config::RunConfig& cfg, const std::string& out_root);

// Re-executes the run recorded in a manifest (its embedded config text).
PipelineResult run_from_manifest(const std::string& manifest_path, const std::string& out_root);

}  // namespace crpt::pipeline
