#pragma once

// Run configuration shared by every CLI subcommand. JSON on disk; unknown
// keys are rejected so a snapshot always round-trips exactly.

#include "procap/decoder.hpp"
#include "procap/model.hpp"
#include "procap/sar_compose.hpp"
#include "procap/trainer.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace procap {

struct EvalConfig {
  std::string split = "eval";
  GenerateOptions generate;
};

struct RunConfig {
  std::uint64_t seed = 0;
  SynthConfig synth = default_synth_config();
  ModelConfig model;
  TrainConfig train;
  PretrainConfig pretrain;
  EvalConfig eval;
};

/// Parses a JSON object; every section and key is optional, unknown keys
/// throw SchemaViolation. Seeds inside `model` and `train` are derived from
/// the top-level seed.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Canonical JSON snapshot of the resolved configuration.
std::string run_config_json(const RunConfig& cfg);

/// Sets model and training seeds from cfg.seed.
void apply_seed(RunConfig& cfg, std::uint64_t seed);

/// Provenance object embedded in every artifact: {"tool", "version", "seed",
/// "config"}.
std::string provenance_json(const RunConfig& cfg);

}  // namespace procap
