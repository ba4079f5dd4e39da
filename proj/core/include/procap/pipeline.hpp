#pragma once

// File-level stages behind the CLI subcommands. Each stage reads and writes
// artifacts on disk and embeds the run's provenance in what it writes.

#include "procap/config.hpp"
#include "procap/eval.hpp"
#include "procap/semantic_memory.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace procap {

namespace fs = std::filesystem;

/// Writes the dataset under `out_dir` (manifest.json plus images).
Dataset run_synth(const RunConfig& cfg, const fs::path& out_dir);

/// Distinct captions of every scene and source used by the training split,
/// in manifest order.
std::vector<std::string> training_captions(const Dataset& data);

struct PretrainOutput {
  fs::path checkpoint;
  std::vector<double> epoch_loss;
};

/// Builds the vocabulary from training captions, pretrains the decoder and
/// writes `pretrained.ckpt` and `pretrain_log.csv` under `out_dir`.
PretrainOutput run_pretrain(const RunConfig& cfg, const fs::path& manifest, const fs::path& out_dir);

/// Keys from the checkpoint's projection branch applied to each source image,
/// values from the sources' names.
KnowledgeBase run_kb_build(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& manifest,
                           const fs::path& out_path);

struct TrainOutput {
  fs::path checkpoint;
  fs::path loss_log;
  std::vector<TrainLogRow> log;
};

/// End-to-end training. Starts from `init` when given (its model section wins
/// over cfg.model), otherwise from a fresh model with a vocabulary built from
/// the training captions. Writes model.ckpt, loss_log.csv and config.json.
TrainOutput run_train(const RunConfig& cfg, const fs::path& manifest, const std::optional<fs::path>& kb,
                      const std::optional<fs::path>& init, const fs::path& out_dir);

struct EvalOutput {
  EvalReport report;
  std::vector<EvalRecord> records;
};

/// Greedy or beam decoding per cfg.eval; `kb` absent or `null_context` set
/// gives the null-name variant.
EvalOutput run_eval(const RunConfig& cfg, const fs::path& checkpoint, const std::optional<fs::path>& kb,
                    const fs::path& manifest, const std::optional<fs::path>& out_path, bool null_context = false);

std::string run_caption(const RunConfig& cfg, const fs::path& checkpoint, const std::optional<fs::path>& kb,
                        const fs::path& image, bool projection_task);

}  // namespace procap
