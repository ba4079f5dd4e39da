#pragma once

// Binary checkpoint: u64 little-endian header length, a JSON header (tensor
// table, vocabulary, model config, step, provenance) padded to 8 bytes, then
// a little-endian float32 payload.

#include "procap/model.hpp"

#include <filesystem>
#include <string>

namespace procap {

void save_checkpoint(const std::filesystem::path& path, const ProCapModel& model, long step,
                     const std::string& provenance_json = "");

struct LoadedCheckpoint {
  ProCapModel model;
  long step = 0;
  std::string provenance_json;  // empty when none was stored
};

/// Throws CheckpointLoadFailure (unreadable file), SchemaViolation (bad
/// header) or ShapeMismatch (tensor table disagrees with the model or payload).
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace procap
