#pragma once

// Dual-captioning evaluation: scene and projection hypotheses are scored
// against their own reference sets and aggregated per subset.

#include "procap/metrics.hpp"
#include "procap/model.hpp"
#include "procap/sar_compose.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace procap {

struct EvalRecord {
  std::string sample_id;
  std::string generated_scene;
  std::string generated_proj;
  std::vector<std::string> gt_scene;
  std::vector<std::string> gt_proj;
  std::string subset;
};

struct MetricCell {
  double bleu4 = 0.0;
  double meteor = 0.0;
  double cider = 0.0;
  std::size_t n = 0;
};

inline const std::string kOverallSubset = "overall";
inline const std::string kSceneTask = "scene";
inline const std::string kProjectionTask = "projection";

struct EvalReport {
  /// task -> subset -> scores. Subsets include "overall".
  std::map<std::string, std::map<std::string, MetricCell>> results;
  std::string checkpoint;
  std::string kb;
  std::string manifest;
  std::string split;
  std::string decoding = "greedy";
  std::string provenance_json;

  std::size_t cell_count() const;
};

using CaptionSource = std::function<DualCaption(const SarSample&)>;

/// Generates both captions for every sample of `split`. Throws EmptyEvalSplit.
std::vector<EvalRecord> collect_records(const Dataset& data, const std::string& split, const CaptionSource& source);

/// Document frequencies for CIDEr-D come from all records of a task; the
/// per-sample scores are then averaged within each subset. BLEU@4 is
/// corpus-level per subset.
EvalReport score_records(std::span<const EvalRecord> records);

struct ExactMatch {
  double scene = 0.0;
  double projection = 0.0;
  double both = 0.0;  // fraction of samples with both captions exact
};

/// A hypothesis matches when its normalized text equals a normalized reference.
ExactMatch exact_match(std::span<const EvalRecord> records);

std::string report_json(const EvalReport& report);
/// Plain-text table: one row per subset, B@4 / M-lite / C-D per task.
std::string report_table(const EvalReport& report);
/// Writes `path` (JSON) and the table next to it with a .txt extension.
void write_report(const std::filesystem::path& path, const EvalReport& report);

}  // namespace procap
