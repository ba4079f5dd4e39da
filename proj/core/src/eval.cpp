#include "procap/eval.hpp"

#include "procap/error.hpp"
#include "procap/tokenizer.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace procap {

namespace {

const char* kMetricNotes =
    "BLEU@4 is corpus-level. CIDEr-D uses document frequencies over the evaluated split, sigma 6, x10. "
    "METEOR-lite uses exact unigram matches only (no stemming or synonyms) and is not official METEOR. "
    "SPICE is not computed.";

void score_task(std::span<const EvalRecord> records, bool projection,
                std::map<std::string, MetricCell>& cells) {
  std::vector<ScoredCaption> all;
  for (const auto& r : records) {
    all.push_back(projection ? ScoredCaption{r.generated_proj, r.gt_proj} : ScoredCaption{r.generated_scene, r.gt_scene});
  }
  const std::vector<double> cider = cider_d_scores(all);

  std::set<std::string> subsets{kOverallSubset};
  for (const auto& r : records) subsets.insert(r.subset);
  for (const auto& subset : subsets) {
    std::vector<ScoredCaption> part;
    MetricCell cell;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (subset != kOverallSubset && records[i].subset != subset) continue;
      part.push_back(all[i]);
      cell.cider += cider[i];
      cell.meteor += meteor_lite(all[i].hypothesis, all[i].references);
    }
    cell.n = part.size();
    cell.cider /= static_cast<double>(cell.n);
    cell.meteor /= static_cast<double>(cell.n);
    cell.bleu4 = bleu4(part);
    cells[subset] = cell;
  }
}

bool matches_any(const std::string& hyp, const std::vector<std::string>& refs) {
  const std::string h = normalize_caption(hyp);
  for (const auto& r : refs) {
    if (normalize_caption(r) == h) return true;
  }
  return false;
}

}  // namespace

std::size_t EvalReport::cell_count() const {
  std::size_t n = 0;
  for (const auto& [task, subsets] : results) n += 3 * subsets.size();
  return n;
}

std::vector<EvalRecord> collect_records(const Dataset& data, const std::string& split, const CaptionSource& source) {
  const auto samples = data.split(split);
  if (samples.empty()) throw Error(ErrorCode::kEmptyEvalSplit, "split '" + split + "' has no samples");
  std::vector<EvalRecord> out;
  for (const SarSample* s : samples) {
    const DualCaption c = source(*s);
    const ProjectionSpec& src = data.source(s->source_id);
    EvalRecord r{s->sample_id, c.scene, c.projection, data.scene(s->scene_id).captions, src.captions, src.subset};
    if (r.gt_scene.empty() || r.gt_proj.empty()) {
      throw Error(ErrorCode::kEmptyRefs, "sample " + s->sample_id + " has an empty reference set");
    }
    out.push_back(std::move(r));
  }
  return out;
}

EvalReport score_records(std::span<const EvalRecord> records) {
  EvalReport report;
  score_task(records, false, report.results[kSceneTask]);
  score_task(records, true, report.results[kProjectionTask]);
  return report;
}

ExactMatch exact_match(std::span<const EvalRecord> records) {
  ExactMatch m;
  if (records.empty()) return m;
  for (const auto& r : records) {
    const bool s = matches_any(r.generated_scene, r.gt_scene);
    const bool p = matches_any(r.generated_proj, r.gt_proj);
    m.scene += s;
    m.projection += p;
    m.both += s && p;
  }
  const double n = static_cast<double>(records.size());
  m.scene /= n;
  m.projection /= n;
  m.both /= n;
  return m;
}

std::string report_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["meta"] = {{"checkpoint", report.checkpoint},
               {"kb", report.kb},
               {"manifest", report.manifest},
               {"split", report.split},
               {"decoding", report.decoding},
               {"metric_notes", kMetricNotes}};
  if (!report.provenance_json.empty()) j["meta"]["provenance"] = nlohmann::ordered_json::parse(report.provenance_json);
  nlohmann::ordered_json results = nlohmann::ordered_json::object();
  for (const auto& task : {kSceneTask, kProjectionTask}) {
    const auto it = report.results.find(task);
    if (it == report.results.end()) continue;
    for (const auto& [subset, c] : it->second) {
      results[task][subset] = {{"BLEU@4", c.bleu4}, {"METEOR-lite", c.meteor}, {"CIDEr-D", c.cider}, {"n", c.n}};
    }
  }
  j["results"] = std::move(results);
  return j.dump(2);
}

std::string report_table(const EvalReport& report) {
  std::ostringstream out;
  out << "# " << kMetricNotes << "\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %5s | %8s %8s %8s | %8s %8s %8s\n", "subset", "n", "S:B@4", "S:M-lite",
                "S:C-D", "P:B@4", "P:M-lite", "P:C-D");
  out << line;
  const auto scene = report.results.find(kSceneTask);
  const auto proj = report.results.find(kProjectionTask);
  if (scene == report.results.end() || proj == report.results.end()) return out.str();
  for (const auto& [subset, s] : scene->second) {
    const auto p = proj->second.find(subset);
    if (p == proj->second.end()) continue;
    std::snprintf(line, sizeof line, "%-14s %5zu | %8.4f %8.4f %8.4f | %8.4f %8.4f %8.4f\n", subset.c_str(), s.n,
                  s.bleu4, s.meteor, s.cider, p->second.bleu4, p->second.meteor, p->second.cider);
    out << line;
  }
  return out.str();
}

void write_report(const std::filesystem::path& path, const EvalReport& report) {
  const auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + p.string());
    out << text << '\n';
  };
  write(path, report_json(report));
  auto table_path = path;
  table_path.replace_extension(".txt");
  write(table_path, report_table(report));
}

}  // namespace procap
