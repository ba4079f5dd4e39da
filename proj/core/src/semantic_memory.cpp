#include "procap/semantic_memory.hpp"

#include "procap/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace procap {

using json = nlohmann::json;

void KnowledgeBase::validate() const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    if (e.key.size() != dim) {
      throw Error(ErrorCode::kSchemaViolation, "entry " + std::to_string(i) + " key has the wrong length");
    }
    if (e.name.empty()) throw Error(ErrorCode::kSchemaViolation, "entry " + std::to_string(i) + " has no name");
    const double norm = e.key.norm();
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > kKeyNormTolerance) {
      throw Error(ErrorCode::kNormViolation,
                  "entry " + std::to_string(i) + " ('" + e.name + "') has key norm " + std::to_string(norm));
    }
  }
}

Eigen::VectorXd pooled_direction(const ag::Matrix& rows) {
  Eigen::VectorXd mean = rows.colwise().mean().transpose();
  const double norm = mean.norm();
  if (norm > 0.0) mean /= norm;
  return mean;
}

KnowledgeBase make_knowledge_base(const std::vector<ag::Matrix>& query_sets,
                                  const std::vector<std::string>& names) {
  if (query_sets.empty()) throw Error(ErrorCode::kEmptyRefs, "no reference images");
  if (query_sets.size() != names.size()) {
    throw Error(ErrorCode::kInvalidArgument, "one name per reference is required");
  }
  KnowledgeBase kb;
  kb.dim = static_cast<int>(query_sets.front().cols());
  for (std::size_t i = 0; i < query_sets.size(); ++i) {
    if (query_sets[i].cols() != kb.dim) throw Error(ErrorCode::kDimensionMismatch, "reference widths differ");
    Eigen::VectorXd key = pooled_direction(query_sets[i]);
    if (key.norm() == 0.0) throw Error(ErrorCode::kNormViolation, "reference '" + names[i] + "' pooled to zero");
    // Keys live at 32-bit precision so that save/load is lossless.
    for (Eigen::Index j = 0; j < key.size(); ++j) key(j) = static_cast<float>(key(j));
    kb.entries.push_back({std::move(key), names[i]});
  }
  kb.validate();
  return kb;
}

RetrievedContext retrieve(const ag::Matrix& query_set, const KnowledgeBase& kb, int k) {
  if (k < 1) throw Error(ErrorCode::kInvalidArgument, "K must be >= 1");
  if (kb.entries.empty()) throw Error(ErrorCode::kEmptyKnowledgeBase, "knowledge base has no entries");
  if (query_set.cols() != kb.dim) {
    throw Error(ErrorCode::kDimensionMismatch, "query width " + std::to_string(query_set.cols()) +
                                                   " vs key width " + std::to_string(kb.dim));
  }
  const Eigen::VectorXd q = pooled_direction(query_set);
  std::vector<double> scores(kb.entries.size());
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] = q.dot(kb.entries[i].key);

  // Max-heap on (score, -index); popped lazily until K distinct names are out.
  auto worse = [&](int a, int b) {
    const auto ua = static_cast<std::size_t>(a);
    const auto ub = static_cast<std::size_t>(b);
    if (scores[ua] != scores[ub]) return scores[ua] < scores[ub];
    return a > b;
  };
  std::vector<int> heap(kb.entries.size());
  for (std::size_t i = 0; i < heap.size(); ++i) heap[i] = static_cast<int>(i);
  std::make_heap(heap.begin(), heap.end(), worse);

  RetrievedContext ctx;
  std::set<std::string> seen;
  while (!heap.empty() && static_cast<int>(ctx.names.size()) < k) {
    std::pop_heap(heap.begin(), heap.end(), worse);
    const int idx = heap.back();
    heap.pop_back();
    const auto& entry = kb.entries[static_cast<std::size_t>(idx)];
    if (!seen.insert(entry.name).second) continue;
    ctx.names.push_back(entry.name);
    ctx.scores.push_back(scores[static_cast<std::size_t>(idx)]);
    ctx.indices.push_back(idx);
  }
  while (static_cast<int>(ctx.names.size()) < k) {
    ctx.names.emplace_back();
    ctx.scores.push_back(-1.0);
    ctx.indices.push_back(-1);
  }
  return ctx;
}

RetrievedContext null_context(int k) {
  RetrievedContext ctx;
  ctx.names.assign(static_cast<std::size_t>(k), std::string());
  ctx.scores.assign(static_cast<std::size_t>(k), -1.0);
  ctx.indices.assign(static_cast<std::size_t>(k), -1);
  return ctx;
}

namespace {

std::string float_text(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), static_cast<float>(v));
  return std::string(buf, res.ptr);
}

}  // namespace

void save_kb(const std::filesystem::path& path, const KnowledgeBase& kb, const std::string& provenance_json) {
  kb.validate();
  // Written by hand so every key component is the shortest text of its
  // 32-bit float value.
  std::ostringstream os;
  os << "{\n  \"dim\": " << kb.dim << ",\n  \"entries\": [";
  for (std::size_t i = 0; i < kb.entries.size(); ++i) {
    const auto& e = kb.entries[i];
    os << (i == 0 ? "\n" : ",\n") << "    {\"name\": " << json(e.name).dump() << ", \"key\": [";
    for (Eigen::Index j = 0; j < e.key.size(); ++j) os << (j == 0 ? "" : ", ") << float_text(e.key(j));
    os << "]}";
  }
  os << (kb.entries.empty() ? "]" : "\n  ]");
  if (!provenance_json.empty()) os << ",\n  \"provenance\": " << json::parse(provenance_json).dump();
  os << "\n}\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  out << os.str();
  if (!out) throw Error(ErrorCode::kIoFailure, "failed writing " + path.string());
}

KnowledgeBase load_kb(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kMissingFile, path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kSchemaViolation, path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("dim") || !doc["dim"].is_number_integer() || !doc.contains("entries") ||
      !doc["entries"].is_array()) {
    throw Error(ErrorCode::kSchemaViolation, path.string() + ": expected {dim, entries}");
  }
  KnowledgeBase kb;
  kb.dim = doc["dim"].get<int>();
  if (kb.dim <= 0) throw Error(ErrorCode::kSchemaViolation, "dim must be positive");
  for (const auto& e : doc["entries"]) {
    if (!e.is_object() || !e.contains("name") || !e["name"].is_string() || !e.contains("key") ||
        !e["key"].is_array()) {
      throw Error(ErrorCode::kSchemaViolation, "entry must be {name: string, key: [numbers]}");
    }
    KnowledgeEntry entry;
    entry.name = e["name"].get<std::string>();
    entry.key.resize(static_cast<Eigen::Index>(e["key"].size()));
    for (std::size_t j = 0; j < e["key"].size(); ++j) {
      if (!e["key"][j].is_number()) throw Error(ErrorCode::kSchemaViolation, "key components must be numbers");
      entry.key(static_cast<Eigen::Index>(j)) = static_cast<float>(e["key"][j].get<double>());
    }
    kb.entries.push_back(std::move(entry));
  }
  kb.validate();
  return kb;
}

}  // namespace procap
