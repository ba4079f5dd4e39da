#pragma once

// External key-value memory of (unit-norm visual key, object name) pairs and
// top-K name retrieval by cosine similarity.

#include "procap/autograd.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <string>
#include <vector>

namespace procap {

struct KnowledgeEntry {
  Eigen::VectorXd key;  // unit L2 norm
  std::string name;
};

struct KnowledgeBase {
  int dim = 0;
  std::vector<KnowledgeEntry> entries;

  /// Throws NormViolation / SchemaViolation when an entry breaks the invariants.
  void validate() const;
};

/// Top-K names, padded with the null name "" (score -1) when fewer distinct
/// names exist.
struct RetrievedContext {
  std::vector<std::string> names;
  std::vector<double> scores;
  std::vector<int> indices;  // entry index, -1 for padding
};

inline constexpr int kDefaultTopK = 9;
inline constexpr double kKeyNormTolerance = 1e-6;

/// Mean of the rows of `rows`, L2-normalised. A zero mean stays zero.
Eigen::VectorXd pooled_direction(const ag::Matrix& rows);

/// Builds entries from per-reference query sets; key_i is the normalised
/// row-mean of the i-th set, rounded to 32-bit floats. Throws EmptyRefs.
KnowledgeBase make_knowledge_base(const std::vector<ag::Matrix>& query_sets,
                                  const std::vector<std::string>& names);

/// Cosine top-K with name de-duplication (highest score wins, ties to the
/// lower entry index).
RetrievedContext retrieve(const ag::Matrix& query_set, const KnowledgeBase& kb, int k = kDefaultTopK);

/// K null names; what the model sees when retrieval is ablated.
RetrievedContext null_context(int k = kDefaultTopK);

void save_kb(const std::filesystem::path& path, const KnowledgeBase& kb,
             const std::string& provenance_json = "");
KnowledgeBase load_kb(const std::filesystem::path& path);

}  // namespace procap
