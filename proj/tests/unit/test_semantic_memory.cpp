#include "fixtures.hpp"

#include "procap/error.hpp"
#include "procap/semantic_memory.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace procap;

namespace {

Eigen::VectorXd unit(int dim, int axis) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
  v(axis) = 1.0;
  return v;
}

ag::Matrix as_query(const Eigen::VectorXd& v) { return v.transpose(); }

}  // namespace

TEST(Retrieve, ExactKeyComesFirst) {
  KnowledgeBase kb{6, {}};
  for (int i = 0; i < 6; ++i) kb.entries.push_back({unit(6, i), "n" + std::to_string(i)});
  const RetrievedContext c = retrieve(as_query(unit(6, 3)), kb, 3);
  EXPECT_EQ(c.names[0], "n3");
  EXPECT_DOUBLE_EQ(c.scores[0], 1.0);
  EXPECT_EQ(c.indices[0], 3);
  // Remaining keys tie at 0: lower index first.
  EXPECT_EQ(c.indices[1], 0);
  EXPECT_EQ(c.indices[2], 1);
}

TEST(Retrieve, PadsWithNullNames) {
  KnowledgeBase kb{5, {}};
  for (int i = 0; i < 5; ++i) kb.entries.push_back({unit(5, i), "n" + std::to_string(i)});
  const RetrievedContext c = retrieve(as_query(unit(5, 0)), kb);
  ASSERT_EQ(c.names.size(), 9u);
  for (int i = 5; i < 9; ++i) {
    EXPECT_EQ(c.names[i], "");
    EXPECT_EQ(c.scores[i], -1.0);
    EXPECT_EQ(c.indices[i], -1);
  }
}

TEST(Retrieve, DeduplicatesNamesKeepingBestScore) {
  KnowledgeBase kb{3, {}};
  kb.entries.push_back({unit(3, 0), "cup"});
  kb.entries.push_back({unit(3, 1), "cup"});
  kb.entries.push_back({unit(3, 2), "pen"});
  const RetrievedContext c = retrieve(as_query(unit(3, 1)), kb, 3);
  EXPECT_EQ(c.names, (std::vector<std::string>{"cup", "pen", ""}));
  EXPECT_EQ(c.indices[0], 1);
}

TEST(Retrieve, ScaleInvariantRanking) {
  std::mt19937_64 rng(5);
  std::vector<ag::Matrix> sets;
  std::vector<std::string> names;
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 12; ++i) {
    ag::Matrix m(4, 16);
    for (Eigen::Index j = 0; j < m.size(); ++j) m.data()[j] = n(rng);
    sets.push_back(m);
    names.push_back("obj" + std::to_string(i % 7));
  }
  const KnowledgeBase kb = make_knowledge_base(sets, names);
  ag::Matrix q(3, 16);
  for (Eigen::Index j = 0; j < q.size(); ++j) q.data()[j] = n(rng);
  EXPECT_EQ(retrieve(q, kb).names, retrieve(q * 7.5, kb).names);
}

TEST(Retrieve, ErrorsAndNullContext) {
  KnowledgeBase empty{4, {}};
  try {
    retrieve(ag::Matrix::Ones(1, 4), empty);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyKnowledgeBase);
  }
  KnowledgeBase kb{4, {{unit(4, 0), "a"}}};
  EXPECT_THROW(retrieve(ag::Matrix::Ones(1, 5), kb), Error);
  const RetrievedContext nc = null_context();
  EXPECT_EQ(nc.names, std::vector<std::string>(9, ""));
}

TEST(KnowledgeBase, KeysAreUnitNormAndOrdered) {
  std::vector<ag::Matrix> sets;
  std::vector<std::string> names;
  for (int i = 0; i < 10; ++i) {
    sets.push_back(ag::Matrix::Constant(3, 8, 0.1 * (i + 1)) + ag::Matrix::Identity(3, 8));
    names.push_back("n" + std::to_string(i));
  }
  sets.push_back(sets.front());
  names.push_back("alias");
  const KnowledgeBase kb = make_knowledge_base(sets, names);
  ASSERT_EQ(kb.entries.size(), 11u);
  for (std::size_t i = 0; i < kb.entries.size(); ++i) {
    EXPECT_NEAR(kb.entries[i].key.norm(), 1.0, 1e-6);
    EXPECT_EQ(kb.entries[i].name, names[i]);
  }
  try {
    make_knowledge_base({}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyRefs);
  }
}

TEST(KnowledgeBase, SaveLoadRoundTrip) {
  std::vector<ag::Matrix> sets{ag::Matrix::Random(4, 8), ag::Matrix::Random(4, 8)};
  const KnowledgeBase kb = make_knowledge_base(sets, {"lamp", "book"});
  const auto path = fx::temp_dir("kb") / "kb.json";
  save_kb(path, kb);
  const KnowledgeBase back = load_kb(path);
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_EQ(back.dim, 8);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back.entries[i].name, kb.entries[i].name);
    EXPECT_EQ(back.entries[i].key, kb.entries[i].key);
  }
}

TEST(KnowledgeBase, NonUnitKeyRejected) {
  const auto path = fx::temp_dir("kb_norm") / "kb.json";
  std::ofstream(path) << R"({"dim": 2, "entries": [{"name": "x", "key": [0.5, 0.5]}]})";
  try {
    load_kb(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNormViolation);
  }
}

TEST(KnowledgeBase, EmptyEntriesFailOnRetrieve) {
  const auto path = fx::temp_dir("kb_empty") / "kb.json";
  std::ofstream(path) << R"({"dim": 2, "entries": []})";
  const KnowledgeBase kb = load_kb(path);
  try {
    retrieve(ag::Matrix::Ones(1, 2), kb);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyKnowledgeBase);
  }
}
