#include "procap/error.hpp"
#include "procap/metrics.hpp"
#include "procap/tokenizer.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

using namespace procap;

namespace {

using Words = std::vector<std::string>;

std::map<std::string, int> grams(const Words& w, std::size_t n) {
  std::map<std::string, int> out;
  for (std::size_t i = 0; i + n <= w.size(); ++i) {
    std::string key;
    for (std::size_t k = 0; k < n; ++k) key += w[i + k] + "|";
    ++out[key];
  }
  return out;
}

double oracle_bleu(const std::vector<ScoredCaption>& corpus) {
  double match[4] = {}, total[4] = {};
  double hyp_len = 0, ref_len = 0;
  for (const auto& s : corpus) {
    const Words h = split_words(s.hypothesis);
    hyp_len += static_cast<double>(h.size());
    std::size_t best = 0;
    long best_diff = -1;
    for (const auto& r : s.references) {
      const std::size_t len = split_words(r).size();
      const long diff = std::labs(static_cast<long>(len) - static_cast<long>(h.size()));
      if (best_diff < 0 || diff < best_diff || (diff == best_diff && len < best)) {
        best = len;
        best_diff = diff;
      }
    }
    ref_len += static_cast<double>(best);
    for (std::size_t n = 1; n <= 4; ++n) {
      std::map<std::string, int> max_ref;
      for (const auto& r : s.references) {
        for (const auto& [g, c] : grams(split_words(r), n)) max_ref[g] = std::max(max_ref[g], c);
      }
      for (const auto& [g, c] : grams(h, n)) {
        match[n - 1] += std::min(c, max_ref[g]);
        total[n - 1] += c;
      }
    }
  }
  double log_p = 0;
  for (int n = 0; n < 4; ++n) {
    if (match[n] == 0) return 0.0;
    log_p += std::log(match[n] / total[n]) / 4.0;
  }
  const double bp = hyp_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  return bp * std::exp(log_p);
}

std::vector<double> oracle_cider(const std::vector<ScoredCaption>& corpus) {
  const double big_n = static_cast<double>(corpus.size());
  std::map<std::string, double> df;
  for (const auto& s : corpus) {
    std::set<std::string> seen;
    for (const auto& r : s.references) {
      for (std::size_t n = 1; n <= 4; ++n) {
        for (const auto& kv : grams(split_words(r), n)) seen.insert(kv.first);
      }
    }
    for (const auto& g : seen) df[g] += 1;
  }
  auto weight = [&](const std::string& g, int c) {
    const double d = df.count(g) ? df[g] : 0.0;
    return c * std::log(big_n / std::max(1.0, d));
  };
  std::vector<double> out;
  for (const auto& s : corpus) {
    const Words h = split_words(s.hypothesis);
    double score = 0;
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto hg = grams(h, n);
      double hn = 0;
      for (const auto& [g, c] : hg) hn += weight(g, c) * weight(g, c);
      hn = std::sqrt(hn);
      double per_ref = 0;
      for (const auto& ref : s.references) {
        const Words r = split_words(ref);
        const auto rg = grams(r, n);
        double rn = 0, dot = 0;
        for (const auto& [g, c] : rg) rn += weight(g, c) * weight(g, c);
        rn = std::sqrt(rn);
        for (const auto& [g, c] : hg) {
          if (rg.count(g)) dot += std::min(weight(g, c), weight(g, rg.at(g))) * weight(g, rg.at(g));
        }
        const double dl = static_cast<double>(h.size()) - static_cast<double>(r.size());
        if (hn > 0 && rn > 0) per_ref += dot / (hn * rn) * std::exp(-dl * dl / 72.0);
      }
      score += per_ref / static_cast<double>(s.references.size());
    }
    out.push_back(score * 10.0 / 4.0);
  }
  return out;
}

// Exhaustive search over injective word alignments.
void enumerate(const Words& h, const Words& r, std::size_t i, std::vector<int>& map, std::vector<bool>& used,
               int& best_m, int& best_c) {
  if (i == h.size()) {
    int m = 0, c = 0;
    for (std::size_t k = 0; k < h.size(); ++k) {
      if (map[k] < 0) continue;
      ++m;
      if (!(k > 0 && map[k - 1] >= 0 && map[k - 1] + 1 == map[k])) ++c;
    }
    if (m > best_m || (m == best_m && c < best_c)) {
      best_m = m;
      best_c = c;
    }
    return;
  }
  map[i] = -1;
  enumerate(h, r, i + 1, map, used, best_m, best_c);
  for (std::size_t j = 0; j < r.size(); ++j) {
    if (used[j] || r[j] != h[i]) continue;
    used[j] = true;
    map[i] = static_cast<int>(j);
    enumerate(h, r, i + 1, map, used, best_m, best_c);
    used[j] = false;
  }
  map[i] = -1;
}

double oracle_meteor(const std::string& hyp, const std::string& ref) {
  const Words h = split_words(hyp), r = split_words(ref);
  std::vector<int> map(h.size(), -1);
  std::vector<bool> used(r.size(), false);
  int m = 0, c = 0;
  enumerate(h, r, 0, map, used, m, c);
  if (m == 0) return 0.0;
  const double p = double(m) / double(h.size()), rc = double(m) / double(r.size());
  const double f = p * rc / (0.9 * p + 0.1 * rc);
  return f * (1.0 - 0.5 * std::pow(double(c) / double(m), 3));
}

std::string random_sentence(std::mt19937_64& rng, int min_len, int max_len) {
  static const Words pool{"a", "the", "red", "cat", "dog", "sat", "on", "mat", "blue", "sky"};
  std::uniform_int_distribution<int> len(min_len, max_len);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::string s;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + pool[pick(rng)];
  return s;
}

std::vector<ScoredCaption> random_corpus(std::mt19937_64& rng, int samples) {
  std::vector<ScoredCaption> c;
  for (int i = 0; i < samples; ++i) {
    ScoredCaption s{random_sentence(rng, 3, 9), {}};
    const int refs = 1 + static_cast<int>(rng() % 3);
    for (int k = 0; k < refs; ++k) s.references.push_back(random_sentence(rng, 3, 9));
    c.push_back(s);
  }
  return c;
}

}  // namespace

TEST(Bleu, IdenticalCaptionsScoreOne) {
  const std::vector<ScoredCaption> c{{"A red cat sat on the mat.", {"a red cat sat on the mat"}}};
  EXPECT_DOUBLE_EQ(bleu4(c), 1.0);
}

TEST(Bleu, HandComputedValues) {
  const std::vector<ScoredCaption> partial{{"a b c d e", {"a b c d f"}}};
  EXPECT_NEAR(bleu4(partial), std::pow(0.8 * 0.75 * (2.0 / 3.0) * 0.5, 0.25), 1e-12);
  const std::vector<ScoredCaption> short_hyp{{"a b c d", {"a b c d e f"}}};
  EXPECT_NEAR(bleu4(short_hyp), std::exp(-0.5), 1e-12);
  const std::vector<ScoredCaption> no_4gram{{"the cat sat on the mat", {"the cat is on the mat"}}};
  EXPECT_EQ(bleu4(no_4gram), 0.0);
  // Reference lengths 3 and 5 tie for a 4-word hypothesis; the shorter wins and there is no penalty.
  const std::vector<ScoredCaption> tie{{"a b c d", {"a b c", "a b c d e"}}};
  EXPECT_NEAR(bleu4(tie), 1.0, 1e-12);
}

TEST(Bleu, MatchesIndependentOracle) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const auto c = random_corpus(rng, 1 + trial % 6);
    EXPECT_NEAR(bleu4(c), oracle_bleu(c), 1e-12) << trial;
  }
  EXPECT_THROW(bleu4(std::vector<ScoredCaption>{}), Error);
}

TEST(Cider, DisjointPerfectCorpusScoresTen) {
  const std::vector<ScoredCaption> c{{"a b c d", {"a b c d"}}, {"e f g h", {"e f g h"}}};
  const auto s = cider_d_scores(c);
  EXPECT_NEAR(s[0], 10.0, 1e-12);
  EXPECT_NEAR(s[1], 10.0, 1e-12);
  EXPECT_NEAR(cider_d(c), 10.0, 1e-12);
}

TEST(Cider, SharedNgramsCarryNoWeight) {
  // Every n-gram appears in both reference sets, so every idf is zero.
  const std::vector<ScoredCaption> c{{"a b", {"a b"}}, {"a b", {"a b"}}};
  EXPECT_EQ(cider_d(c), 0.0);
}

TEST(Cider, LengthPenaltyAndClipping) {
  const std::vector<ScoredCaption> c{{"x x", {"x"}}, {"y", {"y"}}};
  // Unigram cosine: clipped dot ln2*ln2 over (2 ln2)(ln2) = 0.5, length gap 1.
  EXPECT_NEAR(cider_d_scores(c)[0], 10.0 * 0.5 * std::exp(-1.0 / 72.0) / 4.0, 1e-12);
}

TEST(Cider, MatchesIndependentOracle) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const auto c = random_corpus(rng, 2 + trial % 7);
    const auto got = cider_d_scores(c);
    const auto want = oracle_cider(c);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-10) << trial;
  }
}

TEST(Cider, NeedsTwoSamples) {
  const std::vector<ScoredCaption> one{{"a", {"a"}}};
  try {
    cider_d(one);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCorpusTooSmall);
  }
}

TEST(Meteor, HandComputedValues) {
  EXPECT_NEAR(meteor_lite("the red cat", {"the red cat"}), 1.0 - 0.5 / 27.0, 1e-12);
  EXPECT_NEAR(meteor_lite("cat red the", {"the red cat"}), 0.5, 1e-12);
  EXPECT_NEAR(meteor_lite("the cat sat", {"the cat sat on mat"}), 0.625 * (1.0 - 1.0 / 54.0), 1e-12);
  EXPECT_EQ(meteor_lite("dog", {"the red cat"}), 0.0);
  EXPECT_NEAR(meteor_lite("the red cat", {"dog", "the red cat"}), 1.0 - 0.5 / 27.0, 1e-12);
}

TEST(Meteor, ReorderingLowersScore) {
  EXPECT_LT(meteor_lite("red the cat", {"the red cat"}), meteor_lite("the red cat", {"the red cat"}));
}

TEST(Meteor, AlignmentPrefersFewestChunks) {
  const auto a = meteor_align(split_words("the cat the mat"), split_words("the mat the cat"));
  EXPECT_EQ(a.matches, 4);
  EXPECT_EQ(a.chunks, 2);
}

TEST(Meteor, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const std::string h = random_sentence(rng, 1, 7), r = random_sentence(rng, 1, 7);
    EXPECT_NEAR(meteor_lite(h, {r}), oracle_meteor(h, r), 1e-12) << h << " | " << r;
  }
}
