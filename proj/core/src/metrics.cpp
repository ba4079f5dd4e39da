#include "procap/metrics.hpp"

#include "procap/error.hpp"
#include "procap/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

namespace procap {

namespace {

using Words = std::vector<std::string>;
using NGramCounts = std::map<Words, int>;

NGramCounts ngrams(const Words& w, std::size_t n) {
  NGramCounts out;
  for (std::size_t i = 0; i + n <= w.size(); ++i) ++out[Words(w.begin() + static_cast<std::ptrdiff_t>(i),
                                                               w.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return out;
}

}  // namespace

double bleu4(std::span<const ScoredCaption> corpus) {
  if (corpus.empty()) throw Error(ErrorCode::kEmptyCorpus, "BLEU needs at least one sample");
  std::array<double, 4> clipped{}, total{};
  double hyp_len = 0.0, ref_len = 0.0;
  for (const auto& item : corpus) {
    const Words h = split_words(item.hypothesis);
    std::vector<Words> refs;
    for (const auto& r : item.references) refs.push_back(split_words(r));
    if (refs.empty()) throw Error(ErrorCode::kEmptyRefs, "BLEU sample without references");
    hyp_len += static_cast<double>(h.size());
    std::size_t best = refs.front().size();
    for (const auto& r : refs) {
      const auto d = [&](std::size_t len) { return len > h.size() ? len - h.size() : h.size() - len; };
      if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
    }
    ref_len += static_cast<double>(best);
    for (std::size_t n = 1; n <= 4; ++n) {
      NGramCounts max_ref;
      for (const auto& r : refs) {
        for (const auto& [g, c] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], c);
      }
      for (const auto& [g, c] : ngrams(h, n)) {
        const auto it = max_ref.find(g);
        clipped[n - 1] += std::min(c, it == max_ref.end() ? 0 : it->second);
        total[n - 1] += c;
      }
    }
  }
  double log_sum = 0.0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (clipped[n] == 0.0 || total[n] == 0.0) return 0.0;
    log_sum += 0.25 * std::log(clipped[n] / total[n]);
  }
  const double bp = hyp_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / hyp_len);
  return bp * std::exp(log_sum);
}

std::vector<double> cider_d_scores(std::span<const ScoredCaption> corpus) {
  if (corpus.size() < 2) throw Error(ErrorCode::kCorpusTooSmall, "CIDEr-D needs at least two samples");
  struct Doc {
    std::array<NGramCounts, 4> counts;
    std::size_t length = 0;
  };
  const auto make_doc = [](const std::string& text) {
    const Words w = split_words(text);
    Doc d;
    d.length = w.size();
    for (std::size_t n = 1; n <= 4; ++n) d.counts[n - 1] = ngrams(w, n);
    return d;
  };

  std::vector<Doc> hyps;
  std::vector<std::vector<Doc>> refs;
  std::map<Words, int> doc_freq;
  for (const auto& item : corpus) {
    if (item.references.empty()) throw Error(ErrorCode::kEmptyRefs, "CIDEr-D sample without references");
    hyps.push_back(make_doc(item.hypothesis));
    refs.emplace_back();
    std::set<Words> seen;
    for (const auto& r : item.references) {
      refs.back().push_back(make_doc(r));
      for (const auto& counts : refs.back().back().counts) {
        for (const auto& [g, c] : counts) seen.insert(g);
      }
    }
    for (const auto& g : seen) ++doc_freq[g];
  }
  const double log_n = std::log(static_cast<double>(corpus.size()));

  // TF-IDF vector of one document for one n-gram order, plus its norm.
  const auto vec = [&](const NGramCounts& counts) {
    std::map<Words, double> v;
    double norm2 = 0.0;
    for (const auto& [g, c] : counts) {
      const auto it = doc_freq.find(g);
      const double df = std::max(1.0, it == doc_freq.end() ? 0.0 : static_cast<double>(it->second));
      const double x = static_cast<double>(c) * (log_n - std::log(df));
      v[g] = x;
      norm2 += x * x;
    }
    return std::pair{v, std::sqrt(norm2)};
  };

  std::vector<double> scores;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    double sum_n = 0.0;
    for (std::size_t n = 0; n < 4; ++n) {
      const auto [hv, hn] = vec(hyps[i].counts[n]);
      double sum_ref = 0.0;
      for (const auto& r : refs[i]) {
        const auto [rv, rn] = vec(r.counts[n]);
        double dot = 0.0;
        for (const auto& [g, x] : hv) {
          const auto it = rv.find(g);
          if (it != rv.end()) dot += std::min(x, it->second) * it->second;
        }
        const double cos = (hn == 0.0 || rn == 0.0) ? 0.0 : dot / (hn * rn);
        const double delta = static_cast<double>(hyps[i].length) - static_cast<double>(r.length);
        sum_ref += cos * std::exp(-(delta * delta) / (2.0 * kCiderSigma * kCiderSigma));
      }
      sum_n += sum_ref / static_cast<double>(refs[i].size());
    }
    scores.push_back(10.0 * sum_n / 4.0);
  }
  return scores;
}

double cider_d(std::span<const ScoredCaption> corpus) {
  const auto s = cider_d_scores(corpus);
  double sum = 0.0;
  for (double v : s) sum += v;
  return sum / static_cast<double>(s.size());
}

namespace {

// Depth-first search over hypothesis positions. Every word type must use
// exactly min(count_h, count_r) matches; among such alignments the chunk
// count is minimised with branch-and-bound.
class ChunkSearch {
 public:
  ChunkSearch(const Words& h, const Words& r) : h_(h), r_(r), used_(r.size(), false) {
    std::unordered_map<std::string, int> hc, rc;
    for (const auto& w : h) ++hc[w];
    for (const auto& w : r) ++rc[w];
    for (const auto& [w, c] : hc) {
      const int m = std::min(c, rc.count(w) ? rc[w] : 0);
      need_[w] = m;
      left_in_hyp_[w] = c;
      matches_ += m;
    }
  }

  int matches() const { return matches_; }

  int min_chunks() {
    best_ = std::numeric_limits<int>::max();
    dfs(0, -2, 0);
    return best_;
  }

 private:
  void dfs(std::size_t i, long prev_ref, int chunks) {
    if (chunks >= best_) return;
    if (i == h_.size()) {
      best_ = chunks;
      return;
    }
    const std::string& w = h_[i];
    int& need = need_[w];
    int& left = left_in_hyp_[w];
    --left;
    if (need > 0) {
      // Extending the current chunk first finds good bounds early.
      const long next = prev_ref + 1;
      if (prev_ref >= 0 && static_cast<std::size_t>(next) < r_.size() && !used_[next] && r_[next] == w) {
        take(i, next, chunks);
      }
      for (std::size_t j = 0; j < r_.size(); ++j) {
        if (static_cast<long>(j) == next || used_[j] || r_[j] != w) continue;
        take(i, static_cast<long>(j), chunks + 1);
      }
    }
    if (left >= need) dfs(i + 1, -2, chunks);
    ++left;
  }

  void take(std::size_t i, long j, int chunks) {
    used_[static_cast<std::size_t>(j)] = true;
    --need_[h_[i]];
    dfs(i + 1, j, chunks);
    ++need_[h_[i]];
    used_[static_cast<std::size_t>(j)] = false;
  }

  const Words& h_;
  const Words& r_;
  std::vector<bool> used_;
  std::unordered_map<std::string, int> need_;
  std::unordered_map<std::string, int> left_in_hyp_;
  int matches_ = 0;
  int best_ = 0;
};

}  // namespace

MeteorAlignment meteor_align(const Words& hypothesis, const Words& reference) {
  constexpr double kAlpha = 0.9;
  MeteorAlignment a;
  ChunkSearch search(hypothesis, reference);
  a.matches = search.matches();
  if (a.matches == 0) return a;
  a.chunks = search.min_chunks();
  a.precision = static_cast<double>(a.matches) / static_cast<double>(hypothesis.size());
  a.recall = static_cast<double>(a.matches) / static_cast<double>(reference.size());
  a.fmean = a.precision * a.recall / (kAlpha * a.precision + (1.0 - kAlpha) * a.recall);
  const double frag = static_cast<double>(a.chunks) / static_cast<double>(a.matches);
  a.penalty = 0.5 * frag * frag * frag;
  a.score = a.fmean * (1.0 - a.penalty);
  return a;
}

double meteor_lite(const std::string& hypothesis, const std::vector<std::string>& references) {
  const Words h = split_words(hypothesis);
  double best = 0.0;
  for (const auto& r : references) best = std::max(best, meteor_align(h, split_words(r)).score);
  return best;
}

}  // namespace procap
