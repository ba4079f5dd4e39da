#pragma once

// Caption metrics over word tokens produced by split_words.

#include <span>
#include <string>
#include <vector>

namespace procap {

struct ScoredCaption {
  std::string hypothesis;
  std::vector<std::string> references;
};

/// Corpus BLEU with n = 1..4, uniform weights and a closest-reference-length
/// brevity penalty. Zero when any clipped precision is zero. Throws EmptyCorpus.
double bleu4(std::span<const ScoredCaption> corpus);

inline constexpr double kCiderSigma = 6.0;

/// Per-sample CIDEr-D (document frequencies over the corpus reference sets,
/// clipped hypothesis vectors, Gaussian length penalty, x10).
/// Throws CorpusTooSmall for fewer than two samples.
std::vector<double> cider_d_scores(std::span<const ScoredCaption> corpus);
/// Mean of cider_d_scores.
double cider_d(std::span<const ScoredCaption> corpus);

struct MeteorAlignment {
  int matches = 0;
  int chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double fmean = 0.0;
  double penalty = 0.0;
  double score = 0.0;
};

/// Exact-unigram alignment with the most matches and, among those, the fewest
/// chunks, scored against one reference.
MeteorAlignment meteor_align(const std::vector<std::string>& hypothesis, const std::vector<std::string>& reference);

/// Best alignment score over the references; 0 without matches.
double meteor_lite(const std::string& hypothesis, const std::vector<std::string>& references);

}  // namespace procap
