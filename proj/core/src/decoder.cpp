#include "procap/decoder.hpp"

#include "procap/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace procap {

Decoder Decoder::create(nn::ParamStore& store, const DecoderConfig& config, int vocab_size, nn::Rng& rng) {
  if (vocab_size <= Vocabulary::kReservedCount) {
    throw Error(ErrorCode::kInvalidArgument, "vocabulary has no words");
  }
  Decoder d;
  d.config_ = config;
  d.embedding_ = store.add(kPrefix + "embedding", nn::normal_matrix(vocab_size, config.dim, 0.3, rng));
  d.positions_ = nn::sinusoid_1d(config.max_positions, config.dim) * 0.3;
  for (int l = 0; l < config.layers; ++l) {
    const std::string p = kPrefix + "block" + std::to_string(l);
    d.blocks_.push_back({nn::LayerNorm::create(store, p + ".attn_norm", config.dim),
                         nn::MultiHeadAttention::create(store, p + ".attn", config.dim, config.heads, rng),
                         nn::LayerNorm::create(store, p + ".ffn_norm", config.dim),
                         nn::FeedForward::create(store, p + ".ffn", config.dim, config.ffn_hidden, rng)});
  }
  d.final_norm_ = nn::LayerNorm::create(store, kPrefix + "final_norm", config.dim);
  return d;
}

Tensor Decoder::logits(const Tensor* prefix, std::span<const int> ids) const {
  if (ids.empty()) throw Error(ErrorCode::kEmptySequence, "no tokens to decode");
  const Index p = prefix != nullptr ? prefix->rows() : 0;
  if (prefix != nullptr && prefix->cols() != config_.dim) {
    throw Error(ErrorCode::kDimensionMismatch, "prompt width differs from the decoder width");
  }
  const Index n = p + static_cast<Index>(ids.size());
  if (n > config_.max_positions) throw Error(ErrorCode::kInvalidArgument, "sequence exceeds max_positions");

  Tensor tokens = ag::gather_rows(embedding_, ids);
  Tensor x = tokens;
  if (prefix != nullptr) {
    const std::vector<Tensor> parts{*prefix, tokens};
    x = ag::concat_rows(parts);
  }
  x = ag::add(x, Tensor::constant(positions_.topRows(n)));
  for (const auto& b : blocks_) {
    const Tensor h = b.attn_norm(x);
    x = ag::add(x, b.attn(h, h, true));
    x = ag::add(x, b.ffn(b.ffn_norm(x)));
  }
  const Tensor out = final_norm_(ag::slice_rows(x, p, n - p));
  return ag::matmul_nt(out, embedding_);
}

Tensor Decoder::caption_nll(const Tensor* prompt, std::span<const int> gt) const {
  if (gt.size() < 2) throw Error(ErrorCode::kEmptySequence, "ground truth needs at least <bos> and <eos>");
  const auto inputs = gt.first(gt.size() - 1);
  const auto targets = gt.subspan(1);
  return ag::cross_entropy(logits(prompt, inputs), targets, Vocabulary::kPad);
}

std::vector<int> Decoder::generate(const Tensor* prompt, const GenerateOptions& options) const {
  ag::NoGradGuard no_grad;
  if (options.mode == DecodeMode::kBeam && options.beam_width > 1) {
    return generate_beam(prompt, options.max_len, options.beam_width);
  }
  return generate_greedy(prompt, options.max_len);
}

Eigen::VectorXd Decoder::last_log_probs(const Tensor* prompt, const std::vector<int>& ids) const {
  const Tensor z = logits(prompt, ids);
  Eigen::VectorXd row = z.value().row(z.rows() - 1).transpose();
  const double mx = row.maxCoeff();
  const double lse = mx + std::log((row.array() - mx).exp().sum());
  return row.array() - lse;
}

std::vector<int> Decoder::generate_greedy(const Tensor* prompt, int max_len) const {
  std::vector<int> ids{Vocabulary::kBos};
  for (int step = 0; step <= max_len; ++step) {
    const Tensor z = logits(prompt, ids);
    const auto row = z.value().row(z.rows() - 1);
    int best = 0;
    for (Index j = 1; j < row.size(); ++j) {
      if (row(j) > row(best)) best = static_cast<int>(j);
    }
    if (best == Vocabulary::kEos || step == max_len) {
      ids.push_back(Vocabulary::kEos);
      break;
    }
    ids.push_back(best);
  }
  return ids;
}

std::vector<int> Decoder::generate_beam(const Tensor* prompt, int max_len, int width) const {
  struct Hyp {
    std::vector<int> ids;
    double log_prob = 0.0;
    bool done = false;
    double score() const { return log_prob / static_cast<double>(ids.size() - 1); }
  };
  std::vector<Hyp> beams{{{Vocabulary::kBos}, 0.0, false}};
  for (int step = 0; step <= max_len; ++step) {
    std::vector<Hyp> candidates;
    for (const auto& h : beams) {
      if (h.done) {
        candidates.push_back(h);
        continue;
      }
      const Eigen::VectorXd lp = last_log_probs(prompt, h.ids);
      std::vector<int> order(static_cast<std::size_t>(lp.size()));
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return lp(a) > lp(b); });
      for (int r = 0; r < width && r < static_cast<int>(order.size()); ++r) {
        const int tok = step == max_len ? Vocabulary::kEos : order[static_cast<std::size_t>(r)];
        Hyp next = h;
        next.ids.push_back(tok);
        next.log_prob += lp(tok);
        next.done = tok == Vocabulary::kEos;
        candidates.push_back(std::move(next));
        if (step == max_len) break;
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Hyp& a, const Hyp& b) { return a.score() > b.score(); });
    if (static_cast<int>(candidates.size()) > width) candidates.resize(static_cast<std::size_t>(width));
    beams = std::move(candidates);
    if (std::all_of(beams.begin(), beams.end(), [](const Hyp& h) { return h.done; })) break;
  }
  return beams.front().ids;
}

}  // namespace procap
