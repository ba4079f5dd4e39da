#pragma once

// Small causal transformer language model conditioned on prefix embeddings.

#include "procap/nn.hpp"
#include "procap/tokenizer.hpp"

#include <span>
#include <string>
#include <vector>

namespace procap {

using ag::Index;
using ag::Matrix;
using ag::Tensor;

struct DecoderConfig {
  Index dim = 64;
  int layers = 2;
  int heads = 4;
  Index ffn_hidden = 128;
  int max_positions = 128;
};

struct DecoderBlock {
  nn::LayerNorm attn_norm;
  nn::MultiHeadAttention attn;
  nn::LayerNorm ffn_norm;
  nn::FeedForward ffn;
};

enum class DecodeMode { kGreedy, kBeam };

struct GenerateOptions {
  int max_len = 30;  // generated word tokens, excluding <bos>/<eos>
  DecodeMode mode = DecodeMode::kGreedy;
  int beam_width = 3;
};

class Decoder {
 public:
  static inline const std::string kPrefix = "decoder.";

  static Decoder create(nn::ParamStore& store, const DecoderConfig& config, int vocab_size, nn::Rng& rng);

  const Tensor& embedding() const { return embedding_; }
  const DecoderConfig& config() const { return config_; }
  int vocab_size() const { return static_cast<int>(embedding_.rows()); }

  /// Next-token logits (n x V) for the n token positions of [prefix; ids].
  /// Output projection is tied to the token-embedding table.
  Tensor logits(const Tensor* prefix, std::span<const int> ids) const;

  /// Teacher-forced mean negative log-likelihood of gt[1..] given
  /// [prompt; gt[..n-1]]; <pad> targets are skipped. Throws EmptySequence
  /// when gt has fewer than two ids.
  Tensor caption_nll(const Tensor* prompt, std::span<const int> gt) const;

  /// Starts from <bos>; stops at <eos> or after options.max_len words. Greedy
  /// ties go to the lowest id; beam hypotheses are ranked by mean log-prob.
  std::vector<int> generate(const Tensor* prompt, const GenerateOptions& options) const;

 private:
  std::vector<int> generate_greedy(const Tensor* prompt, int max_len) const;
  std::vector<int> generate_beam(const Tensor* prompt, int max_len, int width) const;
  Eigen::VectorXd last_log_probs(const Tensor* prompt, const std::vector<int>& ids) const;

  DecoderConfig config_;
  Tensor embedding_;
  Matrix positions_;
  std::vector<DecoderBlock> blocks_;
  nn::LayerNorm final_norm_;
};

}  // namespace procap
