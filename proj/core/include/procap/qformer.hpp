#pragma once

// Query-token encoders: a fixed set of learnable queries attends to a
// variable-length token set and returns a fixed-length embedding.

#include "procap/nn.hpp"
#include "procap/semantic_memory.hpp"
#include "procap/vision.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace procap {

struct QFormerConfig {
  Index num_queries = 8;
  Index dim = 64;
  int layers = 2;
  int heads = 4;
  Index ffn_hidden = 128;
};

struct QFormerBlock {
  nn::MultiHeadAttention self_attn;
  nn::LayerNorm self_norm;
  nn::MultiHeadAttention cross_attn;
  nn::LayerNorm cross_norm;
  nn::FeedForward ffn;
  nn::LayerNorm ffn_norm;
};

class QFormer {
 public:
  /// `input_channels` > 0 adds a learned projection from that width to
  /// config.dim; 0 means tokens already arrive at config.dim.
  static QFormer create(nn::ParamStore& store, const std::string& name, const QFormerConfig& config,
                        Index input_channels, nn::Rng& rng);

  /// Post-norm blocks of self-attention, cross-attention to `tokens`, and a
  /// feed-forward layer. No positions are added to `tokens`.
  Tensor encode(const Tensor& tokens) const;

  const Tensor& query_tokens() const { return queries_; }
  const QFormerConfig& config() const { return config_; }

 private:
  QFormerConfig config_;
  std::optional<nn::Linear> input_proj_;
  Tensor queries_;
  std::vector<QFormerBlock> blocks_;
};

/// Knowledge query encoder: each retrieved name becomes the mean token
/// embedding of its words (the null name uses the <null> embedding), mapped
/// into query space and attended to together with the projection queries.
class KnowledgeEncoder {
 public:
  static KnowledgeEncoder create(nn::ParamStore& store, const std::string& name,
                                 const QFormerConfig& config, Index token_dim, nn::Rng& rng);

  /// `name_token_ids[i]` holds the vocabulary ids of retrieved name i.
  Tensor encode(std::span<const std::vector<int>> name_token_ids, const Tensor& projection_queries,
                const Tensor& token_embedding) const;

  const QFormer& qformer() const { return qformer_; }

 private:
  nn::Linear name_proj_;
  QFormer qformer_;
};

struct PromptPair {
  Tensor scene;       // (1 + Lq) x D_dec
  Tensor projection;  // (1 + Lq + Lk) x D_dec
};

/// H_s = [emb(scene_token); phi(Q_s)], H_p = [emb(proj_token); phi(Q_p); phi(Q_k)].
PromptPair build_prompts(const Tensor& scene_queries, const Tensor& projection_queries,
                         const Tensor& knowledge_queries, const nn::Linear& phi,
                         const Tensor& token_embedding, int scene_token_id, int proj_token_id);

}  // namespace procap
