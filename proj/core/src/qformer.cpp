#include "procap/qformer.hpp"

#include "procap/error.hpp"

namespace procap {

QFormer QFormer::create(nn::ParamStore& store, const std::string& name, const QFormerConfig& config,
                        Index input_channels, nn::Rng& rng) {
  QFormer q;
  q.config_ = config;
  if (input_channels > 0) {
    q.input_proj_ = nn::Linear::create(store, name + ".input_proj", input_channels, config.dim, rng);
  }
  q.queries_ = store.add(name + ".query_tokens", nn::normal_matrix(config.num_queries, config.dim, 0.5, rng));
  for (int l = 0; l < config.layers; ++l) {
    const std::string p = name + ".block" + std::to_string(l);
    q.blocks_.push_back({nn::MultiHeadAttention::create(store, p + ".self_attn", config.dim, config.heads, rng),
                         nn::LayerNorm::create(store, p + ".self_norm", config.dim),
                         nn::MultiHeadAttention::create(store, p + ".cross_attn", config.dim, config.heads, rng),
                         nn::LayerNorm::create(store, p + ".cross_norm", config.dim),
                         nn::FeedForward::create(store, p + ".ffn", config.dim, config.ffn_hidden, rng),
                         nn::LayerNorm::create(store, p + ".ffn_norm", config.dim)});
  }
  return q;
}

Tensor QFormer::encode(const Tensor& tokens) const {
  Tensor kv = tokens;
  if (input_proj_) {
    if (tokens.cols() != input_proj_->weight.rows()) {
      throw Error(ErrorCode::kDimensionMismatch, "token width does not match the input projection");
    }
    kv = (*input_proj_)(tokens);
  } else if (tokens.cols() != config_.dim) {
    throw Error(ErrorCode::kDimensionMismatch, "token width must equal the query width");
  }
  if (kv.rows() == 0) throw Error(ErrorCode::kDimensionMismatch, "no tokens to attend to");

  Tensor q = queries_;
  for (const auto& b : blocks_) {
    q = b.self_norm(ag::add(q, b.self_attn(q, q, false)));
    q = b.cross_norm(ag::add(q, b.cross_attn(q, kv, false)));
    q = b.ffn_norm(ag::add(q, b.ffn(q)));
  }
  return q;
}

KnowledgeEncoder KnowledgeEncoder::create(nn::ParamStore& store, const std::string& name,
                                          const QFormerConfig& config, Index token_dim, nn::Rng& rng) {
  KnowledgeEncoder k;
  k.name_proj_ = nn::Linear::create(store, name + ".name_proj", token_dim, config.dim, rng);
  k.qformer_ = QFormer::create(store, name, config, 0, rng);
  return k;
}

Tensor KnowledgeEncoder::encode(std::span<const std::vector<int>> name_token_ids,
                                const Tensor& projection_queries, const Tensor& token_embedding) const {
  if (name_token_ids.empty()) throw Error(ErrorCode::kDimensionMismatch, "no retrieved names");
  if (projection_queries.cols() != qformer_.config().dim) {
    throw Error(ErrorCode::kDimensionMismatch, "projection queries have the wrong width");
  }
  std::vector<Tensor> name_vectors;
  name_vectors.reserve(name_token_ids.size());
  for (const auto& ids : name_token_ids) {
    if (ids.empty()) throw Error(ErrorCode::kDimensionMismatch, "name with no token ids");
    name_vectors.push_back(ag::mean_rows(ag::gather_rows(token_embedding, ids)));
  }
  const Tensor names = name_proj_(ag::concat_rows(name_vectors));
  const std::vector<Tensor> parts{names, projection_queries};
  return qformer_.encode(ag::concat_rows(parts));
}

PromptPair build_prompts(const Tensor& scene_queries, const Tensor& projection_queries,
                         const Tensor& knowledge_queries, const nn::Linear& phi,
                         const Tensor& token_embedding, int scene_token_id, int proj_token_id) {
  const Index qdim = phi.weight.rows();
  if (scene_queries.cols() != qdim || projection_queries.cols() != qdim || knowledge_queries.cols() != qdim) {
    throw Error(ErrorCode::kDimensionMismatch, "query widths must match the prompt projection");
  }
  if (phi.weight.cols() != token_embedding.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "prompt projection must map into the decoder width");
  }
  const std::vector<int> scene_id{scene_token_id};
  const std::vector<int> proj_id{proj_token_id};
  const std::vector<Tensor> scene_parts{ag::gather_rows(token_embedding, scene_id), phi(scene_queries)};
  const std::vector<Tensor> proj_parts{ag::gather_rows(token_embedding, proj_id), phi(projection_queries),
                                       phi(knowledge_queries)};
  return {ag::concat_rows(scene_parts), ag::concat_rows(proj_parts)};
}

}  // namespace procap
