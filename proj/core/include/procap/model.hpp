#pragma once

// The full dual-captioning network: frozen encoder, refinement, projection
// segmentation, mask pooling, scene/projection/knowledge query encoders,
// prompt assembly and the caption decoder.

#include "procap/decoder.hpp"
#include "procap/qformer.hpp"
#include "procap/semantic_memory.hpp"
#include "procap/tokenizer.hpp"
#include "procap/vision.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace procap {

struct ModelConfig {
  int patch_size = 8;
  Index embed_dim = 64;
  std::uint64_t encoder_seed = 1234;
  Index refine_hidden = 32;
  Index refine_channels = 32;
  Index seg_hidden = 16;
  QFormerConfig qformer;          // scene and projection branches
  Index knowledge_queries = 8;
  DecoderConfig decoder;
  int max_caption_len = 32;       // including <bos> and <eos>
  int top_k = kDefaultTopK;
  std::uint64_t init_seed = 7;

  // Ablation switches.
  bool use_refinement = true;
  bool use_mask_pooling = true;
  bool use_retrieval = true;
};

struct ForwardOptions {
  /// Pixel-level ground-truth mask; required when teacher_force_mask is set.
  const Image* gt_mask = nullptr;
  bool teacher_force_mask = false;
  /// Replace retrieved names with null names.
  bool null_context = false;
};

struct ForwardResult {
  FeatureGrid coarse;
  FeatureGrid refined;
  MaskGrid predicted_mask;
  FeatureGrid pooled;
  Tensor scene_queries;
  Tensor projection_queries;
  Tensor knowledge_queries;
  RetrievedContext context;
  PromptPair prompts;
};

struct DualCaption {
  std::string scene;
  std::string projection;
};

class ProCapModel {
 public:
  ProCapModel(ModelConfig config, Vocabulary vocab);

  ProCapModel(const ProCapModel&) = delete;
  ProCapModel& operator=(const ProCapModel&) = delete;
  ProCapModel(ProCapModel&&) = default;
  ProCapModel& operator=(ProCapModel&&) = default;

  ForwardResult forward(const Image& composite, const KnowledgeBase* kb, const ForwardOptions& options) const;

  /// Projection queries of a clean reference image seen through an all-ones mask.
  Tensor reference_embedding(const Image& reference) const;

  DualCaption caption(const Image& composite, const KnowledgeBase* kb, const GenerateOptions& gen,
                      bool null_context = false) const;
  std::string caption_task(const Image& composite, const KnowledgeBase* kb, const GenerateOptions& gen,
                           bool projection_task, bool null_context = false) const;

  /// Vocabulary ids fed to the knowledge encoder for each retrieved name.
  std::vector<std::vector<int>> name_token_ids(const RetrievedContext& context) const;

  void set_decoder_frozen(bool frozen);
  bool decoder_frozen() const { return decoder_frozen_; }

  nn::ParamStore& params() { return store_; }
  const nn::ParamStore& params() const { return store_; }
  const ModelConfig& config() const { return config_; }
  const Vocabulary& vocab() const { return vocab_; }
  const Decoder& decoder() const { return decoder_; }
  const FrozenEncoder& encoder() const { return encoder_; }

 private:
  ModelConfig config_;
  Vocabulary vocab_;
  nn::ParamStore store_;
  FrozenEncoder encoder_;
  Refiner refiner_;
  SegmentationHead segmenter_;
  QFormer scene_qformer_;
  QFormer projection_qformer_;
  KnowledgeEncoder knowledge_encoder_;
  nn::Linear phi_;
  Decoder decoder_;
  bool decoder_frozen_ = false;
};

/// Knowledge base whose keys are the model's projection embeddings of clean
/// reference images. Throws EmptyRefs.
KnowledgeBase build_kb(const ProCapModel& model, const std::vector<std::pair<Image, std::string>>& refs);

}  // namespace procap
