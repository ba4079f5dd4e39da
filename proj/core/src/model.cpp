#include "procap/model.hpp"

#include "procap/error.hpp"

namespace procap {

ProCapModel::ProCapModel(ModelConfig config, Vocabulary vocab)
    : config_(std::move(config)),
      vocab_(std::move(vocab)),
      encoder_(config_.patch_size, static_cast<int>(config_.embed_dim), config_.encoder_seed) {
  nn::Rng rng(config_.init_seed);
  const Index spatial_channels = config_.use_refinement ? config_.refine_channels : config_.embed_dim;
  if (config_.use_refinement) {
    refiner_ = Refiner::create(store_, "refine", config_.embed_dim, config_.refine_hidden,
                               config_.refine_channels, rng);
  }
  segmenter_ = SegmentationHead::create(store_, "segment", spatial_channels, config_.seg_hidden, rng);
  scene_qformer_ = QFormer::create(store_, "qformer_scene", config_.qformer, config_.embed_dim, rng);
  projection_qformer_ = QFormer::create(store_, "qformer_proj", config_.qformer, spatial_channels, rng);
  QFormerConfig kcfg = config_.qformer;
  kcfg.num_queries = config_.knowledge_queries;
  knowledge_encoder_ = KnowledgeEncoder::create(store_, "qformer_knowledge", kcfg, config_.decoder.dim, rng);
  phi_ = nn::Linear::create(store_, "phi", config_.qformer.dim, config_.decoder.dim, rng);
  decoder_ = Decoder::create(store_, config_.decoder, vocab_.size(), rng);
  for (auto& p : store_.params()) nn::round_to_float(p.tensor.mutable_value());
}

void ProCapModel::set_decoder_frozen(bool frozen) {
  decoder_frozen_ = frozen;
  store_.set_trainable(Decoder::kPrefix, !frozen);
}

std::vector<std::vector<int>> ProCapModel::name_token_ids(const RetrievedContext& context) const {
  std::vector<std::vector<int>> out;
  out.reserve(context.names.size());
  for (const auto& name : context.names) {
    std::vector<int> ids = name.empty() ? std::vector<int>{} : vocab_.word_ids(name);
    if (ids.empty()) ids.push_back(Vocabulary::kNull);
    out.push_back(std::move(ids));
  }
  return out;
}

ForwardResult ProCapModel::forward(const Image& composite, const KnowledgeBase* kb,
                                   const ForwardOptions& options) const {
  ForwardResult r;
  r.coarse = encoder_.encode(composite);
  r.refined = config_.use_refinement ? refiner_(r.coarse) : r.coarse;
  r.predicted_mask = segmenter_(r.refined);

  if (!config_.use_mask_pooling) {
    r.pooled = r.refined;
  } else if (options.teacher_force_mask) {
    if (options.gt_mask == nullptr) {
      throw Error(ErrorCode::kInvalidArgument, "teacher forcing needs a ground-truth mask");
    }
    r.pooled = mask_pool(r.refined, downsample_gt_mask(*options.gt_mask, r.refined.height, r.refined.width));
  } else {
    r.pooled = mask_pool(r.refined, r.predicted_mask);
  }

  r.scene_queries = scene_qformer_.encode(r.coarse.data);
  r.projection_queries = projection_qformer_.encode(r.pooled.data);

  const bool use_kb = config_.use_retrieval && !options.null_context && kb != nullptr;
  r.context = use_kb ? retrieve(r.projection_queries.value(), *kb, config_.top_k) : null_context(config_.top_k);
  const auto names = name_token_ids(r.context);
  r.knowledge_queries = knowledge_encoder_.encode(names, r.projection_queries, decoder_.embedding());
  r.prompts = build_prompts(r.scene_queries, r.projection_queries, r.knowledge_queries, phi_,
                            decoder_.embedding(), Vocabulary::kScene, Vocabulary::kProj);
  return r;
}

Tensor ProCapModel::reference_embedding(const Image& reference) const {
  const FeatureGrid coarse = encoder_.encode(reference);
  const FeatureGrid refined = config_.use_refinement ? refiner_(coarse) : coarse;
  const MaskGrid ones{Tensor::constant(Matrix::Ones(refined.height * refined.width, 1)), refined.height,
                      refined.width, MaskKind::kBinary};
  return projection_qformer_.encode(mask_pool(refined, ones).data);
}

std::string ProCapModel::caption_task(const Image& composite, const KnowledgeBase* kb,
                                      const GenerateOptions& gen, bool projection_task, bool null_context) const {
  ag::NoGradGuard no_grad;
  ForwardOptions opts;
  opts.null_context = null_context;
  const ForwardResult r = forward(composite, kb, opts);
  const Tensor& prompt = projection_task ? r.prompts.projection : r.prompts.scene;
  return vocab_.decode(decoder_.generate(&prompt, gen));
}

DualCaption ProCapModel::caption(const Image& composite, const KnowledgeBase* kb, const GenerateOptions& gen,
                                 bool null_context) const {
  ag::NoGradGuard no_grad;
  ForwardOptions opts;
  opts.null_context = null_context;
  const ForwardResult r = forward(composite, kb, opts);
  return {vocab_.decode(decoder_.generate(&r.prompts.scene, gen)),
          vocab_.decode(decoder_.generate(&r.prompts.projection, gen))};
}

KnowledgeBase build_kb(const ProCapModel& model, const std::vector<std::pair<Image, std::string>>& refs) {
  if (refs.empty()) throw Error(ErrorCode::kEmptyRefs, "no reference images");
  ag::NoGradGuard no_grad;
  std::vector<Matrix> sets;
  std::vector<std::string> names;
  for (const auto& [image, name] : refs) {
    sets.push_back(model.reference_embedding(image).value());
    names.push_back(name);
  }
  return make_knowledge_base(sets, names);
}

}  // namespace procap
