#include "procap/config.hpp"

#include "json_config.hpp"
#include "procap/error.hpp"

#include <fstream>
#include <sstream>

namespace procap {
namespace detail {

StrictObject::StrictObject(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {
  if (!j_.is_object()) throw Error(ErrorCode::kSchemaViolation, where_ + " must be a JSON object");
}

const nlohmann::json* StrictObject::take(const char* key) {
  seen_.insert(key);
  const auto it = j_.find(key);
  return it == j_.end() ? nullptr : &*it;
}

void StrictObject::finish() const {
  for (const auto& [k, v] : j_.items()) {
    if (!seen_.contains(k)) throw Error(ErrorCode::kSchemaViolation, "unknown key " + where_ + "." + k);
  }
}

void StrictObject::fail(const char* key, const std::string& why) const {
  throw Error(ErrorCode::kSchemaViolation, "bad value for " + where_ + "." + key + ": " + why);
}

Json model_config_to_json(const ModelConfig& m, bool with_seeds) {
  Json j;
  j["patch_size"] = m.patch_size;
  j["embed_dim"] = m.embed_dim;
  if (with_seeds) {
    j["encoder_seed"] = m.encoder_seed;
    j["init_seed"] = m.init_seed;
  }
  j["refine_hidden"] = m.refine_hidden;
  j["refine_channels"] = m.refine_channels;
  j["seg_hidden"] = m.seg_hidden;
  j["qformer"] = {{"num_queries", m.qformer.num_queries}, {"dim", m.qformer.dim}, {"layers", m.qformer.layers},
                  {"heads", m.qformer.heads}, {"ffn_hidden", m.qformer.ffn_hidden}};
  j["knowledge_queries"] = m.knowledge_queries;
  j["decoder"] = {{"dim", m.decoder.dim}, {"layers", m.decoder.layers}, {"heads", m.decoder.heads},
                  {"ffn_hidden", m.decoder.ffn_hidden}, {"max_positions", m.decoder.max_positions}};
  j["max_caption_len"] = m.max_caption_len;
  j["top_k"] = m.top_k;
  j["use_refinement"] = m.use_refinement;
  j["use_mask_pooling"] = m.use_mask_pooling;
  j["use_retrieval"] = m.use_retrieval;
  return j;
}

void model_config_from_json(const nlohmann::json& j, ModelConfig& m, bool with_seeds, const std::string& where) {
  StrictObject o(j, where);
  o.read("patch_size", m.patch_size);
  o.read("embed_dim", m.embed_dim);
  if (with_seeds) {
    o.read("encoder_seed", m.encoder_seed);
    o.read("init_seed", m.init_seed);
  }
  o.read("refine_hidden", m.refine_hidden);
  o.read("refine_channels", m.refine_channels);
  o.read("seg_hidden", m.seg_hidden);
  if (const auto* q = o.take("qformer")) {
    StrictObject qo(*q, o.path("qformer"));
    qo.read("num_queries", m.qformer.num_queries);
    qo.read("dim", m.qformer.dim);
    qo.read("layers", m.qformer.layers);
    qo.read("heads", m.qformer.heads);
    qo.read("ffn_hidden", m.qformer.ffn_hidden);
    qo.finish();
  }
  o.read("knowledge_queries", m.knowledge_queries);
  if (const auto* d = o.take("decoder")) {
    StrictObject dd(*d, o.path("decoder"));
    dd.read("dim", m.decoder.dim);
    dd.read("layers", m.decoder.layers);
    dd.read("heads", m.decoder.heads);
    dd.read("ffn_hidden", m.decoder.ffn_hidden);
    dd.read("max_positions", m.decoder.max_positions);
    dd.finish();
  }
  o.read("max_caption_len", m.max_caption_len);
  o.read("top_k", m.top_k);
  o.read("use_refinement", m.use_refinement);
  o.read("use_mask_pooling", m.use_mask_pooling);
  o.read("use_retrieval", m.use_retrieval);
  o.finish();
  if (m.patch_size <= 0 || m.embed_dim <= 0 || m.top_k <= 0 || m.max_caption_len < 2 ||
      m.qformer.dim % m.qformer.heads != 0 || m.decoder.dim % m.decoder.heads != 0 || m.embed_dim % 4 != 0) {
    throw Error(ErrorCode::kSchemaViolation, where + " has inconsistent dimensions");
  }
}

}  // namespace detail

namespace {

using detail::Json;
using detail::StrictObject;

Json pattern_json(const PatternSpec& p) {
  return {{"kind", p.kind}, {"color", p.color}, {"background", p.background}, {"frequency", p.frequency},
          {"angle_deg", p.angle_deg}};
}

Json entry_json(const CorpusEntry& e, bool source) {
  Json j;
  j["id"] = e.id;
  j["captions"] = e.captions;
  if (source) {
    j["name"] = e.name;
    j["subset"] = e.subset;
  }
  if (e.image) j["image"] = *e.image;
  j["pattern"] = pattern_json(e.pattern);
  return j;
}

CorpusEntry entry_from_json(const nlohmann::json& j, bool source, const std::string& where) {
  CorpusEntry e;
  StrictObject o(j, where);
  o.read("id", e.id);
  o.read("captions", e.captions);
  if (source) {
    o.read("name", e.name);
    o.read("subset", e.subset);
  }
  if (const auto* img = o.take("image")) e.image = img->get<std::string>();
  if (const auto* p = o.take("pattern")) {
    StrictObject po(*p, o.path("pattern"));
    po.read("kind", e.pattern.kind);
    po.read("color", e.pattern.color);
    po.read("background", e.pattern.background);
    po.read("frequency", e.pattern.frequency);
    po.read("angle_deg", e.pattern.angle_deg);
    po.finish();
  }
  o.finish();
  if (e.id.empty() || e.captions.empty()) throw Error(ErrorCode::kSchemaViolation, where + " needs id and captions");
  return e;
}

Json synth_json(const SynthConfig& s) {
  Json j;
  j["canvas_height"] = s.canvas_height;
  j["canvas_width"] = s.canvas_width;
  j["source_height"] = s.source_height;
  j["source_width"] = s.source_width;
  j["draws_per_pair"] = s.draws_per_pair;
  j["eval_fraction"] = s.eval_fraction;
  const BlendRanges& b = s.blend;
  j["blend"] = {{"scale_min", b.scale_min},     {"scale_max", b.scale_max}, {"center_jitter", b.center_jitter},
                {"rotation_deg", b.rotation_deg}, {"perspective", b.perspective}, {"gain_min", b.gain_min},
                {"gain_max", b.gain_max},       {"gamma_min", b.gamma_min}, {"gamma_max", b.gamma_max},
                {"noise_sigma", b.noise_sigma}};
  j["scenes"] = Json::array();
  for (const auto& e : s.scenes) j["scenes"].push_back(entry_json(e, false));
  j["sources"] = Json::array();
  for (const auto& e : s.sources) j["sources"].push_back(entry_json(e, true));
  return j;
}

void synth_from_json(const nlohmann::json& j, SynthConfig& s) {
  StrictObject o(j, "synth");
  o.read("canvas_height", s.canvas_height);
  o.read("canvas_width", s.canvas_width);
  o.read("source_height", s.source_height);
  o.read("source_width", s.source_width);
  o.read("draws_per_pair", s.draws_per_pair);
  o.read("eval_fraction", s.eval_fraction);
  if (const auto* b = o.take("blend")) {
    StrictObject bo(*b, "synth.blend");
    BlendRanges& r = s.blend;
    bo.read("scale_min", r.scale_min);
    bo.read("scale_max", r.scale_max);
    bo.read("center_jitter", r.center_jitter);
    bo.read("rotation_deg", r.rotation_deg);
    bo.read("perspective", r.perspective);
    bo.read("gain_min", r.gain_min);
    bo.read("gain_max", r.gain_max);
    bo.read("gamma_min", r.gamma_min);
    bo.read("gamma_max", r.gamma_max);
    bo.read("noise_sigma", r.noise_sigma);
    bo.finish();
  }
  for (const char* key : {"scenes", "sources"}) {
    const auto* arr = o.take(key);
    if (arr == nullptr) continue;
    if (!arr->is_array()) throw Error(ErrorCode::kSchemaViolation, std::string("synth.") + key + " must be an array");
    const bool source = std::string(key) == "sources";
    auto& dst = source ? s.sources : s.scenes;
    dst.clear();
    for (std::size_t i = 0; i < arr->size(); ++i) {
      dst.push_back(entry_from_json((*arr)[i], source, std::string("synth.") + key + "[" + std::to_string(i) + "]"));
    }
  }
  o.finish();
}

Json train_json(const TrainConfig& t) {
  const OptimizerConfig& p = t.optim;
  return {{"lr_init", p.lr_init},
          {"lr_warmup_start", p.lr_warmup_start},
          {"warmup_steps", p.warmup_steps},
          {"total_steps", p.total_steps},
          {"weight_decay", p.weight_decay},
          {"beta1", p.beta1},
          {"beta2", p.beta2},
          {"eps", p.eps},
          {"batch_size", t.batch_size},
          {"freeze_decoder", t.freeze_decoder},
          {"teacher_force_mask", t.teacher_force_mask},
          {"fp64_params", t.fp64_params},
          {"alpha", t.weights.alpha},
          {"beta", t.weights.beta},
          {"gamma", t.weights.gamma}};
}

void train_from_json(const nlohmann::json& j, TrainConfig& t) {
  StrictObject o(j, "train");
  OptimizerConfig& p = t.optim;
  o.read("lr_init", p.lr_init);
  o.read("lr_warmup_start", p.lr_warmup_start);
  o.read("warmup_steps", p.warmup_steps);
  o.read("total_steps", p.total_steps);
  o.read("weight_decay", p.weight_decay);
  o.read("beta1", p.beta1);
  o.read("beta2", p.beta2);
  o.read("eps", p.eps);
  o.read("batch_size", t.batch_size);
  o.read("freeze_decoder", t.freeze_decoder);
  o.read("teacher_force_mask", t.teacher_force_mask);
  o.read("fp64_params", t.fp64_params);
  o.read("alpha", t.weights.alpha);
  o.read("beta", t.weights.beta);
  o.read("gamma", t.weights.gamma);
  o.finish();
  if (t.batch_size <= 0) throw Error(ErrorCode::kSchemaViolation, "train.batch_size must be positive");
  t.weights.validate();
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

void apply_seed(RunConfig& cfg, std::uint64_t seed) {
  cfg.seed = seed;
  cfg.model.encoder_seed = mix(seed ^ 0x01);
  cfg.model.init_seed = mix(seed ^ 0x02);
  cfg.train.seed = mix(seed ^ 0x03);
}

RunConfig parse_run_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kSchemaViolation, std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  StrictObject o(j, "config");
  std::uint64_t seed = 0;
  o.read("seed", seed);
  if (const auto* s = o.take("synth")) synth_from_json(*s, cfg.synth);
  if (const auto* m = o.take("model")) detail::model_config_from_json(*m, cfg.model, false, "model");
  if (const auto* t = o.take("train")) train_from_json(*t, cfg.train);
  if (const auto* p = o.take("pretrain")) {
    StrictObject po(*p, "pretrain");
    po.read("epochs", cfg.pretrain.epochs);
    po.read("lr", cfg.pretrain.lr);
    po.read("batch_size", cfg.pretrain.batch_size);
    po.read("weight_decay", cfg.pretrain.weight_decay);
    po.finish();
  }
  if (const auto* e = o.take("eval")) {
    StrictObject eo(*e, "eval");
    eo.read("split", cfg.eval.split);
    eo.read("max_len", cfg.eval.generate.max_len);
    std::string mode = cfg.eval.generate.mode == DecodeMode::kBeam ? "beam" : "greedy";
    eo.read("decode", mode);
    if (mode != "greedy" && mode != "beam") throw Error(ErrorCode::kSchemaViolation, "eval.decode must be greedy|beam");
    cfg.eval.generate.mode = mode == "beam" ? DecodeMode::kBeam : DecodeMode::kGreedy;
    eo.read("beam_width", cfg.eval.generate.beam_width);
    eo.finish();
  }
  o.finish();
  apply_seed(cfg, seed);
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingFile, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

namespace {
Json run_config_object(const RunConfig& cfg) {
  Json j;
  j["seed"] = cfg.seed;
  j["synth"] = synth_json(cfg.synth);
  j["model"] = detail::model_config_to_json(cfg.model, false);
  j["train"] = train_json(cfg.train);
  j["pretrain"] = {{"epochs", cfg.pretrain.epochs},
                   {"lr", cfg.pretrain.lr},
                   {"batch_size", cfg.pretrain.batch_size},
                   {"weight_decay", cfg.pretrain.weight_decay}};
  j["eval"] = {{"split", cfg.eval.split},
               {"max_len", cfg.eval.generate.max_len},
               {"decode", cfg.eval.generate.mode == DecodeMode::kBeam ? "beam" : "greedy"},
               {"beam_width", cfg.eval.generate.beam_width}};
  return j;
}
}  // namespace

std::string run_config_json(const RunConfig& cfg) { return run_config_object(cfg).dump(2); }

std::string provenance_json(const RunConfig& cfg) {
  Json j;
  j["tool"] = "procap";
  j["version"] = "0.1.0";
  j["seed"] = cfg.seed;
  j["config"] = run_config_object(cfg);
  return j.dump();
}

}  // namespace procap
