#include "procap/pipeline.hpp"

#include "procap/checkpoint.hpp"
#include "procap/error.hpp"

#include <fstream>
#include <set>

namespace procap {

namespace {

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoFailure, "cannot create " + dir.string() + ": " + ec.message());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  out << text << '\n';
}

std::vector<std::vector<int>> encode_all(const std::vector<std::string>& captions, const Vocabulary& vocab,
                                         int max_len) {
  std::vector<std::vector<int>> out;
  for (const auto& c : captions) out.push_back(vocab.encode(c, max_len));
  return out;
}

std::optional<KnowledgeBase> maybe_kb(const std::optional<fs::path>& path) {
  if (!path) return std::nullopt;
  return load_kb(*path);
}

}  // namespace

Dataset run_synth(const RunConfig& cfg, const fs::path& out_dir) {
  ensure_dir(out_dir);
  return synth_dataset(cfg.synth, cfg.seed, out_dir, provenance_json(cfg));
}

std::vector<std::string> training_captions(const Dataset& data) {
  std::set<std::string> scenes, sources;
  for (const SarSample* s : data.split("train")) {
    scenes.insert(s->scene_id);
    sources.insert(s->source_id);
  }
  std::vector<std::string> out;
  std::set<std::string> seen;
  const auto add = [&](const std::vector<std::string>& caps) {
    for (const auto& c : caps) {
      if (seen.insert(c).second) out.push_back(c);
    }
  };
  for (const auto& sc : data.scenes) {
    if (scenes.contains(sc.id)) add(sc.captions);
  }
  for (const auto& src : data.sources) {
    if (sources.contains(src.id)) add(src.captions);
  }
  if (out.empty()) throw Error(ErrorCode::kEmptyCorpus, "training split has no captions");
  return out;
}

PretrainOutput run_pretrain(const RunConfig& cfg, const fs::path& manifest, const fs::path& out_dir) {
  const Dataset data = load_dataset(manifest);
  const auto captions = training_captions(data);
  ProCapModel model(cfg.model, Vocabulary::build(captions));
  PretrainOutput out;
  out.epoch_loss = pretrain_decoder(model, encode_all(captions, model.vocab(), cfg.model.max_caption_len),
                                    cfg.pretrain, cfg.train.seed ^ 0x9e7);
  ensure_dir(out_dir);
  out.checkpoint = out_dir / "pretrained.ckpt";
  save_checkpoint(out.checkpoint, model, 0, provenance_json(cfg));
  std::ofstream log(out_dir / "pretrain_log.csv");
  log.precision(17);
  log << "epoch,lm_loss\n";
  for (std::size_t e = 0; e < out.epoch_loss.size(); ++e) log << e << ',' << out.epoch_loss[e] << '\n';
  if (!log) throw Error(ErrorCode::kIoFailure, "cannot write pretrain_log.csv");
  return out;
}

KnowledgeBase run_kb_build(const RunConfig& cfg, const fs::path& checkpoint, const fs::path& manifest,
                           const fs::path& out_path) {
  const LoadedCheckpoint ck = load_checkpoint(checkpoint);
  const Dataset data = load_dataset(manifest);
  std::vector<std::pair<Image, std::string>> refs;
  for (const auto& src : data.sources) refs.emplace_back(src.image, src.name);
  KnowledgeBase kb = build_kb(ck.model, refs);
  if (out_path.has_parent_path()) ensure_dir(out_path.parent_path());
  save_kb(out_path, kb, provenance_json(cfg));
  return kb;
}

TrainOutput run_train(const RunConfig& cfg, const fs::path& manifest, const std::optional<fs::path>& kb_path,
                      const std::optional<fs::path>& init, const fs::path& out_dir) {
  const Dataset data = load_dataset(manifest);
  std::optional<ProCapModel> model;
  if (init) {
    model.emplace(std::move(load_checkpoint(*init).model));
  } else {
    model.emplace(cfg.model, Vocabulary::build(training_captions(data)));
  }
  const auto kb = maybe_kb(kb_path);
  const auto items = make_train_items(data, "train", model->vocab(), model->config().max_caption_len);
  if (items.empty()) throw Error(ErrorCode::kEmptyCorpus, "training split is empty");

  TrainConfig tcfg = cfg.train;
  tcfg.optim = resolve_schedule(tcfg.optim, items.size(), tcfg.batch_size);
  Trainer trainer(*model, kb ? &*kb : nullptr, tcfg);

  ensure_dir(out_dir);
  TrainOutput out;
  out.log = trainer.run(items);
  out.checkpoint = out_dir / "model.ckpt";
  out.loss_log = out_dir / "loss_log.csv";
  save_checkpoint(out.checkpoint, *model, static_cast<long>(out.log.size()), provenance_json(cfg));
  write_loss_log(out.loss_log, out.log);
  write_text(out_dir / "config.json", run_config_json(cfg));
  return out;
}

EvalOutput run_eval(const RunConfig& cfg, const fs::path& checkpoint, const std::optional<fs::path>& kb_path,
                    const fs::path& manifest, const std::optional<fs::path>& out_path, bool null_context) {
  const LoadedCheckpoint ck = load_checkpoint(checkpoint);
  const auto kb = maybe_kb(kb_path);
  const Dataset data = load_dataset(manifest);
  const KnowledgeBase* kbp = kb ? &*kb : nullptr;
  EvalOutput out;
  out.records = collect_records(data, cfg.eval.split, [&](const SarSample& s) {
    return ck.model.caption(s.composite, kbp, cfg.eval.generate, null_context);
  });
  out.report = score_records(out.records);
  out.report.checkpoint = checkpoint.string();
  out.report.kb = kb_path ? kb_path->string() : "";
  out.report.manifest = manifest.string();
  out.report.split = cfg.eval.split;
  out.report.decoding = cfg.eval.generate.mode == DecodeMode::kBeam ? "beam" : "greedy";
  out.report.provenance_json = provenance_json(cfg);
  if (out_path) {
    if (out_path->has_parent_path()) ensure_dir(out_path->parent_path());
    write_report(*out_path, out.report);
  }
  return out;
}

std::string run_caption(const RunConfig& cfg, const fs::path& checkpoint, const std::optional<fs::path>& kb_path,
                        const fs::path& image, bool projection_task) {
  const LoadedCheckpoint ck = load_checkpoint(checkpoint);
  const auto kb = maybe_kb(kb_path);
  return ck.model.caption_task(read_png(image), kb ? &*kb : nullptr, cfg.eval.generate, projection_task);
}

}  // namespace procap
