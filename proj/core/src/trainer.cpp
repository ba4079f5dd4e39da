#include "procap/trainer.hpp"

#include "procap/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace procap {

OptimizerConfig resolve_schedule(const OptimizerConfig& cfg, std::size_t train_size, int batch_size) {
  if (batch_size <= 0) throw Error(ErrorCode::kInvalidArgument, "batch_size must be positive");
  OptimizerConfig out = cfg;
  if (out.total_steps == 0) {
    out.total_steps = static_cast<long>((train_size + static_cast<std::size_t>(batch_size) - 1) /
                                        static_cast<std::size_t>(batch_size));
  }
  out.warmup_steps = std::min(out.warmup_steps, out.total_steps);
  return out;
}

std::vector<TrainItem> make_train_items(const Dataset& data, const std::string& split, const Vocabulary& vocab,
                                        int max_caption_len) {
  std::vector<TrainItem> items;
  for (const SarSample* s : data.split(split)) {
    TrainItem item;
    item.sample_id = s->sample_id;
    item.composite = &s->composite;
    item.gt_mask = &s->gt_mask;
    for (const auto& c : data.scene(s->scene_id).captions) item.scene_captions.push_back(vocab.encode(c, max_caption_len));
    for (const auto& c : data.source(s->source_id).captions) {
      item.projection_captions.push_back(vocab.encode(c, max_caption_len));
    }
    if (item.scene_captions.empty() || item.projection_captions.empty()) {
      throw Error(ErrorCode::kSchemaViolation, "sample " + s->sample_id + " lacks a caption set");
    }
    items.push_back(std::move(item));
  }
  return items;
}

SampleLoss sample_loss(const ProCapModel& model, const KnowledgeBase* kb, const TrainItem& item,
                       std::span<const int> scene_ids, std::span<const int> proj_ids, const TrainConfig& cfg) {
  ForwardOptions opts;
  opts.gt_mask = item.gt_mask;
  opts.teacher_force_mask = cfg.teacher_force_mask;
  const ForwardResult r = model.forward(*item.composite, kb, opts);
  SampleLoss out;
  out.l_s = model.decoder().caption_nll(&r.prompts.scene, scene_ids);
  out.l_p = model.decoder().caption_nll(&r.prompts.projection, proj_ids);
  const MaskGrid target = downsample_gt_mask(*item.gt_mask, r.predicted_mask.height, r.predicted_mask.width);
  out.l_seg = seg_loss(r.predicted_mask, target);
  out.total = weighted_total(out.l_s, out.l_p, out.l_seg, cfg.weights);
  return out;
}

Trainer::Trainer(ProCapModel& model, const KnowledgeBase* kb, TrainConfig cfg)
    : model_(model), kb_(kb), cfg_(std::move(cfg)), optimizer_(cfg_.optim), rng_(cfg_.seed) {
  cfg_.weights.validate();
  model_.set_decoder_frozen(cfg_.freeze_decoder);
}

LossBreakdown Trainer::train_step(std::span<const TrainItem> batch, double lr) {
  if (batch.empty()) throw Error(ErrorCode::kEmptyCorpus, "empty batch");
  model_.params().zero_grad();
  const double inv = 1.0 / static_cast<double>(batch.size());
  double sum_s = 0.0, sum_p = 0.0, sum_seg = 0.0;
  for (const TrainItem& item : batch) {
    const auto pick = [&](const std::vector<std::vector<int>>& caps) -> const std::vector<int>& {
      if (caps.size() == 1) return caps.front();
      std::uniform_int_distribution<std::size_t> d(0, caps.size() - 1);
      return caps[d(rng_)];
    };
    const auto& scene_ids = pick(item.scene_captions);
    const auto& proj_ids = pick(item.projection_captions);
    const SampleLoss loss = sample_loss(model_, kb_, item, scene_ids, proj_ids, cfg_);
    if (!std::isfinite(loss.total.item())) {
      std::ostringstream msg;
      msg << "step " << step_ << " sample " << item.sample_id << ": l_s=" << loss.l_s.item()
          << " l_p=" << loss.l_p.item() << " l_seg=" << loss.l_seg.item();
      throw Error(ErrorCode::kNonFiniteLoss, msg.str());
    }
    ag::backward(loss.total, inv);
    sum_s += loss.l_s.item();
    sum_p += loss.l_p.item();
    sum_seg += loss.l_seg.item();
  }
  optimizer_.step(model_.params(), lr, !cfg_.fp64_params);
  ++step_;
  return total_loss(sum_s * inv, sum_p * inv, sum_seg * inv, cfg_.weights);
}

std::vector<TrainLogRow> Trainer::run(std::span<const TrainItem> items,
                                      const std::function<void(const TrainLogRow&)>& on_step) {
  if (items.empty()) throw Error(ErrorCode::kEmptyCorpus, "no training samples");
  cfg_.optim.validate();
  std::vector<std::size_t> order(items.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  std::vector<TrainLogRow> log;
  const auto batch_size = static_cast<std::size_t>(cfg_.batch_size);
  std::vector<TrainItem> batch;
  for (long k = 0; k < cfg_.optim.total_steps; ++k) {
    batch.clear();
    while (batch.size() < std::min(batch_size, items.size())) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng_);
        cursor = 0;
      }
      batch.push_back(items[order[cursor++]]);
    }
    TrainLogRow row;
    row.step = k;
    row.lr = lr_schedule(k, cfg_.optim);
    row.loss = train_step(batch, row.lr);
    log.push_back(row);
    if (on_step) on_step(row);
  }
  return log;
}

void write_loss_log(const std::filesystem::path& path, std::span<const TrainLogRow> rows) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path.string());
  out << "step,lr,l_s,l_p,l_seg,total\n";
  out.precision(17);
  for (const auto& r : rows) {
    out << r.step << ',' << r.lr << ',' << r.loss.l_s << ',' << r.loss.l_p << ',' << r.loss.l_seg << ','
        << r.loss.total << '\n';
  }
  if (!out) throw Error(ErrorCode::kIoFailure, "short write to " + path.string());
}

double language_model_loss(const ProCapModel& model, const std::vector<std::vector<int>>& captions) {
  if (captions.empty()) throw Error(ErrorCode::kEmptyCorpus, "no captions");
  ag::NoGradGuard no_grad;
  double sum = 0.0;
  for (const auto& c : captions) sum += model.decoder().caption_nll(nullptr, c).item();
  return sum / static_cast<double>(captions.size());
}

std::vector<double> pretrain_decoder(ProCapModel& model, const std::vector<std::vector<int>>& captions,
                                     const PretrainConfig& cfg, std::uint64_t seed) {
  if (captions.empty()) throw Error(ErrorCode::kEmptyCorpus, "no captions to pretrain on");
  if (cfg.epochs < 0 || cfg.batch_size <= 0 || !(cfg.lr > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "invalid pretraining settings");
  }
  OptimizerConfig ocfg;
  ocfg.weight_decay = cfg.weight_decay;
  AdamW opt(ocfg);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(captions.size());
  std::iota(order.begin(), order.end(), 0);
  const bool was_frozen = model.decoder_frozen();
  model.set_decoder_frozen(false);
  std::vector<double> epoch_loss;
  for (int e = 0; e < cfg.epochs; ++e) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double inv = 1.0 / static_cast<double>(end - start);
      model.params().zero_grad();
      for (std::size_t i = start; i < end; ++i) {
        const Tensor loss = model.decoder().caption_nll(nullptr, captions[order[i]]);
        if (!std::isfinite(loss.item())) throw Error(ErrorCode::kNonFiniteLoss, "language-model loss diverged");
        ag::backward(loss, inv);
        sum += loss.item();
      }
      opt.step(model.params(), cfg.lr, true);
    }
    epoch_loss.push_back(sum / static_cast<double>(captions.size()));
  }
  model.set_decoder_frozen(was_frozen);
  return epoch_loss;
}

}  // namespace procap
