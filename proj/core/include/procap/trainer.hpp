#pragma once

// End-to-end multi-task training and decoder language-model pretraining.

#include "procap/losses.hpp"
#include "procap/model.hpp"
#include "procap/optimizer.hpp"
#include "procap/sar_compose.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace procap {

struct TrainConfig {
  OptimizerConfig optim;
  int batch_size = 8;
  std::uint64_t seed = 0;
  bool freeze_decoder = false;
  bool teacher_force_mask = false;
  /// Keep parameters at 64-bit between steps (gradient-check mode).
  bool fp64_params = false;
  LossWeights weights;
};

/// Resolves total_steps = 0 to one pass over `train_size` samples and clamps
/// warmup_steps to total_steps.
OptimizerConfig resolve_schedule(const OptimizerConfig& cfg, std::size_t train_size, int batch_size);

/// One training sample with its encoded caption sets.
struct TrainItem {
  std::string sample_id;
  const Image* composite = nullptr;
  const Image* gt_mask = nullptr;
  std::vector<std::vector<int>> scene_captions;
  std::vector<std::vector<int>> projection_captions;
};

std::vector<TrainItem> make_train_items(const Dataset& data, const std::string& split, const Vocabulary& vocab,
                                        int max_caption_len);

/// Unweighted per-sample losses of one forward pass, still attached to the graph.
struct SampleLoss {
  Tensor l_s;
  Tensor l_p;
  Tensor l_seg;
  Tensor total;
};

SampleLoss sample_loss(const ProCapModel& model, const KnowledgeBase* kb, const TrainItem& item,
                       std::span<const int> scene_ids, std::span<const int> proj_ids, const TrainConfig& cfg);

struct TrainLogRow {
  long step = 0;
  double lr = 0.0;
  LossBreakdown loss;
};

class Trainer {
 public:
  /// `kb` may be null (null-name context). The model is borrowed.
  Trainer(ProCapModel& model, const KnowledgeBase* kb, TrainConfig cfg);

  /// Forward + backward over `batch` with gradients averaged, then one AdamW
  /// update at `lr`. Reports batch-mean losses. Throws NonFiniteLoss.
  LossBreakdown train_step(std::span<const TrainItem> batch, double lr);

  /// Runs cfg.optim.total_steps steps over `items`, reshuffled every epoch.
  std::vector<TrainLogRow> run(std::span<const TrainItem> items,
                               const std::function<void(const TrainLogRow&)>& on_step = {});

  const TrainConfig& config() const { return cfg_; }

 private:
  ProCapModel& model_;
  const KnowledgeBase* kb_;
  TrainConfig cfg_;
  AdamW optimizer_;
  std::mt19937_64 rng_;
  long step_ = 0;
};

void write_loss_log(const std::filesystem::path& path, std::span<const TrainLogRow> rows);

struct PretrainConfig {
  int epochs = 40;
  double lr = 2e-3;
  int batch_size = 8;
  double weight_decay = 0.0;
};

/// Next-token language modelling of `captions` (encoded id sequences) with
/// no prompt. Only decoder parameters change. Returns the mean loss of every
/// epoch, measured during that epoch. Throws EmptyCorpus.
std::vector<double> pretrain_decoder(ProCapModel& model, const std::vector<std::vector<int>>& captions,
                                     const PretrainConfig& cfg, std::uint64_t seed);

/// Mean prompt-free caption NLL over `captions`.
double language_model_loss(const ProCapModel& model, const std::vector<std::vector<int>>& captions);

}  // namespace procap
