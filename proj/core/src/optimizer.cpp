#include "procap/optimizer.hpp"

#include "procap/error.hpp"

#include <cmath>
#include <numbers>

namespace procap {

void OptimizerConfig::validate() const {
  if (!(lr_init > 0.0) || !(lr_warmup_start > 0.0) || !(beta1 > 0.0 && beta1 < 1.0) ||
      !(beta2 > 0.0 && beta2 < 1.0) || !(eps > 0.0) || weight_decay < 0.0) {
    throw Error(ErrorCode::kInvalidArgument, "optimizer rates out of range");
  }
  if (warmup_steps < 0 || total_steps < 0 || warmup_steps > total_steps) {
    throw Error(ErrorCode::kInvalidArgument, "warmup_steps must lie in [0, total_steps]");
  }
}

double lr_schedule(long step, const OptimizerConfig& cfg) {
  if (step < 0 || step > cfg.total_steps) {
    throw Error(ErrorCode::kStepOutOfRange,
                "step " + std::to_string(step) + " outside [0, " + std::to_string(cfg.total_steps) + "]");
  }
  if (step < cfg.warmup_steps) {
    const double f = static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
    return cfg.lr_warmup_start + (cfg.lr_init - cfg.lr_warmup_start) * f;
  }
  const long decay = cfg.total_steps - cfg.warmup_steps;
  if (decay == 0) return cfg.lr_init;
  const double f = static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(decay);
  return cfg.lr_init * 0.5 * (1.0 + std::cos(std::numbers::pi * f));
}

void AdamW::step(nn::ParamStore& store, double lr, bool round_to_float) {
  auto& params = store.params();
  if (state_.size() < params.size()) state_.resize(params.size());
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i].tensor;
    if (!p.requires_grad() || !p.has_grad()) continue;
    const Matrix& g = p.grad();
    Moments& s = state_[i];
    if (s.m.size() == 0) {
      s.m = Matrix::Zero(g.rows(), g.cols());
      s.v = Matrix::Zero(g.rows(), g.cols());
    }
    s.m = cfg_.beta1 * s.m + (1.0 - cfg_.beta1) * g;
    s.v = cfg_.beta2 * s.v + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
    Matrix& w = p.mutable_value();
    w *= 1.0 - lr * cfg_.weight_decay;
    w.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + cfg_.eps);
    if (round_to_float) nn::round_to_float(w);
  }
}

}  // namespace procap
