#pragma once

// Decoupled-weight-decay Adam and the warmup + cosine learning-rate schedule.

#include "procap/nn.hpp"

#include <vector>

namespace procap {

using ag::Matrix;
using ag::Tensor;

struct OptimizerConfig {
  double lr_init = 1e-4;
  double lr_warmup_start = 1e-6;
  long warmup_steps = 5000;
  long total_steps = 0;  // 0: one pass over the training split
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;

  /// Throws InvalidArgument unless rates are positive and warmup <= total.
  void validate() const;
};

/// Linear ramp lr_warmup_start -> lr_init over warmup_steps, then cosine decay
/// to zero at total_steps. Throws StepOutOfRange outside [0, total_steps].
double lr_schedule(long step, const OptimizerConfig& cfg);

class AdamW {
 public:
  explicit AdamW(const OptimizerConfig& cfg) : cfg_(cfg) {}

  /// Updates every parameter that requires grad and received one. When
  /// `round_to_float` is set, updated values are stored at 32-bit precision.
  void step(nn::ParamStore& store, double lr, bool round_to_float);

  long steps_taken() const { return t_; }

 private:
  struct Moments {
    Matrix m;
    Matrix v;
  };
  OptimizerConfig cfg_;
  std::vector<Moments> state_;
  long t_ = 0;
};

}  // namespace procap
