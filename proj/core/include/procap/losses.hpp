#pragma once

#include "procap/vision.hpp"

namespace procap {

inline constexpr double kBceEps = 1e-7;

struct LossWeights {
  double alpha = 0.5;  // scene caption
  double beta = 0.5;   // projection caption
  double gamma = 1.0;  // segmentation

  /// Throws InvalidArgument on a negative or non-finite weight.
  void validate() const;
};

struct LossBreakdown {
  double l_s = 0.0;
  double l_p = 0.0;
  double l_seg = 0.0;
  double total = 0.0;
};

/// Mean clamped binary cross-entropy between a predicted and a target mask.
/// Throws DimensionMismatch.
Tensor seg_loss(const MaskGrid& pred, const MaskGrid& target);

/// total = alpha*l_s + beta*l_p + gamma*l_seg, evaluated left to right.
/// Throws NonFinite.
LossBreakdown total_loss(double l_s, double l_p, double l_seg, const LossWeights& w);

/// Graph version of total_loss with the same evaluation order.
Tensor weighted_total(const Tensor& l_s, const Tensor& l_p, const Tensor& l_seg, const LossWeights& w);

}  // namespace procap
