#include "procap/losses.hpp"

#include "procap/error.hpp"

#include <cmath>

namespace procap {

void LossWeights::validate() const {
  for (double v : {alpha, beta, gamma}) {
    if (!std::isfinite(v) || v < 0.0) throw Error(ErrorCode::kInvalidArgument, "loss weights must be finite and >= 0");
  }
}

Tensor seg_loss(const MaskGrid& pred, const MaskGrid& target) {
  if (pred.height != target.height || pred.width != target.width || pred.data.rows() != target.data.rows() ||
      pred.data.cols() != 1 || target.data.cols() != 1) {
    throw Error(ErrorCode::kDimensionMismatch, "predicted and target masks differ in size");
  }
  return ag::binary_cross_entropy(pred.data, target.data.value(), kBceEps);
}

LossBreakdown total_loss(double l_s, double l_p, double l_seg, const LossWeights& w) {
  if (!std::isfinite(l_s) || !std::isfinite(l_p) || !std::isfinite(l_seg)) {
    throw Error(ErrorCode::kNonFinite, "loss component is not finite");
  }
  LossBreakdown b{l_s, l_p, l_seg, 0.0};
  b.total = w.alpha * l_s + w.beta * l_p + w.gamma * l_seg;
  return b;
}

Tensor weighted_total(const Tensor& l_s, const Tensor& l_p, const Tensor& l_seg, const LossWeights& w) {
  return ag::add(ag::add(ag::scale(l_s, w.alpha), ag::scale(l_p, w.beta)), ag::scale(l_seg, w.gamma));
}

}  // namespace procap
