#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. Every value in the model is a 2-D matrix; feature grids are
// stored as (rows = H*W cells, cols = channels) with row index y*W + x.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace procap::ag {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Matrix& g);
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor constant(Matrix value);
  static Tensor parameter(Matrix value);

  bool defined() const noexcept { return node_ != nullptr; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  double item() const { return node_->value(0, 0); }

  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  /// Gradient, or an empty matrix when nothing has flowed into this tensor.
  const Matrix& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.resize(0, 0); }
  void set_requires_grad(bool on) { node_->requires_grad = on; }

  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

/// Back-propagates from `root`, seeding its gradient with `seed` in every
/// entry. Leaf gradients accumulate across calls until zero_grad().
void backward(const Tensor& root, double seed = 1.0);

Tensor detach(const Tensor& t);

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
/// a * b^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, const Tensor& b);
/// Adds a 1xC row vector to every row of a.
Tensor add_row(const Tensor& a, const Tensor& row);
Tensor mul(const Tensor& a, const Tensor& b);
/// Scales row i of a by m(i, 0); m is Nx1.
Tensor mul_col(const Tensor& a, const Tensor& m);
Tensor scale(const Tensor& a, double s);

// Elementwise nonlinearities.
Tensor gelu(const Tensor& a);
Tensor sigmoid(const Tensor& a);

Tensor softmax_rows(const Tensor& a);
/// Row softmax where entry (i, j) is masked out when j > i + offset.
Tensor causal_softmax_rows(const Tensor& a, Index offset = 0);
/// Scaled dot-product attention with the D columns split into `heads`
/// equal groups. When `causal`, query i sees keys 0..i only.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads, bool causal);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Shape manipulation.
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& a, Index start, Index count);
Tensor slice_cols(const Tensor& a, Index start, Index count);
Tensor gather_rows(const Tensor& table, std::span<const int> ids);
Tensor mean_rows(const Tensor& a);

// Spatial layers on (H*W) x C grids.
/// 3x3 convolution, stride 1, zero padding 1. weight: (9*Cin) x Cout with
/// row index (ky*3 + kx)*Cin + cin; bias: 1 x Cout.
Tensor conv3x3(const Tensor& x, Index height, Index width, const Tensor& weight,
               const Tensor& bias);
/// Transposed convolution, kernel 4, stride 2, padding 1 (output 2H x 2W).
/// weight: Cin x (16*Cout) with column index (ky*4 + kx)*Cout + cout.
Tensor deconv4x4s2(const Tensor& x, Index height, Index width, const Tensor& weight,
                   const Tensor& bias);

// Scalar-valued losses (1x1 outputs).
/// Mean over rows whose target != ignore_id of -log softmax(logits)[target].
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, int ignore_id);
/// Mean binary cross-entropy with predictions clamped to [eps, 1 - eps].
Tensor binary_cross_entropy(const Tensor& pred, const Matrix& target, double eps);

}  // namespace procap::ag
