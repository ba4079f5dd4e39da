#include "gradcheck.hpp"

#include "procap/autograd.hpp"
#include "procap/error.hpp"
#include "procap/nn.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace procap;
using ag::Matrix;
using ag::Tensor;

namespace {

Matrix randn(Eigen::Index r, Eigen::Index c, std::uint64_t seed, double s = 1.0) {
  nn::Rng rng(seed);
  return nn::normal_matrix(r, c, s, rng);
}

// Direct-loop reference for conv3x3 with zero padding.
Matrix conv3x3_loops(const Matrix& x, int h, int w, const Matrix& wt, const Matrix& b) {
  const auto cin = x.cols(), cout = wt.cols();
  Matrix out = Matrix::Zero(h * w, cout);
  for (int y = 0; y < h; ++y)
    for (int xx = 0; xx < w; ++xx)
      for (Eigen::Index o = 0; o < cout; ++o) {
        double acc = b(0, o);
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx) {
            const int sy = y + ky - 1, sx = xx + kx - 1;
            if (sy < 0 || sy >= h || sx < 0 || sx >= w) continue;
            for (Eigen::Index c = 0; c < cin; ++c) acc += x(sy * w + sx, c) * wt((ky * 3 + kx) * cin + c, o);
          }
        out(y * w + xx, o) = acc;
      }
  return out;
}

// Scatter reference for the stride-2, kernel-4, padding-1 transposed conv.
Matrix deconv_loops(const Matrix& x, int h, int w, const Matrix& wt, const Matrix& b) {
  const auto cin = x.cols(), cout = b.cols();
  const int oh = 2 * h, ow = 2 * w;
  Matrix out = Matrix::Zero(oh * ow, cout);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j)
      for (int ky = 0; ky < 4; ++ky)
        for (int kx = 0; kx < 4; ++kx) {
          const int oy = 2 * i - 1 + ky, ox = 2 * j - 1 + kx;
          if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
          for (Eigen::Index c = 0; c < cin; ++c)
            for (Eigen::Index o = 0; o < cout; ++o)
              out(oy * ow + ox, o) += x(i * w + j, c) * wt(c, (ky * 4 + kx) * cout + o);
        }
  for (Eigen::Index r = 0; r < out.rows(); ++r) out.row(r) += b;
  return out;
}

Tensor sum_weighted(const Tensor& t, std::uint64_t seed) {
  // Scalar head with fixed random weights so every output entry matters.
  const Tensor w = Tensor::constant(randn(t.rows(), t.cols(), seed));
  return ag::mean_rows(ag::matmul_nt(ag::mul(t, w), Tensor::constant(Matrix::Ones(1, t.cols()))));
}

}  // namespace

TEST(Autograd, Conv3x3MatchesLoopOracle) {
  const Matrix x = randn(20, 3, 1), w = randn(27, 4, 2), b = randn(1, 4, 3);
  const Tensor y = ag::conv3x3(Tensor::constant(x), 4, 5, Tensor::constant(w), Tensor::constant(b));
  EXPECT_LT((y.value() - conv3x3_loops(x, 4, 5, w, b)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Autograd, DeconvMatchesScatterOracle) {
  const Matrix x = randn(6, 3, 4), w = randn(3, 16 * 2, 5), b = randn(1, 2, 6);
  const Tensor y = ag::deconv4x4s2(Tensor::constant(x), 2, 3, Tensor::constant(w), Tensor::constant(b));
  ASSERT_EQ(y.rows(), 4 * 6);
  EXPECT_LT((y.value() - deconv_loops(x, 2, 3, w, b)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Autograd, SpatialOpGradients) {
  Tensor x = Tensor::parameter(randn(6, 3, 7));
  Tensor w1 = Tensor::parameter(randn(27, 2, 8));
  Tensor b1 = Tensor::parameter(randn(1, 2, 9));
  Tensor w2 = Tensor::parameter(randn(2, 16 * 2, 10));
  Tensor b2 = Tensor::parameter(randn(1, 2, 11));
  const auto r = fx::gradcheck({{"x", x}, {"w1", w1}, {"b1", b1}, {"w2", w2}, {"b2", b2}}, [&] {
    const Tensor c = ag::gelu(ag::conv3x3(x, 2, 3, w1, b1));
    return sum_weighted(ag::deconv4x4s2(c, 2, 3, w2, b2), 12);
  });
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(Autograd, AttentionAndNormGradients) {
  Tensor q = Tensor::parameter(randn(3, 8, 1));
  Tensor kv = Tensor::parameter(randn(5, 8, 2));
  Tensor g = Tensor::parameter(randn(1, 8, 3));
  Tensor b = Tensor::parameter(randn(1, 8, 4));
  for (bool causal : {false, true}) {
    const auto r = fx::gradcheck({{"q", q}, {"kv", kv}, {"gamma", g}, {"beta", b}}, [&] {
      const Tensor keys = causal ? ag::slice_rows(kv, 0, 3) : kv;
      return sum_weighted(ag::layer_norm(ag::attention(q, keys, keys, 2, causal), g, b), 5);
    });
    EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
  }
}

TEST(Autograd, ShapeOpsAndLossGradients) {
  Tensor a = Tensor::parameter(randn(4, 5, 1));
  Tensor table = Tensor::parameter(randn(6, 5, 2));
  const std::vector<int> ids{3, 0, 3, 5};
  const std::vector<int> targets{1, 0, 2, 3};
  const auto r = fx::gradcheck({{"a", a}, {"table", table}}, [&] {
    const Tensor rows = ag::gather_rows(table, ids);
    const std::vector<Tensor> parts{ag::slice_cols(a, 1, 3), ag::slice_cols(rows, 0, 2)};
    const Tensor z = ag::add(ag::concat_cols(parts), ag::scale(ag::softmax_rows(a), 0.5));
    const Tensor logits = ag::causal_softmax_rows(ag::matmul_nt(z, z), 1);
    return ag::cross_entropy(logits, targets, 0);
  });
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(Autograd, BinaryCrossEntropyMatchesLoopAndGradient) {
  Tensor logits = Tensor::parameter(randn(10, 1, 3));
  nn::Rng rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix t(10, 1);
  for (int i = 0; i < 10; ++i) t(i, 0) = u(rng);
  const Tensor p = ag::sigmoid(logits);
  double oracle = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double pi = p.value()(i, 0);
    oracle += -(t(i, 0) * std::log(pi) + (1 - t(i, 0)) * std::log(1 - pi));
  }
  EXPECT_NEAR(ag::binary_cross_entropy(p, t, 1e-7).item(), oracle / 10, 1e-12);
  const auto r = fx::gradcheck({{"logits", logits}},
                                    [&] { return ag::binary_cross_entropy(ag::sigmoid(logits), t, 1e-7); });
  EXPECT_LT(r.max_rel_error, 1e-6) << r.worst;
}

TEST(Autograd, NoGradGuardDropsGraph) {
  Tensor a = Tensor::parameter(randn(2, 2, 1));
  ag::NoGradGuard guard;
  const Tensor y = ag::matmul(a, a);
  EXPECT_FALSE(y.requires_grad());
  EXPECT_FALSE(ag::grad_enabled());
}

TEST(Autograd, LeafGradientsAccumulate) {
  Tensor a = Tensor::parameter(Matrix::Constant(1, 1, 3.0));
  ag::backward(ag::mul(a, a));
  ag::backward(ag::mul(a, a));
  EXPECT_DOUBLE_EQ(a.grad()(0, 0), 12.0);
  a.zero_grad();
  EXPECT_FALSE(a.has_grad());
}

TEST(Autograd, CrossEntropyWithAllTargetsIgnoredThrows) {
  const std::vector<int> targets{0, 0};
  try {
    ag::cross_entropy(Tensor::constant(Matrix::Zero(2, 4)), targets, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptySequence);
  }
}
