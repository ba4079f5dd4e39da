#include "fixtures.hpp"
#include "gradcheck.hpp"

#include "procap/error.hpp"
#include "procap/losses.hpp"
#include "procap/vision.hpp"

#include <gtest/gtest.h>

using namespace procap;

namespace {

Matrix randn(Index r, Index c, std::uint64_t seed, double s = 1.0) {
  nn::Rng rng(seed);
  return nn::normal_matrix(r, c, s, rng);
}

Matrix uniform01(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

}  // namespace

TEST(Encoder, ShapeAndDeterminism) {
  FrozenEncoder enc(8, 64, 3);
  const Image img = fx::random_image(64, 64, 3, 1);
  const FeatureGrid a = enc.encode(img), b = enc.encode(img);
  EXPECT_EQ(a.height, 8);
  EXPECT_EQ(a.width, 8);
  EXPECT_EQ(a.channels(), 64);
  EXPECT_EQ(a.data.value(), b.data.value());
  EXPECT_FALSE(a.data.requires_grad());
}

TEST(Encoder, ZeroImageGivesPositionTable) {
  FrozenEncoder enc(4, 16, 5);
  const FeatureGrid g = enc.encode(fx::constant_image(8, 12, 3, 0.0));
  EXPECT_EQ(g.data.value(), nn::sinusoid_2d(2, 3, 16));
}

TEST(Encoder, IndivisibleImageThrows) {
  FrozenEncoder enc(8, 16, 5);
  try {
    enc.encode(fx::constant_image(20, 16, 3, 0.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDimensionMismatch);
  }
}

TEST(Encoder, NeverEntersTheParameterStore) {
  nn::ParamStore store;
  nn::Rng rng(1);
  Refiner::create(store, "refine", 64, 32, 32, rng);
  for (const auto& p : store.params()) EXPECT_NE(p.name.find("refine."), std::string::npos);
}

TEST(Refiner, ShapeContract) {
  nn::ParamStore store;
  nn::Rng rng(1);
  const Refiner r = Refiner::create(store, "refine", 64, 32, 32, rng);
  FrozenEncoder enc(8, 64, 3);
  const FeatureGrid out = r(enc.encode(fx::random_image(64, 64, 3, 2)));
  EXPECT_EQ(out.height, 32);
  EXPECT_EQ(out.width, 32);
  EXPECT_EQ(out.channels(), 32);
  EXPECT_EQ(out.resolution, GridResolution::kRefined);
}

TEST(Refiner, ZeroInputZeroBiasGivesZero) {
  nn::ParamStore store;
  nn::Rng rng(1);
  const Refiner r = Refiner::create(store, "refine", 8, 4, 4, rng);
  const FeatureGrid in{Tensor::constant(Matrix::Zero(4, 8)), 2, 2, GridResolution::kCoarse};
  EXPECT_EQ(r(in).data.value().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Refiner, GradientsMatchFiniteDifferences) {
  nn::ParamStore store;
  nn::Rng rng(2);
  const Refiner r = Refiner::create(store, "refine", 4, 3, 2, rng);
  store.at("refine.deconv1.bias").mutable_value() = randn(1, 3, 9, 0.3);
  Tensor x = Tensor::parameter(randn(4, 4, 3));
  const Matrix head = randn(64, 2, 4);
  std::vector<std::pair<std::string, Tensor>> inputs{{"x", x}};
  for (auto& p : store.params()) inputs.emplace_back(p.name, p.tensor);
  const auto res = fx::gradcheck(inputs, [&] {
    const FeatureGrid out = r({x, 2, 2, GridResolution::kCoarse});
    return ag::mean_rows(ag::matmul_nt(ag::mul(out.data, Tensor::constant(head)), Tensor::constant(Matrix::Ones(1, 2))));
  });
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
}

TEST(Segmenter, ZeroWeightsGiveHalf) {
  nn::ParamStore store;
  nn::Rng rng(3);
  const SegmentationHead s = SegmentationHead::create(store, "segment", 4, 16, rng);
  for (auto& p : store.params()) p.tensor.mutable_value().setZero();
  const MaskGrid m = s({Tensor::constant(randn(9, 4, 1)), 3, 3, GridResolution::kRefined});
  EXPECT_EQ(m.data.value(), Matrix::Constant(9, 1, 0.5));
}

TEST(Segmenter, OutputStrictlyInsideUnitInterval) {
  nn::ParamStore store;
  nn::Rng rng(3);
  const SegmentationHead s = SegmentationHead::create(store, "segment", 32, 16, rng);
  const MaskGrid m = s({Tensor::constant(randn(32 * 32, 32, 2)), 32, 32, GridResolution::kRefined});
  EXPECT_EQ(m.height, 32);
  EXPECT_GT(m.data.value().minCoeff(), 0.0);
  EXPECT_LT(m.data.value().maxCoeff(), 1.0);
}

TEST(Segmenter, BceGradientMatchesFiniteDifferences) {
  nn::ParamStore store;
  nn::Rng rng(4);
  const SegmentationHead s = SegmentationHead::create(store, "segment", 3, 4, rng);
  const Matrix x = randn(12, 3, 5);
  const MaskGrid target{Tensor::constant(uniform01(12, 1, 6)), 3, 4, MaskKind::kTarget};
  std::vector<std::pair<std::string, Tensor>> inputs;
  for (auto& p : store.params()) inputs.emplace_back(p.name, p.tensor);
  const auto res = fx::gradcheck(inputs, [&] {
    return seg_loss(s({Tensor::constant(x), 3, 4, GridResolution::kRefined}), target);
  });
  EXPECT_LT(res.max_rel_error, 1e-4) << res.worst;
}

TEST(MaskPool, IdentityAndNullGates) {
  const FeatureGrid g{Tensor::constant(randn(6, 5, 1)), 2, 3, GridResolution::kRefined};
  const MaskGrid ones{Tensor::constant(Matrix::Ones(6, 1)), 2, 3, MaskKind::kBinary};
  const MaskGrid zeros{Tensor::constant(Matrix::Zero(6, 1)), 2, 3, MaskKind::kBinary};
  EXPECT_EQ(mask_pool(g, ones).data.value(), g.data.value());
  EXPECT_EQ(mask_pool(g, zeros).data.value().cwiseAbs().maxCoeff(), 0.0);
}

TEST(MaskPool, GatingIsLinearInTheMask) {
  const FeatureGrid g{Tensor::constant(randn(6, 5, 1)), 2, 3, GridResolution::kRefined};
  const Matrix m1 = uniform01(6, 1, 2), m2 = uniform01(6, 1, 3);
  const auto pool = [&](const Matrix& m) {
    return mask_pool(g, {Tensor::constant(m), 2, 3, MaskKind::kPredicted}).data.value();
  };
  const Matrix lhs = pool(0.3 * m1 + 0.5 * m2);
  const Matrix rhs = 0.3 * pool(m1) + 0.5 * pool(m2);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(MaskPool, SizeMismatchThrows) {
  const FeatureGrid g{Tensor::constant(randn(6, 5, 1)), 2, 3, GridResolution::kRefined};
  const MaskGrid m{Tensor::constant(Matrix::Ones(4, 1)), 2, 2, MaskKind::kBinary};
  EXPECT_THROW(mask_pool(g, m), Error);
}

TEST(MaskPool, GradientFlowsIntoBothArguments) {
  Tensor grid = Tensor::parameter(randn(6, 3, 1));
  Tensor mask = Tensor::parameter(uniform01(6, 1, 2));
  const Matrix head = randn(6, 3, 3);
  const auto res = fx::gradcheck({{"grid", grid}, {"mask", mask}}, [&] {
    const FeatureGrid out = mask_pool({grid, 2, 3, GridResolution::kRefined}, {mask, 2, 3, MaskKind::kPredicted});
    return ag::mean_rows(ag::matmul_nt(ag::mul(out.data, Tensor::constant(head)), Tensor::constant(Matrix::Ones(1, 3))));
  });
  EXPECT_LT(res.max_rel_error, 1e-6) << res.worst;
}

TEST(Downsample, AllOnesAndHalfBlock) {
  const MaskGrid ones = downsample_gt_mask(fx::constant_image(8, 8, 1, 1.0), 2, 2);
  EXPECT_EQ(ones.data.value(), Matrix::Ones(4, 1));
  Image half = fx::constant_image(4, 4, 1, 0.0);
  for (int y = 0; y < 4; ++y) half.at(y, 0, 0) = half.at(y, 1, 0) = 1.0;
  const MaskGrid m = downsample_gt_mask(half, 1, 1);
  EXPECT_DOUBLE_EQ(m.data.item(), 0.5);
  EXPECT_THROW(downsample_gt_mask(half, 3, 3), Error);
}
