#include "procap/vision.hpp"

#include "procap/error.hpp"

#include <cmath>

namespace procap {

FrozenEncoder::FrozenEncoder(int patch_size, int embed_dim, std::uint64_t seed)
    : patch_(patch_size), dim_(embed_dim) {
  if (patch_size <= 0 || embed_dim <= 0 || embed_dim % 2 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "encoder needs patch > 0 and an even embed_dim");
  }
  nn::Rng rng(seed);
  const Index in = static_cast<Index>(patch_size) * patch_size * 3;
  weight_ = nn::normal_matrix(in, embed_dim, 1.0 / std::sqrt(static_cast<double>(in)), rng);
}

Matrix FrozenEncoder::positions(Index h, Index w) const { return nn::sinusoid_2d(h, w, dim_); }

FeatureGrid FrozenEncoder::encode(const Image& image) const {
  if (image.channels != 3 || image.height % patch_ != 0 || image.width % patch_ != 0) {
    throw Error(ErrorCode::kDimensionMismatch, "image must be RGB with sides divisible by the patch size");
  }
  const Index gh = image.height / patch_;
  const Index gw = image.width / patch_;
  Matrix patches(gh * gw, static_cast<Index>(patch_) * patch_ * 3);
  for (Index gy = 0; gy < gh; ++gy) {
    for (Index gx = 0; gx < gw; ++gx) {
      Index col = 0;
      for (int py = 0; py < patch_; ++py) {
        for (int px = 0; px < patch_; ++px) {
          for (int c = 0; c < 3; ++c) {
            patches(gy * gw + gx, col++) =
                image.at(static_cast<int>(gy) * patch_ + py, static_cast<int>(gx) * patch_ + px, c);
          }
        }
      }
    }
  }
  Matrix features = patches * weight_;
  features += positions(gh, gw);
  return {Tensor::constant(std::move(features)), gh, gw, GridResolution::kCoarse};
}

Refiner Refiner::create(nn::ParamStore& store, const std::string& name, Index in_channels,
                        Index hidden, Index out_channels, nn::Rng& rng) {
  // Each output cell of a k4/s2 transposed conv receives 2x2 taps per channel.
  Refiner r;
  r.deconv1_w = store.add(name + ".deconv1.weight",
                          nn::normal_matrix(in_channels, 16 * hidden, 1.0 / std::sqrt(4.0 * in_channels), rng));
  r.deconv1_b = store.add(name + ".deconv1.bias", Matrix::Zero(1, hidden));
  r.deconv2_w = store.add(name + ".deconv2.weight",
                          nn::normal_matrix(hidden, 16 * out_channels, 1.0 / std::sqrt(4.0 * hidden), rng));
  r.deconv2_b = store.add(name + ".deconv2.bias", Matrix::Zero(1, out_channels));
  return r;
}

FeatureGrid Refiner::operator()(const FeatureGrid& coarse) const {
  if (coarse.data.rows() != coarse.height * coarse.width) {
    throw Error(ErrorCode::kDimensionMismatch, "malformed coarse grid");
  }
  auto mid = ag::gelu(ag::deconv4x4s2(coarse.data, coarse.height, coarse.width, deconv1_w, deconv1_b));
  auto out = ag::deconv4x4s2(mid, 2 * coarse.height, 2 * coarse.width, deconv2_w, deconv2_b);
  return {out, 4 * coarse.height, 4 * coarse.width, GridResolution::kRefined};
}

SegmentationHead SegmentationHead::create(nn::ParamStore& store, const std::string& name,
                                          Index in_channels, Index hidden, nn::Rng& rng) {
  SegmentationHead s;
  s.conv1_w = store.add(name + ".conv1.weight",
                        nn::normal_matrix(9 * in_channels, hidden, 1.0 / std::sqrt(9.0 * in_channels), rng));
  s.conv1_b = store.add(name + ".conv1.bias", Matrix::Zero(1, hidden));
  s.conv2_w = store.add(name + ".conv2.weight",
                        nn::normal_matrix(9 * hidden, 1, 1.0 / std::sqrt(9.0 * hidden), rng));
  s.conv2_b = store.add(name + ".conv2.bias", Matrix::Zero(1, 1));
  return s;
}

MaskGrid SegmentationHead::operator()(const FeatureGrid& grid) const {
  if (grid.data.rows() != grid.height * grid.width) {
    throw Error(ErrorCode::kDimensionMismatch, "malformed feature grid");
  }
  auto hidden = ag::gelu(ag::conv3x3(grid.data, grid.height, grid.width, conv1_w, conv1_b));
  auto logits = ag::conv3x3(hidden, grid.height, grid.width, conv2_w, conv2_b);
  return {ag::sigmoid(logits), grid.height, grid.width, MaskKind::kPredicted};
}

FeatureGrid mask_pool(const FeatureGrid& grid, const MaskGrid& mask) {
  if (grid.height != mask.height || grid.width != mask.width || mask.data.cols() != 1 ||
      mask.data.rows() != grid.data.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "mask and feature grid sizes differ");
  }
  return {ag::mul_col(grid.data, mask.data), grid.height, grid.width, grid.resolution};
}

MaskGrid downsample_gt_mask(const Image& pixel_mask, Index grid_h, Index grid_w) {
  if (pixel_mask.channels != 1 || grid_h <= 0 || grid_w <= 0 || pixel_mask.height % grid_h != 0 ||
      pixel_mask.width % grid_w != 0) {
    throw Error(ErrorCode::kDimensionMismatch, "pixel mask is not divisible into the target grid");
  }
  const int bh = pixel_mask.height / static_cast<int>(grid_h);
  const int bw = pixel_mask.width / static_cast<int>(grid_w);
  Matrix target(grid_h * grid_w, 1);
  for (Index gy = 0; gy < grid_h; ++gy) {
    for (Index gx = 0; gx < grid_w; ++gx) {
      double sum = 0.0;
      for (int y = 0; y < bh; ++y) {
        for (int x = 0; x < bw; ++x) {
          sum += pixel_mask.at(static_cast<int>(gy) * bh + y, static_cast<int>(gx) * bw + x, 0);
        }
      }
      target(gy * grid_w + gx, 0) = sum / static_cast<double>(bh * bw);
    }
  }
  return {Tensor::constant(std::move(target)), grid_h, grid_w, MaskKind::kTarget};
}

}  // namespace procap
