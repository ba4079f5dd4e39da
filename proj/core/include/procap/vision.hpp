#pragma once

// Frozen patch encoder, trainable feature refinement, projection
// segmentation head and mask pooling.

#include "procap/autograd.hpp"
#include "procap/image.hpp"
#include "procap/nn.hpp"

#include <cstdint>

namespace procap {

using ag::Index;
using ag::Matrix;
using ag::Tensor;

enum class GridResolution { kCoarse, kRefined };
enum class MaskKind { kPredicted, kTarget, kBinary };

/// (height*width) x channels grid; row index y*width + x.
struct FeatureGrid {
  Tensor data;
  Index height = 0;
  Index width = 0;
  GridResolution resolution = GridResolution::kCoarse;

  Index channels() const { return data.cols(); }
};

/// (height*width) x 1 grid with values in [0, 1].
struct MaskGrid {
  Tensor data;
  Index height = 0;
  Index width = 0;
  MaskKind kind = MaskKind::kPredicted;
};

/// Seeded linear patch embedding plus a fixed 2-D sinusoidal table. Its
/// arrays never enter a ParamStore, so no optimiser can touch them.
class FrozenEncoder {
 public:
  FrozenEncoder(int patch_size, int embed_dim, std::uint64_t seed);

  /// Throws DimensionMismatch unless H and W are multiples of the patch size.
  FeatureGrid encode(const Image& image) const;

  int patch_size() const { return patch_; }
  int embed_dim() const { return dim_; }
  const Matrix& weight() const { return weight_; }
  /// Positional table for an (h x w) patch grid.
  Matrix positions(Index h, Index w) const;

 private:
  int patch_;
  int dim_;
  Matrix weight_;  // (patch*patch*3) x dim
};

/// Two stride-2 transposed convolutions with GELU between: (s,s,C) -> (4s,4s,C_r).
struct Refiner {
  Tensor deconv1_w, deconv1_b, deconv2_w, deconv2_b;

  static Refiner create(nn::ParamStore& store, const std::string& name, Index in_channels,
                        Index hidden, Index out_channels, nn::Rng& rng);
  FeatureGrid operator()(const FeatureGrid& coarse) const;
};

/// conv3x3(C -> hidden) + GELU + conv3x3(hidden -> 1) + logistic.
struct SegmentationHead {
  Tensor conv1_w, conv1_b, conv2_w, conv2_b;

  static SegmentationHead create(nn::ParamStore& store, const std::string& name,
                                 Index in_channels, Index hidden, nn::Rng& rng);
  MaskGrid operator()(const FeatureGrid& grid) const;
};

/// out(i, :) = mask(i) * grid(i, :). Throws DimensionMismatch on size mismatch.
FeatureGrid mask_pool(const FeatureGrid& grid, const MaskGrid& mask);

/// Block-mean coverage of a binary pixel mask at (grid_h x grid_w).
MaskGrid downsample_gt_mask(const Image& pixel_mask, Index grid_h, Index grid_w);

}  // namespace procap
