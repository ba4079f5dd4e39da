#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace procap {

/// Row-major H x W x C image with channel values in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c), fill) {}

  double& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                    static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
                    static_cast<std::size_t>(channels) + static_cast<std::size_t>(c)];
  }
  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

/// Snap every value to the nearest 8-bit level k/255.
void quantize_8bit(Image& img);

/// Writes an 8-bit PNG (1 channel = grayscale, 3 = RGB). Output bytes depend
/// only on the pixel values.
void write_png(const std::filesystem::path& path, const Image& img);
/// Reads an 8-bit PNG. Grayscale stays 1 channel; RGB(A) becomes 3 channels.
Image read_png(const std::filesystem::path& path);

}  // namespace procap
