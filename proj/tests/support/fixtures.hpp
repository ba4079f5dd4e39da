#pragma once

#include "procap/image.hpp"
#include "procap/sar_compose.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>

namespace procap::fx {

inline Image random_image(int h, int w, int c, std::uint64_t seed) {
  Image img(h, w, c);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> u(0, 255);
  for (auto& v : img.data) v = u(rng) / 255.0;
  return img;
}

inline Image constant_image(int h, int w, int c, double v) {
  return Image(h, w, c, v);
}

/// Homography taking the source rectangle onto a random convex quad that may
/// extend past the canvas.
inline Homography random_homography(std::mt19937_64& rng, int canvas, int src) {
  std::uniform_real_distribution<double> c(0.2 * canvas, 0.8 * canvas);
  std::uniform_real_distribution<double> s(0.25 * canvas, 0.6 * canvas);
  std::uniform_real_distribution<double> a(0.0, 6.283185307179586);
  std::uniform_real_distribution<double> j(-0.12, 0.12);
  const double cx = c(rng), cy = c(rng), half = s(rng), th = a(rng);
  std::array<Point2, 4> dst;
  const std::array<std::array<double, 2>, 4> unit{{{-1, -1}, {1, -1}, {1, 1}, {-1, 1}}};
  for (int k = 0; k < 4; ++k) {
    const double ux = unit[k][0] * (1 + j(rng)), uy = unit[k][1] * (1 + j(rng));
    dst[k] = {cx + half * (ux * std::cos(th) - uy * std::sin(th)), cy + half * (ux * std::sin(th) + uy * std::cos(th))};
  }
  const std::array<Point2, 4> srcq{{{0, 0}, {double(src), 0}, {double(src), double(src)}, {0, double(src)}}};
  return homography_from_quads(srcq, dst);
}

/// Crossing-number test, independent of the compose implementation.
inline bool point_in_polygon(const std::array<Point2, 4>& q, double x, double y) {
  bool inside = false;
  for (int i = 0, k = 3; i < 4; k = i++) {
    if ((q[i].y > y) != (q[k].y > y)) {
      const double xc = q[k].x + (y - q[k].y) * (q[i].x - q[k].x) / (q[i].y - q[k].y);
      if (x < xc) inside = !inside;
    }
  }
  return inside;
}

inline double distance_to_polygon_edge(const std::array<Point2, 4>& q, double x, double y) {
  double best = 1e300;
  for (int i = 0, k = 3; i < 4; k = i++) {
    const double ex = q[i].x - q[k].x, ey = q[i].y - q[k].y;
    const double t = std::clamp(((x - q[k].x) * ex + (y - q[k].y) * ey) / (ex * ex + ey * ey), 0.0, 1.0);
    best = std::min(best, std::hypot(x - (q[k].x + t * ex), y - (q[k].y + t * ey)));
  }
  return best;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("procap_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace procap::fx
