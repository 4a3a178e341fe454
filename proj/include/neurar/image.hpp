#pragma once

#include <vector>

#include "neurar/geometry.hpp"

namespace neurar {

/// H x W color + depth raster with the pose it was taken from.
/// Color channels live in [0, 1]; depth is meters along the pixel ray,
/// non-positive meaning "no hit".
struct RgbdImage {
  int width = 0;
  int height = 0;
  std::vector<double> color;  // row-major, 3 per pixel
  std::vector<double> depth;  // row-major
  Viewpoint pose;

  RgbdImage() = default;
  RgbdImage(int w, int h) : width(w), height(h), color(3u * w * h, 0.0), depth(1u * w * h, 0.0) {}

  int pixel_count() const { return width * height; }

  Vec3 color_at(int x, int y) const {
    const double* c = &color[3u * (static_cast<std::size_t>(y) * width + x)];
    return {c[0], c[1], c[2]};
  }
  void set_color(int x, int y, const Vec3& c) {
    double* p = &color[3u * (static_cast<std::size_t>(y) * width + x)];
    p[0] = clamp01(c[0]);
    p[1] = clamp01(c[1]);
    p[2] = clamp01(c[2]);
  }
  double depth_at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
  void set_depth(int x, int y, double d) { depth[static_cast<std::size_t>(y) * width + x] = d; }
};

}  // namespace neurar
