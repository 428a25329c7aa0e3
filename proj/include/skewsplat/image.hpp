#pragma once

#include "skewsplat/types.hpp"

#include <cstddef>
#include <vector>

namespace skewsplat {

/// Row-major RGB image of doubles, channels interleaved.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h, double fill = 0.0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * 3 + c;
  }
  double& at(int x, int y, int c) { return data[index(x, y, c)]; }
  double at(int x, int y, int c) const { return data[index(x, y, c)]; }
  Vec3 pixel(int x, int y) const {
    const std::size_t i = index(x, y);
    return Vec3(data[i], data[i + 1], data[i + 2]);
  }
  void set_pixel(int x, int y, const Vec3& v) {
    const std::size_t i = index(x, y);
    data[i] = v[0];
    data[i + 1] = v[1];
    data[i + 2] = v[2];
  }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  bool same_size(const Image& o) const { return width == o.width && height == o.height; }
};

}  // namespace skewsplat
