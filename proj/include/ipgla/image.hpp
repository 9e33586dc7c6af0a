#pragma once

#include <cstddef>

#include "ipgla/core.hpp"

namespace ipgla {

/// Image shape (rows x columns). Pixels are stored row-major.
struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t size() const { return height * width; }
  bool operator==(const Shape&) const = default;
};

/// Row-major grayscale image with real intensities.
struct ImageBuffer {
  Shape shape;
  Vec data;

  ImageBuffer() = default;
  ImageBuffer(Shape s, double fill = 0.0) : shape(s), data(s.size(), fill) {}
  ImageBuffer(Shape s, Vec values) : shape(s), data(std::move(values)) {
    require(data.size() == shape.size(), "ImageBuffer: data length != height*width");
  }

  std::size_t height() const { return shape.height; }
  std::size_t width() const { return shape.width; }
  double& operator()(std::size_t r, std::size_t c) { return data[r * shape.width + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * shape.width + c]; }
};

/// Pair of forward differences (horizontal, vertical), each shaped like the image.
struct GradientField {
  Shape shape;
  Vec horizontal;
  Vec vertical;

  GradientField() = default;
  explicit GradientField(Shape s) : shape(s), horizontal(s.size(), 0.0), vertical(s.size(), 0.0) {}
};

}  // namespace ipgla
