#pragma once

#include <cassert>
#include <cstdint>
#include <vector>

#include "edgenerf/types.hpp"

namespace edgenerf {

// Row-major single-plane image; x is the column, y the row.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, const T& fill = T{})
      : width_(width), height_(height), data_(static_cast<std::size_t>(width) * height, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  T& operator()(int x, int y) {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  const T& operator()(int x, int y) const {
    assert(in_bounds(x, y));
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }

  std::vector<T>& pixels() { return data_; }
  const std::vector<T>& pixels() const { return data_; }

  bool operator==(const Image& other) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

// Linear RGB in [0,1].
using RgbImage = Image<Vec3>;
// Intensities on the 0..255 scale, stored as doubles.
using GrayImage = Image<double>;
using DepthImage = Image<double>;
using NormalImage = Image<Vec3>;
using BinaryMap = Image<std::uint8_t>;

// e(x,y) = 1 marks a non-edge (regularizable) pixel, 0 an edge pixel.
class EdgeIndicatorMap {
 public:
  EdgeIndicatorMap() = default;
  explicit EdgeIndicatorMap(BinaryMap indicator) : map_(std::move(indicator)) {}

  static EdgeIndicatorMap all_non_edge(int width, int height) {
    return EdgeIndicatorMap(BinaryMap(width, height, 1));
  }

  int width() const { return map_.width(); }
  int height() const { return map_.height(); }
  std::uint8_t operator()(int x, int y) const { return map_(x, y); }
  const BinaryMap& map() const { return map_; }

  std::size_t count_non_edge() const {
    std::size_t n = 0;
    for (auto v : map_.pixels()) n += v;
    return n;
  }

  bool operator==(const EdgeIndicatorMap&) const = default;

 private:
  BinaryMap map_;
};

}  // namespace edgenerf
