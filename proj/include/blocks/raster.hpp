#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "blocks/errors.hpp"

namespace bw {

/// Row-major, channel-interleaved 2D grid. Pixel (x, y) channel c lives at
/// ((y * width + x) * channels + c).
template <class T>
class Raster {
 public:
  Raster() = default;
  Raster(int width, int height, int channels = 1, T fill = T{})
      : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || channels <= 0) {
      throw ValidationError("raster dimensions must be non-negative");
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * height_;
  }
  bool empty() const { return data_.empty(); }

  bool contains(int x, int y) const {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }
  template <class U>
  bool same_shape(const Raster<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  T& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::span<T> pixel(int x, int y) {
    return {data_.data() + index(x, y, 0), static_cast<std::size_t>(channels_)};
  }
  std::span<const T> pixel(int x, int y) const {
    return {data_.data() + index(x, y, 0), static_cast<std::size_t>(channels_)};
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  bool operator==(const Raster&) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

using FloatRaster = Raster<float>;
using IdRaster = Raster<std::int32_t>;

}  // namespace bw
