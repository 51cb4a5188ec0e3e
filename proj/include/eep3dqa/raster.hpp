// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "eep3dqa/error.hpp"

namespace eep3dqa {

// Linear RGB triple, each channel in [0,1].
struct Rgb {
  float r = 0.0f;
  float g = 0.0f;
  float b = 0.0f;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kWhite{1.0f, 1.0f, 1.0f};
inline constexpr Rgb kBlack{0.0f, 0.0f, 0.0f};

inline Rgb rgb_from_u8(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return {r / 255.0f, g / 255.0f, b / 255.0f};
}

inline std::uint8_t channel_to_u8(float c) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(c, 0.0f, 1.0f) * 255.0f));
}

// Dense row-major 2D grid of pixels.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;
  Raster(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), data_(width * height, fill) {}

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t x, std::size_t y) noexcept { return data_[y * width_ + x]; }
  const T& operator()(std::size_t x, std::size_t y) const noexcept { return data_[y * width_ + x]; }

  T* row(std::size_t y) noexcept { return data_.data() + y * width_; }
  const T* row(std::size_t y) const noexcept { return data_.data() + y * width_; }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<T> data_;
};

using RgbImage = Raster<Rgb>;
// Boolean grid stored as bytes so rows stay addressable.
using Mask = Raster<std::uint8_t>;

// Copies the [x0, x0+w) x [y0, y0+h) window.
template <typename T>
Raster<T> sub_raster(const Raster<T>& src, std::size_t x0, std::size_t y0, std::size_t w,
                     std::size_t h) {
  detail::require(x0 + w <= src.width() && y0 + h <= src.height(), "sub_raster window out of bounds");
  Raster<T> out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    std::copy_n(src.row(y0 + y) + x0, w, out.row(y));
  }
  return out;
}

// Nearest-neighbour resample to the given dims; every output pixel is a copy of an input pixel.
template <typename T>
Raster<T> resize_nearest(const Raster<T>& src, std::size_t w, std::size_t h) {
  detail::require(!src.empty() && w > 0 && h > 0, "resize_nearest: empty raster");
  Raster<T> out(w, h);
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t sy = std::min(src.height() - 1, y * src.height() / h);
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t sx = std::min(src.width() - 1, x * src.width() / w);
      out(x, y) = src(sx, sy);
    }
  }
  return out;
}

// Bilinear resample with pixel-centre alignment and clamped borders.
inline RgbImage resize_bilinear(const RgbImage& src, std::size_t w, std::size_t h) {
  detail::require(!src.empty() && w > 0 && h > 0, "resize_bilinear: empty raster");
  RgbImage out(w, h);
  const double sx = static_cast<double>(src.width()) / static_cast<double>(w);
  const double sy = static_cast<double>(src.height()) / static_cast<double>(h);
  const auto max_x = static_cast<double>(src.width() - 1);
  const auto max_y = static_cast<double>(src.height() - 1);
  for (std::size_t y = 0; y < h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, max_y);
    const auto y0 = static_cast<std::size_t>(fy);
    const std::size_t y1 = std::min(y0 + 1, src.height() - 1);
    const double ty = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, max_x);
      const auto x0 = static_cast<std::size_t>(fx);
      const std::size_t x1 = std::min(x0 + 1, src.width() - 1);
      const double tx = fx - static_cast<double>(x0);
      auto lerp = [&](float Rgb::*ch) {
        const double top = src(x0, y0).*ch * (1.0 - tx) + src(x1, y0).*ch * tx;
        const double bot = src(x0, y1).*ch * (1.0 - tx) + src(x1, y1).*ch * tx;
        return static_cast<float>(top * (1.0 - ty) + bot * ty);
      };
      out(x, y) = {lerp(&Rgb::r), lerp(&Rgb::g), lerp(&Rgb::b)};
    }
  }
  return out;
}

}  // namespace eep3dqa
