#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "volseg/volume.hpp"

namespace volseg {

enum class Axis { Axial, Coronal, Sagittal };

Axis parse_axis(std::string_view name);

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  std::array<std::uint8_t, 3> pixel(std::size_t col, std::size_t row) const {
    const std::size_t i = 3 * (row * width + col);
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
};

struct PixelPos {
  std::size_t col = 0;
  std::size_t row = 0;
  bool operator==(const PixelPos&) const = default;
};

/// Axial slices fix z (col = x, row = y). Coronal slices fix y and sagittal
/// slices fix x; both put the highest z on the top row (col = x or y).
PixelPos slice_pixel(Axis axis, const Extent3& shape, std::size_t x, std::size_t y, std::size_t z);
std::size_t slice_count(Axis axis, const Extent3& shape);

/// Grey-level window of the image with kidney blended towards red and
/// tumour towards green at 50% opacity.
RgbImage render_overlay(const Volume& image, const LabelVolume& mask, Axis axis, std::size_t slice,
                        double window_lo = kClipLow, double window_hi = kClipHigh);

/// Binary PPM (P6).
std::vector<std::uint8_t> encode_ppm(const RgbImage& img);

}  // namespace volseg
