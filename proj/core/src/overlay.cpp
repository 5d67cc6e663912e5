#include "volseg/overlay.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace volseg {

Axis parse_axis(std::string_view name) {
  if (name == "axial") return Axis::Axial;
  if (name == "coronal") return Axis::Coronal;
  if (name == "sagittal") return Axis::Sagittal;
  fail(Errc::InvalidArgument, "axis must be axial, coronal or sagittal");
}

std::size_t slice_count(Axis axis, const Extent3& shape) {
  switch (axis) {
    case Axis::Axial: return shape[2];
    case Axis::Coronal: return shape[1];
    case Axis::Sagittal: return shape[0];
  }
  return 0;
}

PixelPos slice_pixel(Axis axis, const Extent3& shape, std::size_t x, std::size_t y, std::size_t z) {
  switch (axis) {
    case Axis::Axial: return {x, y};
    case Axis::Coronal: return {x, shape[2] - 1 - z};
    case Axis::Sagittal: return {y, shape[2] - 1 - z};
  }
  return {};
}

RgbImage render_overlay(const Volume& image, const LabelVolume& mask, Axis axis, std::size_t slice,
                        double window_lo, double window_hi) {
  if (image.shape != mask.shape) fail(Errc::ShapeMismatch, "image and mask shapes differ");
  if (!(window_lo < window_hi)) fail(Errc::InvalidRange, "display window requires lo < hi");
  const Extent3& s = image.shape;
  if (slice >= slice_count(axis, s))
    fail(Errc::SliceOutOfRange, "slice " + std::to_string(slice) + " outside 0.." +
                                    std::to_string(slice_count(axis, s) - 1));
  RgbImage img;
  switch (axis) {
    case Axis::Axial: img.width = s[0]; img.height = s[1]; break;
    case Axis::Coronal: img.width = s[0]; img.height = s[2]; break;
    case Axis::Sagittal: img.width = s[1]; img.height = s[2]; break;
  }
  img.rgb.assign(img.width * img.height * 3, 0);

  auto paint = [&](std::size_t x, std::size_t y, std::size_t z) {
    const double t = (std::clamp(image.at(x, y, z), window_lo, window_hi) - window_lo) /
                     (window_hi - window_lo);
    const double grey = std::round(255.0 * t);
    double rgb[3] = {grey, grey, grey};
    const std::uint8_t label = mask.at(x, y, z);
    if (label == kKidney || label == kTumour) {
      const int tint = label == kKidney ? 0 : 1;
      for (int c = 0; c < 3; ++c) rgb[c] = std::round(0.5 * grey + (c == tint ? 127.5 : 0.0));
    }
    const PixelPos pos = slice_pixel(axis, s, x, y, z);
    const std::size_t i = 3 * (pos.row * img.width + pos.col);
    for (int c = 0; c < 3; ++c) img.rgb[i + c] = static_cast<std::uint8_t>(rgb[c]);
  };

  switch (axis) {
    case Axis::Axial:
      for (std::size_t y = 0; y < s[1]; ++y)
        for (std::size_t x = 0; x < s[0]; ++x) paint(x, y, slice);
      break;
    case Axis::Coronal:
      for (std::size_t z = 0; z < s[2]; ++z)
        for (std::size_t x = 0; x < s[0]; ++x) paint(x, slice, z);
      break;
    case Axis::Sagittal:
      for (std::size_t z = 0; z < s[2]; ++z)
        for (std::size_t y = 0; y < s[1]; ++y) paint(slice, y, z);
      break;
  }
  return img;
}

std::vector<std::uint8_t> encode_ppm(const RgbImage& img) {
  const std::string header =
      "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.rgb.begin(), img.rgb.end());
  return out;
}

}  // namespace volseg
