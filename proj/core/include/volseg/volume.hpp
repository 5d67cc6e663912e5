#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "volseg/error.hpp"

namespace volseg {

using Extent3 = std::array<std::size_t, 3>;
using Vec3 = std::array<double, 3>;
using Affine = std::array<std::array<double, 4>, 4>;

inline constexpr double kClipLow = -79.0;
inline constexpr double kClipHigh = 304.0;

enum Label : std::uint8_t { kBackground = 0, kKidney = 1, kTumour = 2 };
inline constexpr int kClassCount = 3;

inline std::size_t voxel_count(const Extent3& shape) {
  return shape[0] * shape[1] * shape[2];
}

/// A dense 3D grid stored x-fastest, with per-axis spacing in millimetres.
///
/// The affine, when present, is carried through I/O but never consumed by
/// the geometric operations, which work from spacing alone.
template <typename T>
struct Grid {
  using value_type = T;

  Extent3 shape{1, 1, 1};
  Vec3 spacing{1.0, 1.0, 1.0};
  std::vector<T> data = std::vector<T>(1);
  std::optional<Affine> affine;

  Grid() = default;
  Grid(Extent3 shape_, Vec3 spacing_, T fill = T{})
      : shape(shape_), spacing(spacing_), data(voxel_count(shape_), fill) {
    validate();
  }
  Grid(Extent3 shape_, Vec3 spacing_, std::vector<T> values)
      : shape(shape_), spacing(spacing_), data(std::move(values)) {
    validate();
  }

  std::size_t size() const { return data.size(); }

  std::size_t index(std::size_t x, std::size_t y, std::size_t z) const {
    return x + shape[0] * (y + shape[1] * z);
  }
  T& at(std::size_t x, std::size_t y, std::size_t z) { return data[index(x, y, z)]; }
  const T& at(std::size_t x, std::size_t y, std::size_t z) const {
    return data[index(x, y, z)];
  }

  Extent3 coords(std::size_t flat) const {
    return {flat % shape[0], (flat / shape[0]) % shape[1], flat / (shape[0] * shape[1])};
  }

  void validate() const {
    for (int a = 0; a < 3; ++a) {
      if (shape[a] == 0) fail(Errc::InvalidArgument, "grid extent must be >= 1");
      if (!(spacing[a] > 0.0)) fail(Errc::InvalidArgument, "grid spacing must be > 0");
    }
    if (data.size() != voxel_count(shape))
      fail(Errc::ShapeMismatch, "grid data length does not match its shape");
  }

  bool operator==(const Grid&) const = default;
};

using Volume = Grid<double>;
using LabelVolume = Grid<std::uint8_t>;

struct LabeledVolume {
  Volume image;
  LabelVolume label;
};

/// Inclusive per-axis index ranges.
struct BBox {
  Extent3 lo{0, 0, 0};
  Extent3 hi{0, 0, 0};

  Extent3 extent() const { return {hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1}; }
  bool valid_for(const Extent3& shape) const;
  bool operator==(const BBox&) const = default;
};

BBox full_box(const Extent3& shape);

/// Box `inner`, given in the coordinates of a crop by `outer`, expressed in
/// the coordinates of the uncropped grid.
BBox compose(const BBox& outer, const BBox& inner);

Volume clip_intensity(const Volume& v, double lo = kClipLow, double hi = kClipHigh);

/// Tightest box containing every voxel strictly above `threshold`.
BBox foreground_bbox(const Volume& v, double threshold = kClipLow);

template <typename T>
Grid<T> crop(const Grid<T>& g, const BBox& box);

std::pair<Volume, LabelVolume> crop_pair(const Volume& img, const LabelVolume& lbl,
                                         const BBox& box);

/// Throws InvalidLabel when any voxel lies outside {0, 1, 2}.
void check_labels(const LabelVolume& lbl);

bool same_geometry(const Extent3& a, const Extent3& b);

}  // namespace volseg
