#include "volseg/resample.hpp"

#include <algorithm>
#include <cmath>

namespace volseg {

namespace {

std::size_t clamp_index(double p, std::size_t n) {
  const double r = std::round(std::clamp(p, 0.0, static_cast<double>(n - 1)));
  return static_cast<std::size_t>(r);
}

/// Per-axis table of source coordinates for each output index.
std::array<std::vector<double>, 3> coordinate_tables(const Extent3& in, const Extent3& out) {
  std::array<std::vector<double>, 3> t;
  for (int a = 0; a < 3; ++a) {
    t[a].resize(out[a]);
    for (std::size_t j = 0; j < out[a]; ++j) t[a][j] = source_coordinate(j, in[a], out[a]);
  }
  return t;
}

template <typename T, typename Sampler>
Grid<T> resample_grid(const Grid<T>& g, const Extent3& shape, const Vec3& spacing, Sampler&& sample) {
  for (std::size_t n : shape)
    if (n == 0) fail(Errc::InvalidArgument, "target extent must be >= 1");
  const auto tables = coordinate_tables(g.shape, shape);
  Grid<T> out(shape, spacing);
  std::size_t i = 0;
  for (std::size_t z = 0; z < shape[2]; ++z)
    for (std::size_t y = 0; y < shape[1]; ++y)
      for (std::size_t x = 0; x < shape[0]; ++x)
        out.data[i++] = sample(Vec3{tables[0][x], tables[1][y], tables[2][z]});
  if (g.affine) {
    Affine a = *g.affine;
    for (int c = 0; c < 3; ++c) {
      const double step = spacing[c] / g.spacing[c];
      for (int r = 0; r < 3; ++r) a[r][c] *= step;
    }
    out.affine = a;
  }
  return out;
}

Vec3 resized_spacing(const Extent3& in, const Vec3& spacing, const Extent3& out) {
  Vec3 s{};
  for (int a = 0; a < 3; ++a) {
    if (out[a] > 1 && in[a] > 1)
      s[a] = spacing[a] * static_cast<double>(in[a] - 1) / static_cast<double>(out[a] - 1);
    else
      s[a] = spacing[a] * static_cast<double>(in[a]) / static_cast<double>(out[a]);
  }
  return s;
}

void check_spacing(const Vec3& target) {
  for (double s : target)
    if (!(s > 0.0) || !std::isfinite(s)) fail(Errc::InvalidArgument, "target spacing must be > 0");
}

}  // namespace

double trilinear_sample(const Volume& v, const Vec3& p) {
  std::size_t i0[3], i1[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    const double hi = static_cast<double>(v.shape[a] - 1);
    const double c = std::clamp(p[a], 0.0, hi);
    const double fl = std::floor(c);
    i0[a] = static_cast<std::size_t>(fl);
    i1[a] = std::min(i0[a] + 1, v.shape[a] - 1);
    f[a] = c - fl;
  }
  auto at = [&](std::size_t x, std::size_t y, std::size_t z) { return v.at(x, y, z); };
  // Two bilinear blends in the xy planes, then a linear blend along z.
  auto bilinear = [&](std::size_t z) {
    const double c0 = at(i0[0], i0[1], z) + f[0] * (at(i1[0], i0[1], z) - at(i0[0], i0[1], z));
    const double c1 = at(i0[0], i1[1], z) + f[0] * (at(i1[0], i1[1], z) - at(i0[0], i1[1], z));
    return c0 + f[1] * (c1 - c0);
  };
  const double b0 = bilinear(i0[2]);
  const double b1 = bilinear(i1[2]);
  return b0 + f[2] * (b1 - b0);
}

template <typename T>
T nearest_sample(const Grid<T>& g, const Vec3& p) {
  return g.at(clamp_index(p[0], g.shape[0]), clamp_index(p[1], g.shape[1]),
              clamp_index(p[2], g.shape[2]));
}

template double nearest_sample(const Grid<double>&, const Vec3&);
template std::uint8_t nearest_sample(const Grid<std::uint8_t>&, const Vec3&);

std::size_t resampled_extent(std::size_t n, double spacing, double target_spacing) {
  const double r = std::round(static_cast<double>(n) * spacing / target_spacing);
  return r < 1.0 ? 1 : static_cast<std::size_t>(r);
}

Extent3 resampled_shape(const Extent3& shape, const Vec3& spacing, const Vec3& target) {
  return {resampled_extent(shape[0], spacing[0], target[0]),
          resampled_extent(shape[1], spacing[1], target[1]),
          resampled_extent(shape[2], spacing[2], target[2])};
}

double source_coordinate(std::size_t j, std::size_t n, std::size_t n_out) {
  if (n_out <= 1) return 0.5 * static_cast<double>(n - 1);
  return static_cast<double>(j) * static_cast<double>(n - 1) / static_cast<double>(n_out - 1);
}

Volume resample_to_spacing(const Volume& v, const Vec3& target, Interp mode) {
  check_spacing(target);
  const Extent3 shape = resampled_shape(v.shape, v.spacing, target);
  if (mode == Interp::Nearest)
    return resample_grid(v, shape, target, [&](const Vec3& p) { return nearest_sample(v, p); });
  return resample_grid(v, shape, target, [&](const Vec3& p) { return trilinear_sample(v, p); });
}

LabelVolume resample_to_spacing(const LabelVolume& v, const Vec3& target, Interp mode) {
  if (mode != Interp::Nearest) fail(Errc::ModeMismatch, "labels require nearest interpolation");
  check_spacing(target);
  const Extent3 shape = resampled_shape(v.shape, v.spacing, target);
  return resample_grid(v, shape, target, [&](const Vec3& p) { return nearest_sample(v, p); });
}

Volume resize_to_shape(const Volume& v, const Extent3& target, Interp mode) {
  const Vec3 spacing = resized_spacing(v.shape, v.spacing, target);
  if (mode == Interp::Nearest)
    return resample_grid(v, target, spacing, [&](const Vec3& p) { return nearest_sample(v, p); });
  return resample_grid(v, target, spacing, [&](const Vec3& p) { return trilinear_sample(v, p); });
}

LabelVolume resize_to_shape(const LabelVolume& v, const Extent3& target, Interp mode) {
  if (mode != Interp::Nearest) fail(Errc::ModeMismatch, "labels require nearest interpolation");
  const Vec3 spacing = resized_spacing(v.shape, v.spacing, target);
  return resample_grid(v, target, spacing, [&](const Vec3& p) { return nearest_sample(v, p); });
}

}  // namespace volseg
