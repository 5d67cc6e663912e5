#include "volseg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace volseg {

bool BBox::valid_for(const Extent3& shape) const {
  for (int a = 0; a < 3; ++a)
    if (lo[a] > hi[a] || hi[a] >= shape[a]) return false;
  return true;
}

BBox full_box(const Extent3& shape) {
  return {{0, 0, 0}, {shape[0] - 1, shape[1] - 1, shape[2] - 1}};
}

BBox compose(const BBox& outer, const BBox& inner) {
  BBox out;
  for (int a = 0; a < 3; ++a) {
    out.lo[a] = outer.lo[a] + inner.lo[a];
    out.hi[a] = outer.lo[a] + inner.hi[a];
  }
  return out;
}

bool same_geometry(const Extent3& a, const Extent3& b) { return a == b; }

Volume clip_intensity(const Volume& v, double lo, double hi) {
  if (!(lo < hi)) fail(Errc::InvalidRange, "clip range requires lo < hi");
  Volume out = v;
  for (double& x : out.data) x = std::clamp(x, lo, hi);
  return out;
}

BBox foreground_bbox(const Volume& v, double threshold) {
  Extent3 lo = v.shape;
  Extent3 hi{0, 0, 0};
  bool any = false;
  for (std::size_t z = 0; z < v.shape[2]; ++z)
    for (std::size_t y = 0; y < v.shape[1]; ++y) {
      const double* row = &v.data[v.index(0, y, z)];
      for (std::size_t x = 0; x < v.shape[0]; ++x) {
        if (!(row[x] > threshold)) continue;
        any = true;
        lo = {std::min(lo[0], x), std::min(lo[1], y), std::min(lo[2], z)};
        hi = {std::max(hi[0], x), std::max(hi[1], y), std::max(hi[2], z)};
      }
    }
  if (!any) fail(Errc::EmptyForeground, "no voxel exceeds threshold " + std::to_string(threshold));
  return {lo, hi};
}

template <typename T>
Grid<T> crop(const Grid<T>& g, const BBox& box) {
  if (!box.valid_for(g.shape)) fail(Errc::BoxOutOfBounds, "crop box outside the grid");
  const Extent3 ext = box.extent();
  Grid<T> out(ext, g.spacing);
  if (g.affine) {
    Affine a = *g.affine;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) a[r][3] += a[r][c] * static_cast<double>(box.lo[c]);
    out.affine = a;
  }
  for (std::size_t z = 0; z < ext[2]; ++z)
    for (std::size_t y = 0; y < ext[1]; ++y) {
      const T* src = &g.data[g.index(box.lo[0], box.lo[1] + y, box.lo[2] + z)];
      std::copy(src, src + ext[0], &out.data[out.index(0, y, z)]);
    }
  return out;
}

template Grid<double> crop(const Grid<double>&, const BBox&);
template Grid<std::uint8_t> crop(const Grid<std::uint8_t>&, const BBox&);

std::pair<Volume, LabelVolume> crop_pair(const Volume& img, const LabelVolume& lbl,
                                         const BBox& box) {
  if (img.shape != lbl.shape) fail(Errc::ShapeMismatch, "image and label shapes differ");
  return {crop(img, box), crop(lbl, box)};
}

void check_labels(const LabelVolume& lbl) {
  for (std::uint8_t v : lbl.data)
    if (v >= kClassCount)
      fail(Errc::InvalidLabel, "label value " + std::to_string(int(v)) + " outside {0,1,2}");
}

}  // namespace volseg
