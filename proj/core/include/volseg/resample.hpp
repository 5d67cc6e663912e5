#pragma once

#include "volseg/volume.hpp"

namespace volseg {

enum class Interp { Trilinear, Nearest };

/// Trilinear blend of the 8 lattice values around continuous index `p`.
/// Coordinates outside [0, n-1] are clamped to the boundary face.
double trilinear_sample(const Volume& v, const Vec3& p);

/// Value of the lattice point nearest `p` (half away from zero), clamped.
template <typename T>
T nearest_sample(const Grid<T>& g, const Vec3& p);

/// n' = max(1, round(n * s / s')), half away from zero.
std::size_t resampled_extent(std::size_t n, double spacing, double target_spacing);
Extent3 resampled_shape(const Extent3& shape, const Vec3& spacing, const Vec3& target);

/// Align-corners source coordinate of output index j when an axis of n
/// voxels is resampled onto n_out voxels.
double source_coordinate(std::size_t j, std::size_t n, std::size_t n_out);

Volume resample_to_spacing(const Volume& v, const Vec3& target, Interp mode = Interp::Trilinear);
LabelVolume resample_to_spacing(const LabelVolume& v, const Vec3& target,
                                Interp mode = Interp::Nearest);

Volume resize_to_shape(const Volume& v, const Extent3& target, Interp mode = Interp::Trilinear);
LabelVolume resize_to_shape(const LabelVolume& v, const Extent3& target,
                            Interp mode = Interp::Nearest);

}  // namespace volseg
