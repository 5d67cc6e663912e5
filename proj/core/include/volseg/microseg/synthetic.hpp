#pragma once

#include <cstdint>

#include "volseg/volume.hpp"

namespace volseg::microseg {

/// Parameters of the synthetic abdomen phantom: a noisy soft-tissue body in
/// air, one ellipsoidal kidney, and a brighter tumour sphere on the kidney.
struct PhantomConfig {
  Extent3 shape{64, 64, 24};
  Vec3 spacing{0.8, 0.8, 2.5};
  double air_hu = -1000.0;
  double tissue_hu = 40.0;
  double kidney_hu = 160.0;
  double tumour_hu = 240.0;
  double noise_sigma = 12.0;
};

LabeledVolume make_phantom(std::uint64_t seed, const PhantomConfig& config = {});

}  // namespace volseg::microseg
