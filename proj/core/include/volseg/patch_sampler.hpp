#pragma once

#include <cstdint>
#include <vector>

#include "volseg/random.hpp"
#include "volseg/volume.hpp"

namespace volseg {

struct PatchSamplerConfig {
  Extent3 patch_size{128, 128, 32};
  std::size_t num_samples = 4;
  double pos = 1.0;
  double neg = 1.0;
  std::uint64_t seed = 0;
  double image_pad = kClipLow;

  void validate() const;
};

/// Probability of centring a crop on a foreground voxel: pos / (pos + neg).
double ratio(const PatchSamplerConfig& config);

struct Patch {
  Volume image;
  LabelVolume label;
  Extent3 centre{};
  bool padded = false;
  /// The drawn stratum was empty and the other one was used instead.
  bool stratum_fallback = false;
};

/// Flat indices of background (label == 0) and foreground (label > 0) voxels.
struct Strata {
  std::vector<std::size_t> background;
  std::vector<std::size_t> foreground;

  explicit Strata(const LabelVolume& label);
};

struct CentreDraw {
  Extent3 centre{};
  bool foreground = false;
  bool fallback = false;
};

/// Draws one stratum decision then one uniform index within the stratum.
/// Exactly two draw calls are made on `rng` per centre.
CentreDraw choose_centre(const LabelVolume& label, const Strata& strata,
                         const PatchSamplerConfig& config, Rng& rng);
CentreDraw choose_centre(const LabelVolume& label, const PatchSamplerConfig& config, Rng& rng);

/// Window of `patch_size` whose start is centre - size/2 (integer division).
/// Out-of-volume voxels take `image_pad` in the image and background in the label.
Patch extract_patch(const Volume& img, const LabelVolume& lbl, const Extent3& centre,
                    const Extent3& patch_size, double image_pad = kClipLow);

/// Shifts a centre so its window lies inside the volume on every axis where
/// the volume is at least as large as the patch; on smaller axes the window
/// is centred on the volume instead.
Extent3 fit_centre(const Extent3& centre, const Extent3& shape, const Extent3& patch_size);

/// Draws each centre with choose_centre, fits it with fit_centre, then extracts.
std::vector<Patch> sample_patches(const Volume& img, const LabelVolume& lbl,
                                  const PatchSamplerConfig& config);

}  // namespace volseg
