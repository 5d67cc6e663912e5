#include "volseg/patch_sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

namespace volseg {

void PatchSamplerConfig::validate() const {
  if (!(pos >= 0.0) || !(neg >= 0.0)) fail(Errc::DegenerateWeights, "pos and neg must be >= 0");
  if (!(pos + neg > 0.0)) fail(Errc::DegenerateWeights, "pos + neg must be > 0");
  if (num_samples < 1) fail(Errc::InvalidArgument, "num_samples must be >= 1");
  for (std::size_t n : patch_size)
    if (n < 1) fail(Errc::InvalidArgument, "patch size must be >= 1 on every axis");
}

double ratio(const PatchSamplerConfig& config) {
  if (!(config.pos + config.neg > 0.0))
    fail(Errc::DegenerateWeights, "pos + neg must be > 0");
  return config.pos / (config.pos + config.neg);
}

Strata::Strata(const LabelVolume& label) {
  for (std::size_t i = 0; i < label.data.size(); ++i)
    (label.data[i] > 0 ? foreground : background).push_back(i);
}

CentreDraw choose_centre(const LabelVolume& label, const Strata& strata,
                         const PatchSamplerConfig& config, Rng& rng) {
  const bool want_fg = rng.uniform01() < ratio(config);
  const auto& wanted = want_fg ? strata.foreground : strata.background;
  const auto& other = want_fg ? strata.background : strata.foreground;
  const bool fallback = wanted.empty();
  const auto& pool = fallback ? other : wanted;
  // pool is nonempty: the two strata partition a nonempty grid.
  const std::size_t flat = pool[rng.uniform_index(pool.size())];
  return {label.coords(flat), fallback ? !want_fg : want_fg, fallback};
}

CentreDraw choose_centre(const LabelVolume& label, const PatchSamplerConfig& config, Rng& rng) {
  return choose_centre(label, Strata(label), config, rng);
}

Patch extract_patch(const Volume& img, const LabelVolume& lbl, const Extent3& centre,
                    const Extent3& patch_size, double image_pad) {
  if (img.shape != lbl.shape) fail(Errc::ShapeMismatch, "image and label shapes differ");
  Patch p;
  p.centre = centre;
  p.image = Volume(patch_size, img.spacing, image_pad);
  p.label = LabelVolume(patch_size, lbl.spacing, std::uint8_t{0});

  std::int64_t start[3];
  for (int a = 0; a < 3; ++a)
    start[a] = static_cast<std::int64_t>(centre[a]) - static_cast<std::int64_t>(patch_size[a] / 2);

  for (std::size_t z = 0; z < patch_size[2]; ++z) {
    const std::int64_t sz = start[2] + static_cast<std::int64_t>(z);
    for (std::size_t y = 0; y < patch_size[1]; ++y) {
      const std::int64_t sy = start[1] + static_cast<std::int64_t>(y);
      for (std::size_t x = 0; x < patch_size[0]; ++x) {
        const std::int64_t sx = start[0] + static_cast<std::int64_t>(x);
        const bool inside = sx >= 0 && sy >= 0 && sz >= 0 &&
                            sx < static_cast<std::int64_t>(img.shape[0]) &&
                            sy < static_cast<std::int64_t>(img.shape[1]) &&
                            sz < static_cast<std::int64_t>(img.shape[2]);
        if (!inside) {
          p.padded = true;
          continue;
        }
        const std::size_t src = img.index(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy),
                                          static_cast<std::size_t>(sz));
        const std::size_t dst = p.image.index(x, y, z);
        p.image.data[dst] = img.data[src];
        p.label.data[dst] = lbl.data[src];
      }
    }
  }
  return p;
}

Extent3 fit_centre(const Extent3& centre, const Extent3& shape, const Extent3& patch_size) {
  Extent3 c = centre;
  for (int a = 0; a < 3; ++a) {
    const std::size_t half = patch_size[a] / 2;
    if (shape[a] < patch_size[a])
      c[a] = shape[a] / 2;
    else
      c[a] = std::clamp(centre[a], half, shape[a] - patch_size[a] + half);
  }
  return c;
}

std::vector<Patch> sample_patches(const Volume& img, const LabelVolume& lbl,
                                  const PatchSamplerConfig& config) {
  config.validate();
  if (img.shape != lbl.shape) fail(Errc::ShapeMismatch, "image and label shapes differ");
  const Strata strata(lbl);
  Rng rng(config.seed);
  std::vector<Patch> patches;
  patches.reserve(config.num_samples);
  for (std::size_t i = 0; i < config.num_samples; ++i) {
    const CentreDraw draw = choose_centre(lbl, strata, config, rng);
    Patch p = extract_patch(img, lbl, fit_centre(draw.centre, img.shape, config.patch_size),
                            config.patch_size, config.image_pad);
    p.stratum_fallback = draw.fallback;
    patches.push_back(std::move(p));
  }
  return patches;
}

}  // namespace volseg
