#include "volseg/microseg/synthetic.hpp"

#include <cmath>
#include <algorithm>
#include <numbers>

#include "volseg/random.hpp"

namespace volseg::microseg {

LabeledVolume make_phantom(std::uint64_t seed, const PhantomConfig& config) {
  Rng rng(seed);
  const Extent3 n = config.shape;
  const Vec3 sp = config.spacing;
  // Physical extent and centre, millimetres.
  const Vec3 size{n[0] * sp[0], n[1] * sp[1], n[2] * sp[2]};
  const Vec3 mid{size[0] / 2, size[1] / 2, size[2] / 2};

  const double body_a = size[0] * rng.uniform(0.36, 0.44);
  const double body_b = size[1] * rng.uniform(0.30, 0.38);

  const Vec3 kidney_r{rng.uniform(10.0, 13.0), rng.uniform(8.0, 10.0),
                      std::min(rng.uniform(13.0, 17.0), size[2] * 0.3)};
  const Vec3 kidney_c{mid[0] + rng.uniform(-0.35, 0.35) * body_a,
                      mid[1] + rng.uniform(-0.25, 0.25) * body_b,
                      mid[2] + rng.uniform(-0.15, 0.15) * size[2]};

  // Tumour centred near the kidney surface in a random direction.
  const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double cos_phi = rng.uniform(-0.6, 0.6);
  const double sin_phi = std::sqrt(1.0 - cos_phi * cos_phi);
  const Vec3 dir{sin_phi * std::cos(theta), sin_phi * std::sin(theta), cos_phi};
  const double reach = rng.uniform(0.55, 0.85);
  const Vec3 tumour_c{kidney_c[0] + reach * kidney_r[0] * dir[0],
                      kidney_c[1] + reach * kidney_r[1] * dir[1],
                      kidney_c[2] + reach * kidney_r[2] * dir[2]};
  const double tumour_r = rng.uniform(5.5, 7.5);

  // A dense vertebra-like column behind the centre; clipped at the window top.
  const Vec3 bone_c{mid[0], mid[1] + 0.6 * body_b, 0};
  const double bone_r = 5.0;

  LabeledVolume out{Volume(n, sp, config.air_hu), LabelVolume(n, sp)};
  for (std::size_t z = 0; z < n[2]; ++z)
    for (std::size_t y = 0; y < n[1]; ++y)
      for (std::size_t x = 0; x < n[0]; ++x) {
        const Vec3 p{(x + 0.5) * sp[0], (y + 0.5) * sp[1], (z + 0.5) * sp[2]};
        const double bx = (p[0] - mid[0]) / body_a;
        const double by = (p[1] - mid[1]) / body_b;
        double hu = config.air_hu;
        std::uint8_t label = kBackground;
        if (bx * bx + by * by <= 1.0) {
          hu = config.tissue_hu;
          const double dx = p[0] - bone_c[0], dy = p[1] - bone_c[1];
          if (dx * dx + dy * dy <= bone_r * bone_r) hu = 700.0;
          double k = 0;
          for (int a = 0; a < 3; ++a) k += std::pow((p[a] - kidney_c[a]) / kidney_r[a], 2);
          if (k <= 1.0) {
            hu = config.kidney_hu;
            label = kKidney;
          }
          double t = 0;
          for (int a = 0; a < 3; ++a) t += std::pow(p[a] - tumour_c[a], 2);
          if (t <= tumour_r * tumour_r) {
            hu = config.tumour_hu;
            label = kTumour;
          }
        }
        out.image.at(x, y, z) = hu + config.noise_sigma * rng.normal();
        out.label.at(x, y, z) = label;
      }
  return out;
}

}  // namespace volseg::microseg
