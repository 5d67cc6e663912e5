#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "volseg/resample.hpp"

using namespace volseg;

namespace {

Volume field(Extent3 shape, const std::function<double(double, double, double)>& f,
             Vec3 spacing = {1, 1, 1}) {
  Volume v(shape, spacing);
  for (std::size_t z = 0; z < shape[2]; ++z)
    for (std::size_t y = 0; y < shape[1]; ++y)
      for (std::size_t x = 0; x < shape[0]; ++x)
        v.at(x, y, z) = f(static_cast<double>(x), static_cast<double>(y), static_cast<double>(z));
  return v;
}

}  // namespace

TEST(Trilinear, ConstantVolume) {
  const Volume v({5, 4, 3}, {1, 1, 1}, 42.5);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3, 8);
  for (int i = 0; i < 50; ++i) EXPECT_EQ(trilinear_sample(v, {u(rng), u(rng), u(rng)}), 42.5);
}

TEST(Trilinear, CellCentreIsCornerMean) {
  Volume v({2, 2, 2}, {1, 1, 1});
  for (std::size_t i = 0; i < 8; ++i) v.data[i] = static_cast<double>(i);
  EXPECT_DOUBLE_EQ(trilinear_sample(v, {0.5, 0.5, 0.5}), 3.5);
}

TEST(Trilinear, ReproducesLinearFields) {
  const Volume v = field({9, 7, 6}, [](double x, double y, double z) { return 2 * x + 3 * y + 5 * z; });
  std::mt19937_64 rng(2);
  for (int i = 0; i < 50; ++i) {
    const Vec3 p{std::uniform_real_distribution<double>(0, 8)(rng),
                 std::uniform_real_distribution<double>(0, 6)(rng),
                 std::uniform_real_distribution<double>(0, 5)(rng)};
    EXPECT_NEAR(trilinear_sample(v, p), 2 * p[0] + 3 * p[1] + 5 * p[2], 1e-12);
  }
}

TEST(Trilinear, ReproducesMultilinearCrossTerms) {
  auto f = [](double x, double y, double z) {
    return 1.5 - 0.25 * x + 2 * y + 0.5 * z + 0.125 * x * y - 0.75 * y * z + 0.3 * x * z +
           0.05 * x * y * z;
  };
  const Volume v = field({8, 8, 8}, f);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 7);
  for (int i = 0; i < 50; ++i) {
    const Vec3 p{u(rng), u(rng), u(rng)};
    const double expect = f(p[0], p[1], p[2]);
    EXPECT_LE(std::abs(trilinear_sample(v, p) - expect), 1e-9 * std::max(1.0, std::abs(expect)));
  }
}

TEST(Trilinear, ClampsOutsideLattice) {
  const Volume v = field({4, 4, 4}, [](double x, double y, double z) { return x + 10 * y + 100 * z; });
  EXPECT_DOUBLE_EQ(trilinear_sample(v, {-2, 0, 0}), 0);
  EXPECT_DOUBLE_EQ(trilinear_sample(v, {9, 3, 3}), 333);
}

TEST(Trilinear, NoOvershoot) {
  const Volume v = volseg::testing::random_volume({6, 6, 6}, 4, -50, 80);
  const auto [lo, hi] = std::minmax_element(v.data.begin(), v.data.end());
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 6);
  for (int i = 0; i < 500; ++i) {
    const double s = trilinear_sample(v, {u(rng), u(rng), u(rng)});
    EXPECT_GE(s, *lo);
    EXPECT_LE(s, *hi);
  }
}

TEST(ResampleShape, PublishedScaleFactors) {
  EXPECT_EQ(resampled_extent(512, 0.81, 1.62), 256u);
  EXPECT_EQ(resampled_extent(100, 5.0, 3.22), 155u);
  EXPECT_EQ(resampled_extent(3, 0.5, 100.0), 1u);
  EXPECT_EQ(resampled_extent(5, 1.0, 2.0), 3u);  // 2.5 rounds away from zero
}

TEST(ResampleToSpacing, IdentityWhenSpacingMatches) {
  const Volume v = volseg::testing::random_volume({7, 6, 5}, 9, -100, 100, {1.62, 1.62, 3.22});
  const Volume r = resample_to_spacing(v, {1.62, 1.62, 3.22});
  EXPECT_EQ(r.shape, v.shape);
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(r.data[i], v.data[i], 1e-9);
}

TEST(ResampleToSpacing, OutputSpacingIsTarget) {
  const Volume v = volseg::testing::random_volume({20, 18, 9}, 2, -100, 100, {0.8, 0.9, 2.5});
  const Vec3 target{1.62, 1.62, 3.22};
  const Volume r = resample_to_spacing(v, target);
  EXPECT_EQ(r.spacing, target);
  EXPECT_EQ(r.shape, resampled_shape(v.shape, v.spacing, target));
  EXPECT_EQ(r.shape, (Extent3{10, 10, 7}));
}

TEST(ResampleToSpacing, AlignCornersOnLinearField) {
  auto f = [](double x, double y, double z) { return 4 * x - 2 * y + 7 * z + 1; };
  const Volume v = field({11, 9, 7}, f, {0.5, 0.7, 2.0});
  const Volume r = resample_to_spacing(v, {1.1, 1.3, 3.0});
  for (std::size_t z = 0; z < r.shape[2]; ++z)
    for (std::size_t y = 0; y < r.shape[1]; ++y)
      for (std::size_t x = 0; x < r.shape[0]; ++x) {
        const double sx = source_coordinate(x, 11, r.shape[0]);
        const double sy = source_coordinate(y, 9, r.shape[1]);
        const double sz = source_coordinate(z, 7, r.shape[2]);
        EXPECT_NEAR(r.at(x, y, z), f(sx, sy, sz), 1e-9);
      }
  EXPECT_DOUBLE_EQ(source_coordinate(0, 11, 5), 0.0);
  EXPECT_DOUBLE_EQ(source_coordinate(4, 11, 5), 10.0);
  EXPECT_DOUBLE_EQ(source_coordinate(0, 11, 1), 5.0);
}

TEST(ResampleToSpacing, LabelsStayNearestOnly) {
  LabelVolume l({12, 12, 6}, {0.8, 0.8, 2.5});
  for (std::size_t i = 0; i < l.size(); ++i) l.data[i] = (i % 7 == 0) ? 2 : 0;
  const LabelVolume r = resample_to_spacing(l, {1.62, 1.62, 3.22});
  const std::set<std::uint8_t> in(l.data.begin(), l.data.end());
  for (auto x : r.data) EXPECT_TRUE(in.contains(x));
  try {
    resample_to_spacing(l, {1, 1, 1}, Interp::Trilinear);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ModeMismatch);
  }
}

TEST(Resize, IdentityAndRampCorners) {
  const Volume v = volseg::testing::random_volume({5, 4, 3}, 6);
  EXPECT_EQ(resize_to_shape(v, v.shape).data, v.data);

  const Volume ramp = field({4, 4, 4}, [](double x, double y, double z) { return x + 4 * y + 16 * z; });
  const Volume small = resize_to_shape(ramp, {2, 2, 2});
  for (std::size_t z = 0; z < 2; ++z)
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t x = 0; x < 2; ++x)
        EXPECT_EQ(small.at(x, y, z), ramp.at(3 * x, 3 * y, 3 * z));
}

TEST(Resize, SpacingRescaled) {
  const Volume v({9, 5, 4}, {1.0, 2.0, 3.0});
  const Volume r = resize_to_shape(v, {5, 3, 1});
  EXPECT_DOUBLE_EQ(r.spacing[0], 1.0 * 8 / 4);
  EXPECT_DOUBLE_EQ(r.spacing[1], 2.0 * 4 / 2);
  EXPECT_DOUBLE_EQ(r.spacing[2], 3.0 * 4);
}

TEST(Resize, LabelValueSetPreservedAndDeterministic) {
  const LabelVolume l = volseg::testing::random_labels({13, 11, 7}, 12);
  const LabelVolume a = resize_to_shape(l, {8, 8, 4});
  const LabelVolume b = resize_to_shape(l, {8, 8, 4});
  EXPECT_EQ(a, b);
  for (auto x : a.data) EXPECT_LE(x, 2);
  const Volume v = volseg::testing::random_volume({13, 11, 7}, 12);
  EXPECT_EQ(resize_to_shape(v, {8, 8, 4}).data, resize_to_shape(v, {8, 8, 4}).data);
}
