#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "volseg/volume.hpp"

using namespace volseg;

namespace {

/// Brute-force box over voxels strictly above the threshold.
std::optional<BBox> scan_box(const Volume& v, double threshold) {
  std::optional<BBox> box;
  for (std::size_t z = 0; z < v.shape[2]; ++z)
    for (std::size_t y = 0; y < v.shape[1]; ++y)
      for (std::size_t x = 0; x < v.shape[0]; ++x) {
        if (!(v.at(x, y, z) > threshold)) continue;
        const Extent3 p{x, y, z};
        if (!box) {
          box = BBox{p, p};
          continue;
        }
        for (int a = 0; a < 3; ++a) {
          box->lo[a] = std::min(box->lo[a], p[a]);
          box->hi[a] = std::max(box->hi[a], p[a]);
        }
      }
  return box;
}

bool any_above_in_slab(const Volume& v, double t, int axis, std::size_t index) {
  for (std::size_t z = 0; z < v.shape[2]; ++z)
    for (std::size_t y = 0; y < v.shape[1]; ++y)
      for (std::size_t x = 0; x < v.shape[0]; ++x) {
        const Extent3 p{x, y, z};
        if (p[axis] == index && v.at(x, y, z) > t) return true;
      }
  return false;
}

}  // namespace

TEST(Clip, WindowExamples) {
  Volume v({3, 1, 1}, {1, 1, 1}, std::vector<double>{-1024, 0, 500});
  const Volume c = clip_intensity(v);
  EXPECT_EQ(c.data, (std::vector<double>{-79, 0, 304}));
  EXPECT_EQ(c.shape, v.shape);
  EXPECT_EQ(c.spacing, v.spacing);
}

TEST(Clip, IdempotentMonotoneBounded) {
  const Volume v = volseg::testing::random_volume({9, 8, 7}, 1, -2000, 2000);
  const Volume once = clip_intensity(v);
  EXPECT_EQ(clip_intensity(once), once);
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_GE(once.data[i], kClipLow);
    EXPECT_LE(once.data[i], kClipHigh);
    for (std::size_t j = i + 1; j < std::min(v.size(), i + 20); ++j)
      if (v.data[i] <= v.data[j]) EXPECT_LE(once.data[i], once.data[j]);
  }
}

TEST(Clip, InvalidRange) {
  const Volume v({2, 2, 2}, {1, 1, 1});
  EXPECT_THROW(clip_intensity(v, 10, 10), Error);
  try {
    clip_intensity(v, 5, 1);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidRange);
  }
}

TEST(ForegroundBox, SingleVoxelAndFull) {
  Volume v({8, 8, 8}, {1, 1, 1}, -79.0);
  v.at(3, 4, 5) = 10;
  EXPECT_EQ(foreground_bbox(v), (BBox{{3, 4, 5}, {3, 4, 5}}));
  Volume all({4, 5, 6}, {1, 1, 1}, 0.0);
  EXPECT_EQ(foreground_bbox(all), full_box(all.shape));
}

TEST(ForegroundBox, EmptyForeground) {
  const Volume v({4, 4, 4}, {1, 1, 1}, -79.0);
  try {
    foreground_bbox(v);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyForeground);
  }
}

TEST(ForegroundBox, MatchesBruteForceAndIsMinimal) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const Extent3 shape{1 + rng() % 16, 1 + rng() % 16, 1 + rng() % 16};
    Volume v(shape, {1, 1, 1}, -79.0);
    const std::size_t hits = 1 + rng() % 6;
    for (std::size_t h = 0; h < hits; ++h) v.data[rng() % v.size()] = static_cast<double>(rng() % 300);
    const auto expected = scan_box(v, -79.0);
    ASSERT_TRUE(expected);
    const BBox box = foreground_bbox(v);
    EXPECT_EQ(box, *expected);
    for (int a = 0; a < 3; ++a) {
      EXPECT_TRUE(any_above_in_slab(v, -79.0, a, box.lo[a]));
      EXPECT_TRUE(any_above_in_slab(v, -79.0, a, box.hi[a]));
    }
  }
}

TEST(Crop, ExtentsAndIdentity) {
  const Volume v = volseg::testing::random_volume({4, 4, 2}, 3);
  const LabelVolume l = volseg::testing::random_labels({4, 4, 2}, 3);
  const auto [vi, li] = crop_pair(v, l, full_box(v.shape));
  EXPECT_EQ(vi.data, v.data);
  EXPECT_EQ(li.data, l.data);
  const auto [vc, lc] = crop_pair(v, l, BBox{{1, 1, 0}, {2, 2, 0}});
  EXPECT_EQ(vc.shape, (Extent3{2, 2, 1}));
  EXPECT_EQ(lc.shape, (Extent3{2, 2, 1}));
  EXPECT_EQ(vc.spacing, v.spacing);
}

TEST(Crop, IndexOracleOnRandomProbes) {
  const Volume v = volseg::testing::random_volume({20, 18, 12}, 8);
  const LabelVolume l = volseg::testing::random_labels({20, 18, 12}, 8);
  const BBox box{{3, 2, 4}, {15, 16, 10}};
  const auto [vc, lc] = crop_pair(v, l, box);
  EXPECT_EQ(vc.size(), voxel_count(box.extent()));
  std::mt19937_64 rng(1);
  for (int probe = 0; probe < 100; ++probe) {
    const std::size_t i = rng() % vc.shape[0], j = rng() % vc.shape[1], k = rng() % vc.shape[2];
    EXPECT_EQ(lc.at(i, j, k), l.at(i + box.lo[0], j + box.lo[1], k + box.lo[2]));
    EXPECT_EQ(vc.at(i, j, k), v.at(i + box.lo[0], j + box.lo[1], k + box.lo[2]));
  }
}

TEST(Crop, CompositionLaw) {
  const Volume v = volseg::testing::random_volume({16, 14, 10}, 4);
  const BBox outer{{2, 3, 1}, {13, 12, 8}};
  const BBox inner{{1, 0, 2}, {5, 7, 6}};
  EXPECT_EQ(crop(crop(v, outer), inner).data, crop(v, compose(outer, inner)).data);
}

TEST(Crop, Errors) {
  const Volume v({4, 4, 4}, {1, 1, 1});
  const LabelVolume l({4, 4, 3}, {1, 1, 1});
  try {
    crop_pair(v, l, BBox{{0, 0, 0}, {1, 1, 1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
  try {
    crop(v, BBox{{0, 0, 0}, {4, 1, 1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BoxOutOfBounds);
  }
  try {
    crop(v, BBox{{2, 0, 0}, {1, 1, 1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BoxOutOfBounds);
  }
}

TEST(Crop, ShiftsAffineTranslation) {
  Volume v({6, 6, 6}, {2, 2, 3});
  Affine a{};
  a[0][0] = 2;
  a[1][1] = 2;
  a[2][2] = 3;
  a[3][3] = 1;
  a[0][3] = -10;
  v.affine = a;
  const Volume c = crop(v, BBox{{1, 2, 3}, {4, 4, 4}});
  ASSERT_TRUE(c.affine);
  EXPECT_DOUBLE_EQ((*c.affine)[0][3], -8);
  EXPECT_DOUBLE_EQ((*c.affine)[1][3], 4);
  EXPECT_DOUBLE_EQ((*c.affine)[2][3], 9);
}

TEST(Labels, CheckRejectsOutOfRange) {
  LabelVolume l({2, 2, 2}, {1, 1, 1});
  EXPECT_NO_THROW(check_labels(l));
  l.data[3] = 3;
  try {
    check_labels(l);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidLabel);
  }
}
