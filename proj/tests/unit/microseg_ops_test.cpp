#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "gradcheck.hpp"
#include "volseg/microseg/ops.hpp"

using namespace volseg;
using namespace volseg::microseg;
using volseg::testing::kGradTolerance;
using volseg::testing::max_gradient_error;
using volseg::testing::random_tensor;
using volseg::testing::weighted_sum;

TEST(Conv3d, IdentityKernel) {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({1, 1, 5, 4, 3}, rng);
  Tensor w({1, 1, 3, 3, 3});
  w[13] = 1;
  const Tensor y = conv3d_forward(x, w, {}, {});
  EXPECT_EQ(y.values(), x.values());
}

TEST(Conv3d, AllOnesKernelSumsNeighbourhood) {
  const Tensor x({1, 1, 5, 5, 5}, 1.0);
  const Tensor w({1, 1, 3, 3, 3}, 1.0);
  const Tensor y = conv3d_forward(x, w, {}, {});
  EXPECT_EQ(y[2 + 5 * (2 + 5 * 2)], 27.0);
  EXPECT_EQ(y[0], 8.0);  // corner sees a 2x2x2 neighbourhood under zero padding
}

TEST(Conv3d, StridedAndPointwiseShapes) {
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor({2, 3, 8, 6, 4}, rng);
  const Tensor w = random_tensor({5, 3, 3, 3, 3}, rng);
  const Tensor y = conv3d_forward(x, w, {}, {3, 2, 1});
  EXPECT_EQ(y.dims(), (Dims5{2, 5, 4, 3, 2}));
  const Tensor p = conv3d_forward(x, random_tensor({4, 3, 1, 1, 1}, rng), {}, {1, 1, 0});
  EXPECT_EQ(p.dims(), (Dims5{2, 4, 8, 6, 4}));
}

TEST(Conv3d, UnitStrideMatchesDirectSum) {
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({1, 2, 5, 4, 3}, rng);
  const Tensor w = random_tensor({2, 2, 3, 3, 3}, rng);
  const std::vector<Real> bias{0.5, -0.25};
  const Tensor y = conv3d_forward(x, w, bias, {});
  for (std::size_t oc = 0; oc < 2; ++oc)
    for (std::size_t z = 0; z < 3; ++z)
      for (std::size_t yy = 0; yy < 4; ++yy)
        for (std::size_t xx = 0; xx < 5; ++xx) {
          double s = bias[oc];
          for (std::size_t ic = 0; ic < 2; ++ic)
            for (int kz = 0; kz < 3; ++kz)
              for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                  const int ix = static_cast<int>(xx) + kx - 1, iy = static_cast<int>(yy) + ky - 1,
                            iz = static_cast<int>(z) + kz - 1;
                  if (ix < 0 || iy < 0 || iz < 0 || ix >= 5 || iy >= 4 || iz >= 3) continue;
                  s += w[((oc * 2 + ic) * 3 + kz) * 9 + ky * 3 + kx] *
                       x[(ic * 3 + iz) * 20 + iy * 5 + ix];
                }
          EXPECT_NEAR(y[(oc * 3 + z) * 20 + yy * 5 + xx], s, 1e-12);
        }
}

TEST(Conv3d, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (const ConvGeometry g : {ConvGeometry{3, 1, 1}, ConvGeometry{3, 2, 1}, ConvGeometry{1, 2, 0}}) {
    Tensor x = random_tensor({1, 2, 4, 4, 4}, rng);
    Tensor w = random_tensor({2, 2, g.kernel, g.kernel, g.kernel}, rng);
    std::vector<Real> b{0.1, -0.3};
    const Tensor y = conv3d_forward(x, w, b, g);
    const Tensor r = random_tensor(y.dims(), rng);
    const ConvGrads grads = conv3d_backward(x, w, r, g, true);
    auto loss = [&] { return weighted_sum(conv3d_forward(x, w, b, g), r); };
    EXPECT_LT(max_gradient_error(x.values(), grads.input.values(), loss), kGradTolerance);
    EXPECT_LT(max_gradient_error(w.values(), grads.weight.values(), loss), kGradTolerance);
    EXPECT_LT(max_gradient_error(b, grads.bias, loss), kGradTolerance);
  }
}

TEST(PReLU, PublishedBranches) {
  const Tensor x({1, 1, 3, 1, 1}, std::vector<Real>{2, -2, 0});
  const std::vector<Real> a{0.25};
  const Tensor y = prelu_forward(x, a);
  EXPECT_EQ(y[0], 2);
  EXPECT_EQ(y[1], -0.5);
  EXPECT_EQ(y[2], 0);
  const std::vector<Real> zero{0};
  std::mt19937_64 rng(5);
  const Tensor z = random_tensor({1, 1, 4, 4, 4}, rng);
  const Tensor relu = prelu_forward(z, zero);
  for (std::size_t i = 0; i < z.size(); ++i) EXPECT_EQ(relu[i], std::max<Real>(0, z[i]));
}

TEST(PReLU, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(6);
  Tensor x = random_tensor({1, 2, 4, 4, 4}, rng);
  for (auto& v : x.values())
    if (std::abs(v) < 1e-3) v = 0.5;  // keep away from the kink
  std::vector<Real> a{0.25, -0.1};
  const Tensor r = random_tensor(x.dims(), rng);
  const PReLUGrads g = prelu_backward(x, a, r);
  auto loss = [&] { return weighted_sum(prelu_forward(x, a), r); };
  EXPECT_LT(max_gradient_error(x.values(), g.input.values(), loss), kGradTolerance);
  EXPECT_LT(max_gradient_error(a, g.slopes, loss), kGradTolerance);
}

TEST(InstanceNorm, ConstantChannelGivesShift) {
  const Tensor x({1, 2, 3, 3, 3}, 7.5);
  const std::vector<Real> scale{2, 3}, shift{0.5, -1};
  const NormForward f = instance_norm_forward(x, scale, shift);
  for (std::size_t i = 0; i < 27; ++i) EXPECT_EQ(f.output[i], 0.5);
  for (std::size_t i = 27; i < 54; ++i) EXPECT_EQ(f.output[i], -1);
}

TEST(InstanceNorm, StandardizedMoments) {
  std::mt19937_64 rng(7);
  const Tensor x = random_tensor({2, 3, 5, 4, 3}, rng, -20, 50);
  const std::vector<Real> ones(3, 1), zeros(3, 0);
  const NormForward f = instance_norm_forward(x, ones, zeros);
  const std::size_t n = 60;
  for (std::size_t bc = 0; bc < 6; ++bc) {
    const Real* p = f.normalized.data() + bc * n;
    const double mean = std::accumulate(p, p + n, 0.0) / n;
    double var = 0;
    for (std::size_t i = 0; i < n; ++i) var += (p[i] - mean) * (p[i] - mean);
    var /= n;
    EXPECT_NEAR(mean, 0, 1e-6);
    EXPECT_NEAR(var, 1, 1e-3);
  }
}

TEST(InstanceNorm, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(8);
  Tensor x = random_tensor({1, 2, 4, 4, 4}, rng);
  std::vector<Real> scale{1.3, 0.7}, shift{0.2, -0.4};
  const Tensor r = random_tensor(x.dims(), rng);
  const NormGrads g = instance_norm_backward(instance_norm_forward(x, scale, shift), scale, r);
  auto loss = [&] { return weighted_sum(instance_norm_forward(x, scale, shift).output, r); };
  EXPECT_LT(max_gradient_error(x.values(), g.input.values(), loss), kGradTolerance);
  EXPECT_LT(max_gradient_error(scale, g.scale, loss), kGradTolerance);
  EXPECT_LT(max_gradient_error(shift, g.shift, loss), kGradTolerance);
}

TEST(Softmax, ExamplesAndNormalization) {
  const Tensor zero({1, 3, 1, 1, 1}, 0.0);
  const Tensor p = softmax_channels(zero);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(p[c], 1.0 / 3, 1e-15);
  const Tensor big({1, 3, 1, 1, 1}, std::vector<Real>{1000, 0, 0});
  const Tensor q = softmax_channels(big);
  EXPECT_NEAR(q[0], 1, 1e-12);
  EXPECT_TRUE(q.all_finite());
  std::mt19937_64 rng(9);
  const Tensor s = softmax_channels(random_tensor({2, 3, 4, 3, 2}, rng, -30, 30));
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t v = 0; v < 24; ++v) {
      double sum = 0;
      for (std::size_t c = 0; c < 3; ++c) {
        const Real pc = s[(b * 3 + c) * 24 + v];
        EXPECT_GE(pc, 0);
        sum += pc;
      }
      EXPECT_NEAR(sum, 1, 1e-6);
    }
}

TEST(SoftDice, PerfectPredictionIsZero) {
  Tensor g({1, 3, 2, 2, 2});
  for (std::size_t v = 0; v < 8; ++v) g[(v % 3) * 8 + v] = 1;
  const LossResult r = soft_dice_loss(g, g);
  EXPECT_NEAR(r.loss, 0, 1e-15);
}

TEST(SoftDice, UniformProbabilitiesClosedForm) {
  // 10 voxels: 6 background, 3 kidney, 1 tumour.
  Tensor g({1, 3, 10, 1, 1});
  const int cls[10] = {0, 0, 0, 0, 0, 0, 1, 1, 1, 2};
  for (int v = 0; v < 10; ++v) g[cls[v] * 10 + v] = 1;
  const Tensor p({1, 3, 10, 1, 1}, 1.0 / 3);
  const double sum_p = 10.0 / 3;
  const double d1 = (2 * (3.0 / 3) + 1) / (sum_p + 3 + 1);
  const double d2 = (2 * (1.0 / 3) + 1) / (sum_p + 1 + 1);
  EXPECT_NEAR(soft_dice_loss(p, g).loss, 1 - (d1 + d2) / 2, 1e-14);
}

TEST(SoftDice, RangeAndGradient) {
  std::mt19937_64 rng(10);
  Tensor p = softmax_channels(random_tensor({3, 3, 2, 2, 2}, rng, -2, 2));
  Tensor g({3, 3, 2, 2, 2});
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t v = 0; v < 8; ++v) g[(b * 3 + rng() % 3) * 8 + v] = 1;
  const LossResult r = soft_dice_loss(p, g);
  EXPECT_GE(r.loss, 0);
  EXPECT_LT(r.loss, 1);
  auto loss = [&] { return soft_dice_loss(p, g).loss; };
  EXPECT_LT(max_gradient_error(p.values(), r.grad.values(), loss), kGradTolerance);
}

TEST(SoftmaxDiceComposite, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  Tensor logits = random_tensor({1, 3, 4, 4, 2}, rng, -2, 2);
  Tensor g({1, 3, 4, 4, 2});
  for (std::size_t v = 0; v < 32; ++v) g[(rng() % 3) * 32 + v] = 1;
  const Tensor p = softmax_channels(logits);
  const Tensor grad_logits = softmax_backward(p, soft_dice_loss(p, g).grad);
  auto loss = [&] { return soft_dice_loss(softmax_channels(logits), g).loss; };
  EXPECT_LT(max_gradient_error(logits.values(), grad_logits.values(), loss), kGradTolerance);
}

TEST(Upsample, RoundTripAndGradient) {
  std::mt19937_64 rng(12);
  Tensor x = random_tensor({1, 2, 2, 3, 2}, rng);
  const Tensor up = upsample_forward(x, 2);
  EXPECT_EQ(up.dims(), (Dims5{1, 2, 4, 6, 4}));
  EXPECT_EQ(up[1 + 4 * (1 + 6 * 1)], x[0]);
  const Tensor r = random_tensor(up.dims(), rng);
  const Tensor g = upsample_backward(r, 2);
  auto loss = [&] { return weighted_sum(upsample_forward(x, 2), r); };
  EXPECT_LT(max_gradient_error(x.values(), g.values(), loss), kGradTolerance);
}

TEST(Concat, SplitInvertsConcat) {
  std::mt19937_64 rng(13);
  const Tensor a = random_tensor({2, 2, 3, 2, 2}, rng);
  const Tensor b = random_tensor({2, 3, 3, 2, 2}, rng);
  const Tensor c = concat_channels(a, b);
  EXPECT_EQ(c.dims().c, 5u);
  const auto [ga, gb] = split_channels(c, 2);
  EXPECT_EQ(ga, a);
  EXPECT_EQ(gb, b);
}

TEST(Ops, ShapeErrors) {
  const Tensor x({1, 2, 4, 4, 4});
  const Tensor w({1, 3, 3, 3, 3});
  try {
    conv3d_forward(x, w, {}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ShapeMismatch);
  }
  EXPECT_THROW(soft_dice_loss(Tensor({1, 3, 2, 2, 2}), Tensor({1, 3, 2, 2, 1})), Error);
}
