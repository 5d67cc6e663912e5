#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include "volseg/microseg/tensor.hpp"

namespace volseg::testing {

using microseg::Real;
using microseg::Tensor;

inline Tensor random_tensor(microseg::Dims5 dims, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(dims);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

/// Largest central-difference disagreement over `x`, measured as
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-4), with step
/// h = 1e-5 * max(1, |x_i|). `loss` must read `x` afresh on every call.
/// With stride > 1 only every stride-th coordinate is probed.
inline double max_gradient_error(std::vector<Real>& x, const std::vector<Real>& analytic,
                                 const std::function<double()>& loss, std::size_t stride = 1) {
  double worst = 0;
  for (std::size_t i = 0; i < x.size(); i += stride) {
    const Real saved = x[i];
    const Real h = 1e-5 * std::max<Real>(1, std::abs(saved));
    x[i] = saved + h;
    const double up = loss();
    x[i] = saved - h;
    const double down = loss();
    x[i] = saved;
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-4});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

/// sum(output * weights): a scalar loss whose gradient wrt output is `weights`.
inline double weighted_sum(const Tensor& out, const Tensor& weights) {
  double s = 0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * weights[i];
  return s;
}

inline constexpr double kGradTolerance = 1e-4;

}  // namespace volseg::testing
