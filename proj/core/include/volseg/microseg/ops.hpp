#pragma once

#include <span>

#include "volseg/microseg/tensor.hpp"

namespace volseg::microseg {

// Functional primitives. Every forward has an exact backward.

struct ConvGeometry {
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;
};

/// Output extent of one axis: (n + 2p - k) / s + 1.
std::size_t conv_extent(std::size_t n, const ConvGeometry& g);

/// Cross-correlation. `weight` has dims (out, in, k, k, k); `bias` is empty
/// or holds one value per output channel.
Tensor conv3d_forward(const Tensor& input, const Tensor& weight, std::span<const Real> bias,
                      const ConvGeometry& g);

struct ConvGrads {
  Tensor input;
  Tensor weight;
  std::vector<Real> bias;
};

ConvGrads conv3d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                          const ConvGeometry& g, bool with_bias);

/// f(x) = x for x >= 0, a_c x otherwise, one slope per channel.
Tensor prelu_forward(const Tensor& input, std::span<const Real> slopes);

struct PReLUGrads {
  Tensor input;
  std::vector<Real> slopes;
};

PReLUGrads prelu_backward(const Tensor& input, std::span<const Real> slopes,
                          const Tensor& grad_out);

/// Per (instance, channel) standardization followed by scale and shift.
struct NormForward {
  Tensor output;
  Tensor normalized;              // x-hat, before the affine
  std::vector<Real> inv_std;      // one per (instance, channel)
};

inline constexpr Real kNormEpsilon = 1e-5;

NormForward instance_norm_forward(const Tensor& input, std::span<const Real> scale,
                                  std::span<const Real> shift, Real epsilon = kNormEpsilon);

struct NormGrads {
  Tensor input;
  std::vector<Real> scale;
  std::vector<Real> shift;
};

NormGrads instance_norm_backward(const NormForward& fwd, std::span<const Real> scale,
                                 const Tensor& grad_out);

/// Softmax across channels at each voxel, stabilized by max subtraction.
Tensor softmax_channels(const Tensor& logits);
Tensor softmax_backward(const Tensor& probs, const Tensor& grad_probs);

struct LossResult {
  Real loss = 0;
  Tensor grad;  // d loss / d probs
};

/// 1 - mean over foreground classes of (2 sum p g + smooth) / (sum p + sum g + smooth).
/// Class 0 is excluded; sums run per instance and are averaged over the batch.
LossResult soft_dice_loss(const Tensor& probs, const Tensor& one_hot, Real smooth = 1);

/// Nearest-neighbour up-sampling by an integer factor on each spatial axis.
Tensor upsample_forward(const Tensor& input, std::size_t factor);
Tensor upsample_backward(const Tensor& grad_out, std::size_t factor);

Tensor concat_channels(const Tensor& a, const Tensor& b);
std::pair<Tensor, Tensor> split_channels(const Tensor& grad, std::size_t first_channels);

}  // namespace volseg::microseg
