#pragma once

#include <optional>
#include <string>
#include <vector>

#include "volseg/microseg/ops.hpp"
#include "volseg/random.hpp"

namespace volseg::microseg {

// Stateful layers. forward() caches what backward() needs; backward()
// accumulates into each Param::grad and returns the input gradient.

class Conv3d {
 public:
  Conv3d(const std::string& name, std::size_t in_channels, std::size_t out_channels,
         ConvGeometry geometry, bool with_bias);

  /// Uniform in +-sqrt(1 / fan_in); bias starts at zero.
  void init(Rng& rng);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void collect(std::vector<Param*>& out);

  Param weight;
  std::optional<Param> bias;
  const ConvGeometry& geometry() const { return geometry_; }

 private:
  ConvGeometry geometry_;
  Tensor input_;
};

class PReLU {
 public:
  static constexpr Real kInitialSlope = 0.25;

  PReLU(const std::string& name, std::size_t channels);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void collect(std::vector<Param*>& out);

  Param slopes;

 private:
  Tensor input_;
};

/// Per-instance, per-channel normalization with learnable affine and no
/// running statistics (batch normalization at batch size one).
class InstanceNorm {
 public:
  InstanceNorm(const std::string& name, std::size_t channels);

  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void collect(std::vector<Param*>& out);

  Param scale;
  Param shift;

 private:
  NormForward cache_;
};

/// conv -> norm -> PReLU
class ConvBlock {
 public:
  ConvBlock(const std::string& name, std::size_t in_channels, std::size_t out_channels,
            std::size_t stride);

  void init(Rng& rng) { conv.init(rng); }
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void collect(std::vector<Param*>& out);

  Conv3d conv;
  InstanceNorm norm;
  PReLU act;
};

/// Two conv blocks (the first strided) added to a skip path. The skip is the
/// identity when shape is preserved, else a strided 1x1x1 projection.
class ResidualUnit {
 public:
  ResidualUnit(const std::string& name, std::size_t in_channels, std::size_t out_channels,
               std::size_t stride);

  void init(Rng& rng);
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& grad_out);
  void collect(std::vector<Param*>& out);

  ConvBlock first;
  ConvBlock second;
  std::optional<Conv3d> projection;
};

/// Up-sample the coarse map, concatenate the encoder skip, then a conv block.
class UpBlock {
 public:
  UpBlock(const std::string& name, std::size_t coarse_channels, std::size_t skip_channels,
          std::size_t out_channels, std::size_t factor);

  void init(Rng& rng) { block.init(rng); }
  Tensor forward(const Tensor& coarse, const Tensor& skip);
  /// Returns (grad wrt coarse input, grad wrt skip).
  std::pair<Tensor, Tensor> backward(const Tensor& grad_out);
  void collect(std::vector<Param*>& out);

  ConvBlock block;

 private:
  std::size_t coarse_channels_;
  std::size_t factor_;
};

}  // namespace volseg::microseg
