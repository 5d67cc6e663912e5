#pragma once

#include <string>
#include <vector>

#include "volseg/microseg/layers.hpp"
#include "volseg/volume.hpp"

namespace volseg::microseg {

struct NetworkConfig {
  std::size_t in_channels = 1;
  std::size_t class_count = 3;
  std::vector<std::size_t> channels{8, 16, 32};
  std::vector<std::size_t> strides{2, 2};
  std::size_t residual_units = 1;
  /// Intensity window mapped linearly onto [0, 1] before the first layer.
  double window_lo = kClipLow;
  double window_hi = kClipHigh;
  std::uint64_t init_seed = 0;

  void validate() const;
  /// Spatial extents must be multiples of this.
  std::size_t size_divisor() const;
  bool operator==(const NetworkConfig&) const = default;
};

/// Encoder-decoder segmentation network: residual down-sampling units,
/// concatenation skips, nearest up-sampling, and a 1x1x1 classifier head.
class UNet {
 public:
  explicit UNet(NetworkConfig config);

  const NetworkConfig& config() const { return config_; }

  /// Logits of dims (n, class_count, x, y, z).
  Tensor forward(const Tensor& input);
  /// Back-propagates d loss / d logits; returns d loss / d input.
  Tensor backward(const Tensor& grad_logits);

  std::vector<Param*> params();
  void zero_grad();

 private:
  NetworkConfig config_;
  std::vector<std::vector<ResidualUnit>> encoder_;
  std::vector<UpBlock> decoder_;
  Conv3d head_;
};

/// Image volume as a (1, 1, x, y, z) tensor scaled through the model window.
Tensor to_input(const Volume& v, const NetworkConfig& config);
/// One-hot (1, classes, x, y, z) tensor of a label volume.
Tensor one_hot(const LabelVolume& labels, std::size_t class_count = kClassCount);
/// Argmax over channels of batch item 0, ties to the lowest class.
LabelVolume argmax_labels(const Tensor& scores, const Vec3& spacing);

struct PredictPolicy {
  /// Tile extent fed to the network; 0 on an axis means the whole
  /// (divisor-padded) axis.
  Extent3 tile{0, 0, 0};
  double pad_value = kClipLow;
};

/// Non-overlapping tiling with padding at the volume edges; the stitched
/// argmax mask has the input's shape and spacing.
LabelVolume predict(UNet& model, const Volume& image, const PredictPolicy& policy = {});

}  // namespace volseg::microseg
