#include "volseg/microseg/unet.hpp"

#include <algorithm>

namespace volseg::microseg {

void NetworkConfig::validate() const {
  if (channels.size() < 2) fail(Errc::InvalidArgument, "network needs at least two levels");
  if (strides.size() != channels.size() - 1)
    fail(Errc::InvalidArgument, "network needs one stride per down-sampling step");
  if (class_count != 3) fail(Errc::InvalidArgument, "class_count must be 3");
  if (in_channels < 1 || residual_units < 1)
    fail(Errc::InvalidArgument, "in_channels and residual_units must be >= 1");
  for (std::size_t c : channels)
    if (c < 1) fail(Errc::InvalidArgument, "channel counts must be >= 1");
  for (std::size_t s : strides)
    if (s < 1) fail(Errc::InvalidArgument, "strides must be >= 1");
  if (!(window_lo < window_hi)) fail(Errc::InvalidRange, "input window requires lo < hi");
}

std::size_t NetworkConfig::size_divisor() const {
  std::size_t d = 1;
  for (std::size_t s : strides) d *= s;
  return d;
}

UNet::UNet(NetworkConfig config)
    : config_(std::move(config)),
      head_("head", config_.channels.empty() ? 1 : config_.channels.front(), config_.class_count,
            ConvGeometry{1, 1, 0}, true) {
  config_.validate();
  const std::size_t levels = config_.channels.size();
  std::size_t in = config_.in_channels;
  for (std::size_t l = 0; l < levels; ++l) {
    std::vector<ResidualUnit> units;
    const std::size_t out = config_.channels[l];
    for (std::size_t u = 0; u < config_.residual_units; ++u) {
      const std::size_t stride = (u == 0 && l > 0) ? config_.strides[l - 1] : 1;
      units.emplace_back("enc" + std::to_string(l) + "." + std::to_string(u), u == 0 ? in : out,
                         out, stride);
    }
    encoder_.push_back(std::move(units));
    in = out;
  }
  for (std::size_t l = 0; l + 1 < levels; ++l)
    decoder_.emplace_back("dec" + std::to_string(l), config_.channels[l + 1], config_.channels[l],
                          config_.channels[l], config_.strides[l]);

  Rng rng(config_.init_seed);
  for (auto& level : encoder_)
    for (auto& unit : level) unit.init(rng);
  for (auto& up : decoder_) up.init(rng);
  head_.init(rng);
}

Tensor UNet::forward(const Tensor& input) {
  const Dims5& d = input.dims();
  const std::size_t div = config_.size_divisor();
  if (d.c != config_.in_channels) fail(Errc::ShapeMismatch, "network input channel count");
  if (d.x % div || d.y % div || d.z % div)
    fail(Errc::ShapeMismatch, "network input extents must be multiples of " + std::to_string(div) +
                                  ", got " + to_string(d));

  std::vector<Tensor> skips;
  Tensor h = input;
  for (auto& level : encoder_) {
    for (auto& unit : level) h = unit.forward(h);
    skips.push_back(h);
  }
  for (std::size_t l = decoder_.size(); l-- > 0;) h = decoder_[l].forward(h, skips[l]);
  return head_.forward(h);
}

Tensor UNet::backward(const Tensor& grad_logits) {
  const std::size_t levels = encoder_.size();
  std::vector<Tensor> skip_grads(levels);
  Tensor g = head_.backward(grad_logits);
  for (std::size_t l = 0; l + 1 < levels; ++l) {
    auto [g_coarse, g_skip] = decoder_[l].backward(g);
    skip_grads[l] = std::move(g_skip);
    g = std::move(g_coarse);
  }
  // g now holds the gradient reaching the deepest encoder output.
  for (std::size_t l = levels; l-- > 0;) {
    if (l + 1 < levels) {
      const Tensor& s = skip_grads[l];
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += s[i];
    }
    auto& level = encoder_[l];
    for (std::size_t u = level.size(); u-- > 0;) g = level[u].backward(g);
  }
  return g;
}

std::vector<Param*> UNet::params() {
  std::vector<Param*> out;
  for (auto& level : encoder_)
    for (auto& unit : level) unit.collect(out);
  for (auto& up : decoder_) up.collect(out);
  head_.collect(out);
  return out;
}

void UNet::zero_grad() {
  for (Param* p : params()) p->zero_grad();
}

Tensor to_input(const Volume& v, const NetworkConfig& config) {
  Tensor t({1, 1, v.shape[0], v.shape[1], v.shape[2]});
  const double scale = 1.0 / (config.window_hi - config.window_lo);
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = (v.data[i] - config.window_lo) * scale;
  return t;
}

Tensor one_hot(const LabelVolume& labels, std::size_t class_count) {
  Tensor t({1, class_count, labels.shape[0], labels.shape[1], labels.shape[2]});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const std::size_t c = labels.data[i];
    if (c >= class_count) fail(Errc::InvalidLabel, "label exceeds class count");
    t.channel(0, c)[i] = 1.0;
  }
  return t;
}

LabelVolume argmax_labels(const Tensor& scores, const Vec3& spacing) {
  const Dims5& d = scores.dims();
  LabelVolume out({d.x, d.y, d.z}, spacing);
  for (std::size_t v = 0; v < d.spatial(); ++v) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < d.c; ++c)
      if (scores.channel(0, c)[v] > scores.channel(0, best)[v]) best = c;
    out.data[v] = static_cast<std::uint8_t>(best);
  }
  return out;
}

LabelVolume predict(UNet& model, const Volume& image, const PredictPolicy& policy) {
  const std::size_t div = model.config().size_divisor();
  Extent3 tile{};
  Extent3 canvas_shape{};
  for (int a = 0; a < 3; ++a) {
    const std::size_t n = image.shape[a];
    tile[a] = policy.tile[a] ? policy.tile[a] : (n + div - 1) / div * div;
    if (tile[a] % div)
      fail(Errc::InvalidArgument, "tile extents must be multiples of " + std::to_string(div));
    canvas_shape[a] = (n + tile[a] - 1) / tile[a] * tile[a];
  }

  Volume canvas(canvas_shape, image.spacing, policy.pad_value);
  for (std::size_t z = 0; z < image.shape[2]; ++z)
    for (std::size_t y = 0; y < image.shape[1]; ++y)
      std::copy_n(&image.data[image.index(0, y, z)], image.shape[0], &canvas.data[canvas.index(0, y, z)]);

  LabelVolume out(image.shape, image.spacing);
  for (std::size_t tz = 0; tz < canvas_shape[2]; tz += tile[2])
    for (std::size_t ty = 0; ty < canvas_shape[1]; ty += tile[1])
      for (std::size_t tx = 0; tx < canvas_shape[0]; tx += tile[0]) {
        const BBox box{{tx, ty, tz}, {tx + tile[0] - 1, ty + tile[1] - 1, tz + tile[2] - 1}};
        const Volume piece = crop(canvas, box);
        const LabelVolume labels =
            argmax_labels(model.forward(to_input(piece, model.config())), image.spacing);
        for (std::size_t z = 0; z < tile[2] && tz + z < image.shape[2]; ++z)
          for (std::size_t y = 0; y < tile[1] && ty + y < image.shape[1]; ++y)
            for (std::size_t x = 0; x < tile[0] && tx + x < image.shape[0]; ++x)
              out.at(tx + x, ty + y, tz + z) = labels.at(x, y, z);
      }
  out.affine = image.affine;
  return out;
}

}  // namespace volseg::microseg
