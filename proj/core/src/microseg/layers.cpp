#include "volseg/microseg/layers.hpp"

#include <cmath>

namespace volseg::microseg {

namespace {

void add_into(Tensor& acc, const Tensor& g) {
  if (acc.dims() != g.dims()) fail(Errc::ShapeMismatch, "gradient accumulation dims differ");
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

void add_into(Param& p, std::span<const Real> g) {
  for (std::size_t i = 0; i < g.size(); ++i) p.grad[i] += g[i];
}

}  // namespace

Conv3d::Conv3d(const std::string& name, std::size_t in_channels, std::size_t out_channels,
               ConvGeometry geometry, bool with_bias)
    : weight(name + ".weight",
             Tensor({out_channels, in_channels, geometry.kernel, geometry.kernel, geometry.kernel})),
      geometry_(geometry) {
  if (with_bias) bias.emplace(name + ".bias", Tensor({1, out_channels, 1, 1, 1}));
}

void Conv3d::init(Rng& rng) {
  const Dims5& d = weight.value.dims();
  const double bound = std::sqrt(1.0 / static_cast<double>(d.c * d.x * d.y * d.z));
  for (Real& w : weight.value.values()) w = rng.uniform(-bound, bound);
  if (bias) bias->value.fill(0);
}

Tensor Conv3d::forward(const Tensor& x) {
  input_ = x;
  return conv3d_forward(x, weight.value,
                        bias ? std::span<const Real>(bias->value.values()) : std::span<const Real>{},
                        geometry_);
}

Tensor Conv3d::backward(const Tensor& grad_out) {
  ConvGrads g = conv3d_backward(input_, weight.value, grad_out, geometry_, bias.has_value());
  add_into(weight.grad, g.weight);
  if (bias) add_into(*bias, g.bias);
  return std::move(g.input);
}

void Conv3d::collect(std::vector<Param*>& out) {
  out.push_back(&weight);
  if (bias) out.push_back(&*bias);
}

PReLU::PReLU(const std::string& name, std::size_t channels)
    : slopes(name + ".slope", Tensor({1, channels, 1, 1, 1}, kInitialSlope)) {}

Tensor PReLU::forward(const Tensor& x) {
  input_ = x;
  return prelu_forward(x, slopes.value.values());
}

Tensor PReLU::backward(const Tensor& grad_out) {
  PReLUGrads g = prelu_backward(input_, slopes.value.values(), grad_out);
  add_into(slopes, g.slopes);
  return std::move(g.input);
}

void PReLU::collect(std::vector<Param*>& out) { out.push_back(&slopes); }

InstanceNorm::InstanceNorm(const std::string& name, std::size_t channels)
    : scale(name + ".scale", Tensor({1, channels, 1, 1, 1}, 1.0)),
      shift(name + ".shift", Tensor({1, channels, 1, 1, 1}, 0.0)) {}

Tensor InstanceNorm::forward(const Tensor& x) {
  cache_ = instance_norm_forward(x, scale.value.values(), shift.value.values());
  return cache_.output;
}

Tensor InstanceNorm::backward(const Tensor& grad_out) {
  NormGrads g = instance_norm_backward(cache_, scale.value.values(), grad_out);
  add_into(scale, g.scale);
  add_into(shift, g.shift);
  return std::move(g.input);
}

void InstanceNorm::collect(std::vector<Param*>& out) {
  out.push_back(&scale);
  out.push_back(&shift);
}

ConvBlock::ConvBlock(const std::string& name, std::size_t in_channels, std::size_t out_channels,
                     std::size_t stride)
    : conv(name + ".conv", in_channels, out_channels, ConvGeometry{3, stride, 1}, false),
      norm(name + ".norm", out_channels),
      act(name + ".act", out_channels) {}

Tensor ConvBlock::forward(const Tensor& x) { return act.forward(norm.forward(conv.forward(x))); }

Tensor ConvBlock::backward(const Tensor& grad_out) {
  return conv.backward(norm.backward(act.backward(grad_out)));
}

void ConvBlock::collect(std::vector<Param*>& out) {
  conv.collect(out);
  norm.collect(out);
  act.collect(out);
}

ResidualUnit::ResidualUnit(const std::string& name, std::size_t in_channels,
                           std::size_t out_channels, std::size_t stride)
    : first(name + ".first", in_channels, out_channels, stride),
      second(name + ".second", out_channels, out_channels, 1) {
  if (in_channels != out_channels || stride != 1)
    projection.emplace(name + ".skip", in_channels, out_channels, ConvGeometry{1, stride, 0}, false);
}

void ResidualUnit::init(Rng& rng) {
  first.init(rng);
  second.init(rng);
  if (projection) projection->init(rng);
}

Tensor ResidualUnit::forward(const Tensor& x) {
  Tensor out = second.forward(first.forward(x));
  add_into(out, projection ? projection->forward(x) : x);
  return out;
}

Tensor ResidualUnit::backward(const Tensor& grad_out) {
  Tensor g = first.backward(second.backward(grad_out));
  add_into(g, projection ? projection->backward(grad_out) : grad_out);
  return g;
}

void ResidualUnit::collect(std::vector<Param*>& out) {
  first.collect(out);
  second.collect(out);
  if (projection) projection->collect(out);
}

UpBlock::UpBlock(const std::string& name, std::size_t coarse_channels, std::size_t skip_channels,
                 std::size_t out_channels, std::size_t factor)
    : block(name, coarse_channels + skip_channels, out_channels, 1),
      coarse_channels_(coarse_channels),
      factor_(factor) {}

Tensor UpBlock::forward(const Tensor& coarse, const Tensor& skip) {
  return block.forward(concat_channels(upsample_forward(coarse, factor_), skip));
}

std::pair<Tensor, Tensor> UpBlock::backward(const Tensor& grad_out) {
  auto [g_up, g_skip] = split_channels(block.backward(grad_out), coarse_channels_);
  return {upsample_backward(g_up, factor_), std::move(g_skip)};
}

void UpBlock::collect(std::vector<Param*>& out) { block.collect(out); }

}  // namespace volseg::microseg
