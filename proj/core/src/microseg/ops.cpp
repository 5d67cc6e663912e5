#include "volseg/microseg/ops.hpp"

#include <algorithm>
#include <cmath>

namespace volseg::microseg {

namespace {

struct Range {
  std::size_t lo = 0;
  std::size_t hi = 0;  // exclusive
};

/// Output indices o with 0 <= o * stride + k - padding < n_in.
Range valid_outputs(std::size_t n_in, std::size_t n_out, std::size_t k, const ConvGeometry& g) {
  const auto s = static_cast<std::int64_t>(g.stride);
  const std::int64_t shift = static_cast<std::int64_t>(k) - static_cast<std::int64_t>(g.padding);
  // o * s + shift >= 0  and  o * s + shift <= n_in - 1
  std::int64_t lo = shift >= 0 ? 0 : (-shift + s - 1) / s;
  const std::int64_t top = static_cast<std::int64_t>(n_in) - 1 - shift;
  std::int64_t hi = top < 0 ? 0 : top / s + 1;
  hi = std::min<std::int64_t>(hi, static_cast<std::int64_t>(n_out));
  lo = std::min(lo, hi);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

Dims5 conv_output_dims(const Tensor& input, const Tensor& weight, const ConvGeometry& g) {
  const Dims5& in = input.dims();
  const Dims5& w = weight.dims();
  if (g.stride < 1 || g.kernel < 1) fail(Errc::InvalidArgument, "conv stride and kernel must be >= 1");
  if (w.c != in.c)
    fail(Errc::ShapeMismatch, "conv expects " + std::to_string(w.c) + " input channels, got " +
                                  std::to_string(in.c));
  if (w.x != g.kernel || w.y != g.kernel || w.z != g.kernel)
    fail(Errc::ShapeMismatch, "conv weight kernel extent does not match geometry");
  for (std::size_t n : {in.x, in.y, in.z})
    if (n + 2 * g.padding < g.kernel) fail(Errc::ShapeMismatch, "conv input smaller than kernel");
  return {in.n, w.n, conv_extent(in.x, g), conv_extent(in.y, g), conv_extent(in.z, g)};
}

/// Visits every (kernel tap, output row) pair of a convolution. `row`
/// receives the weight index, the output row start, the input row start,
/// and the valid output x range.
template <typename RowFn>
void for_each_tap_row(const Dims5& in, const Dims5& out, const ConvGeometry& g, RowFn&& row) {
  const std::size_t k = g.kernel;
  for (std::size_t kz = 0; kz < k; ++kz) {
    const Range rz = valid_outputs(in.z, out.z, kz, g);
    for (std::size_t ky = 0; ky < k; ++ky) {
      const Range ry = valid_outputs(in.y, out.y, ky, g);
      for (std::size_t kx = 0; kx < k; ++kx) {
        const Range rx = valid_outputs(in.x, out.x, kx, g);
        if (rx.lo >= rx.hi) continue;
        const std::size_t tap = kx + k * (ky + k * kz);
        for (std::size_t oz = rz.lo; oz < rz.hi; ++oz) {
          const std::size_t iz = oz * g.stride + kz - g.padding;
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            const std::size_t iy = oy * g.stride + ky - g.padding;
            // Input x of output ox is ox * stride + kx - padding, >= 0 for ox >= rx.lo.
            row(tap, out.x * (oy + out.y * oz), in.x * (iy + in.y * iz), rx, kx);
          }
        }
      }
    }
  }
}

void check_same_dims(const Tensor& a, const Tensor& b, const char* what) {
  if (a.dims() != b.dims())
    fail(Errc::ShapeMismatch, std::string(what) + ": " + to_string(a.dims()) + " vs " +
                                  to_string(b.dims()));
}


/// Stride-1 convolutions run on a zero-padded copy of the input. Output voxel
/// (x, y, z) is embedded at x + px * (y + py * z) of the padded grid, so each
/// kernel tap becomes a constant offset into one contiguous run of length `span`.
inline constexpr std::size_t kChunk = 512;

struct PaddedLayout {
  std::size_t px = 0, py = 0, pz = 0;
  std::size_t span = 0;
  std::size_t kernel = 0;

  PaddedLayout(const Dims5& in, const Dims5& out, const ConvGeometry& g)
      : px(in.x + 2 * g.padding), py(in.y + 2 * g.padding), pz(in.z + 2 * g.padding),
        span(out.x - 1 + px * (out.y - 1 + py * (out.z - 1)) + 1), kernel(g.kernel) {}

  std::size_t volume() const { return px * py * pz; }
  std::size_t offset(std::size_t tap) const {
    const std::size_t kx = tap % kernel, ky = (tap / kernel) % kernel, kz = tap / (kernel * kernel);
    return kx + px * (ky + py * kz);
  }
  std::size_t embed(std::size_t x, std::size_t y, std::size_t z) const { return x + px * (y + py * z); }
};

std::vector<Real> pad_input(const Tensor& input, const PaddedLayout& l, std::size_t p) {
  const Dims5& d = input.dims();
  std::vector<Real> out(d.n * d.c * l.volume(), 0);
  for (std::size_t bc = 0; bc < d.n * d.c; ++bc) {
    const Real* src = input.data() + bc * d.spatial();
    Real* dst = out.data() + bc * l.volume();
    for (std::size_t z = 0; z < d.z; ++z)
      for (std::size_t y = 0; y < d.y; ++y)
        std::copy_n(src + d.x * (y + d.y * z), d.x, dst + l.embed(p, y + p, z + p));
  }
  return out;
}

Real dot(const Real* a, const Real* b, std::size_t n) {
  Real acc[4] = {0, 0, 0, 0};
  std::size_t v = 0;
  for (; v + 4 <= n; v += 4)
    for (std::size_t l = 0; l < 4; ++l) acc[l] += a[v + l] * b[v + l];
  for (; v < n; ++v) acc[0] += a[v] * b[v];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

Tensor conv_forward_unit_stride(const Tensor& input, const Tensor& weight,
                                std::span<const Real> bias, const ConvGeometry& g, const Dims5& od) {
  const Dims5& id = input.dims();
  const PaddedLayout l(id, od, g);
  const std::vector<Real> padded = pad_input(input, l, g.padding);
  const std::size_t taps = g.kernel * g.kernel * g.kernel;
  std::vector<std::size_t> offsets(taps);
  for (std::size_t t = 0; t < taps; ++t) offsets[t] = l.offset(t);

  Tensor out(od);
  std::vector<Real> acc(l.span);
  for (std::size_t b = 0; b < od.n; ++b)
    for (std::size_t oc = 0; oc < od.c; ++oc) {
      std::fill(acc.begin(), acc.end(), bias.empty() ? Real{0} : bias[oc]);
      for (std::size_t v0 = 0; v0 < l.span; v0 += kChunk) {
        const std::size_t len = std::min(kChunk, l.span - v0);
        Real* a = acc.data() + v0;
        for (std::size_t ic = 0; ic < id.c; ++ic) {
          const Real* src = padded.data() + (b * id.c + ic) * l.volume() + v0;
          const Real* w = weight.data() + (oc * id.c + ic) * taps;
          for (std::size_t t = 0; t < taps; ++t) {
            const Real wv = w[t];
            const Real* x = src + offsets[t];
            for (std::size_t v = 0; v < len; ++v) a[v] += wv * x[v];
          }
        }
      }
      Real* dst = out.channel(b, oc);
      for (std::size_t z = 0; z < od.z; ++z)
        for (std::size_t y = 0; y < od.y; ++y)
          std::copy_n(acc.data() + l.embed(0, y, z), od.x, dst + od.x * (y + od.y * z));
    }
  return out;
}

ConvGrads conv_backward_unit_stride(const Tensor& input, const Tensor& weight,
                                    const Tensor& grad_out, const ConvGeometry& g, const Dims5& od) {
  const Dims5& id = input.dims();
  const PaddedLayout l(id, od, g);
  const std::vector<Real> padded = pad_input(input, l, g.padding);
  const std::size_t taps = g.kernel * g.kernel * g.kernel;
  std::vector<std::size_t> offsets(taps);
  for (std::size_t t = 0; t < taps; ++t) offsets[t] = l.offset(t);

  ConvGrads grads{Tensor(id), Tensor(weight.dims()), {}};
  std::vector<Real> grad_padded(id.n * id.c * l.volume(), 0);
  std::vector<Real> go(l.span);
  for (std::size_t b = 0; b < od.n; ++b)
    for (std::size_t oc = 0; oc < od.c; ++oc) {
      // Gaps between embedded rows stay zero, so they contribute nothing.
      std::fill(go.begin(), go.end(), Real{0});
      const Real* g_src = grad_out.channel(b, oc);
      for (std::size_t z = 0; z < od.z; ++z)
        for (std::size_t y = 0; y < od.y; ++y)
          std::copy_n(g_src + od.x * (y + od.y * z), od.x, go.data() + l.embed(0, y, z));
      for (std::size_t v0 = 0; v0 < l.span; v0 += kChunk) {
        const std::size_t len = std::min(kChunk, l.span - v0);
        const Real* gv = go.data() + v0;
        for (std::size_t ic = 0; ic < id.c; ++ic) {
          const Real* src = padded.data() + (b * id.c + ic) * l.volume() + v0;
          Real* gsrc = grad_padded.data() + (b * id.c + ic) * l.volume() + v0;
          const Real* w = weight.data() + (oc * id.c + ic) * taps;
          Real* gw = grads.weight.data() + (oc * id.c + ic) * taps;
          for (std::size_t t = 0; t < taps; ++t) {
            const Real wv = w[t];
            Real* d = gsrc + offsets[t];
            for (std::size_t v = 0; v < len; ++v) d[v] += wv * gv[v];
            gw[t] += dot(gv, src + offsets[t], len);
          }
        }
      }
    }
  for (std::size_t b = 0; b < id.n; ++b)
    for (std::size_t ic = 0; ic < id.c; ++ic) {
      const Real* src = grad_padded.data() + (b * id.c + ic) * l.volume();
      Real* dst = grads.input.channel(b, ic);
      for (std::size_t z = 0; z < id.z; ++z)
        for (std::size_t y = 0; y < id.y; ++y)
          std::copy_n(src + l.embed(g.padding, y + g.padding, z + g.padding), id.x,
                      dst + id.x * (y + id.y * z));
    }
  return grads;
}

}  // namespace

std::size_t conv_extent(std::size_t n, const ConvGeometry& g) {
  return (n + 2 * g.padding - g.kernel) / g.stride + 1;
}

Tensor conv3d_forward(const Tensor& input, const Tensor& weight, std::span<const Real> bias,
                      const ConvGeometry& g) {
  const Dims5 od = conv_output_dims(input, weight, g);
  if (!bias.empty() && bias.size() != od.c) fail(Errc::ShapeMismatch, "conv bias length");
  if (g.stride == 1) return conv_forward_unit_stride(input, weight, bias, g, od);
  const Dims5& id = input.dims();
  const std::size_t taps = g.kernel * g.kernel * g.kernel;
  const std::size_t s = g.stride;
  Tensor out(od);
  for (std::size_t b = 0; b < od.n; ++b) {
    for (std::size_t oc = 0; oc < od.c; ++oc) {
      Real* dst = out.channel(b, oc);
      if (!bias.empty()) std::fill(dst, dst + od.spatial(), bias[oc]);
      for (std::size_t ic = 0; ic < id.c; ++ic) {
        const Real* src = input.channel(b, ic);
        const Real* w = weight.data() + (oc * id.c + ic) * taps;
        for_each_tap_row(id, od, g, [&](std::size_t tap, std::size_t orow, std::size_t irow,
                                        Range rx, std::size_t kx) {
          const Real wv = w[tap];
          Real* o = dst + orow;
          const Real* i = src + irow;
          const auto shift = static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(g.padding);
          for (std::size_t ox = rx.lo; ox < rx.hi; ++ox)
            o[ox] += wv * i[static_cast<std::ptrdiff_t>(ox * s) + shift];
        });
      }
    }
  }
  return out;
}

ConvGrads conv3d_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out,
                          const ConvGeometry& g, bool with_bias) {
  const Dims5 od = conv_output_dims(input, weight, g);
  if (grad_out.dims() != od) fail(Errc::ShapeMismatch, "conv grad_out dims");
  const Dims5& id = input.dims();
  const std::size_t taps = g.kernel * g.kernel * g.kernel;
  const std::size_t s = g.stride;
  ConvGrads grads;
  if (s == 1) {
    grads = conv_backward_unit_stride(input, weight, grad_out, g, od);
  } else {
    grads = ConvGrads{Tensor(id), Tensor(weight.dims()), {}};
    for (std::size_t b = 0; b < od.n; ++b) {
      for (std::size_t oc = 0; oc < od.c; ++oc) {
        const Real* go = grad_out.channel(b, oc);
        for (std::size_t ic = 0; ic < id.c; ++ic) {
          const Real* src = input.channel(b, ic);
          Real* gi = grads.input.channel(b, ic);
          const Real* w = weight.data() + (oc * id.c + ic) * taps;
          Real* gw = grads.weight.data() + (oc * id.c + ic) * taps;
          for_each_tap_row(id, od, g, [&](std::size_t tap, std::size_t orow, std::size_t irow,
                                          Range rx, std::size_t kx) {
            const Real wv = w[tap];
            const Real* o = go + orow;
            const Real* i = src + irow;
            Real* di = gi + irow;
            const auto shift =
                static_cast<std::ptrdiff_t>(kx) - static_cast<std::ptrdiff_t>(g.padding);
            Real acc = 0;
            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * s) + shift;
              acc += o[ox] * i[ix];
              di[ix] += wv * o[ox];
            }
            gw[tap] += acc;
          });
        }
      }
    }
  }
  if (with_bias) {
    grads.bias.assign(od.c, 0);
    for (std::size_t b = 0; b < od.n; ++b)
      for (std::size_t oc = 0; oc < od.c; ++oc) {
        const Real* go = grad_out.channel(b, oc);
        for (std::size_t v = 0; v < od.spatial(); ++v) grads.bias[oc] += go[v];
      }
  }
  return grads;
}

Tensor prelu_forward(const Tensor& input, std::span<const Real> slopes) {
  const Dims5& d = input.dims();
  if (slopes.size() != d.c) fail(Errc::ShapeMismatch, "prelu needs one slope per channel");
  Tensor out(d);
  for (std::size_t b = 0; b < d.n; ++b)
    for (std::size_t c = 0; c < d.c; ++c) {
      const Real* x = input.channel(b, c);
      Real* y = out.channel(b, c);
      const Real a = slopes[c];
      for (std::size_t v = 0; v < d.spatial(); ++v) y[v] = x[v] >= 0 ? x[v] : a * x[v];
    }
  return out;
}

PReLUGrads prelu_backward(const Tensor& input, std::span<const Real> slopes,
                          const Tensor& grad_out) {
  check_same_dims(input, grad_out, "prelu grad_out");
  const Dims5& d = input.dims();
  PReLUGrads g{Tensor(d), std::vector<Real>(d.c, 0)};
  for (std::size_t b = 0; b < d.n; ++b)
    for (std::size_t c = 0; c < d.c; ++c) {
      const Real* x = input.channel(b, c);
      const Real* go = grad_out.channel(b, c);
      Real* gi = g.input.channel(b, c);
      const Real a = slopes[c];
      Real ga = 0;
      for (std::size_t v = 0; v < d.spatial(); ++v) {
        if (x[v] >= 0) {
          gi[v] = go[v];
        } else {
          gi[v] = a * go[v];
          ga += x[v] * go[v];
        }
      }
      g.slopes[c] += ga;
    }
  return g;
}

NormForward instance_norm_forward(const Tensor& input, std::span<const Real> scale,
                                  std::span<const Real> shift, Real epsilon) {
  const Dims5& d = input.dims();
  if (scale.size() != d.c || shift.size() != d.c)
    fail(Errc::ShapeMismatch, "norm needs one scale and shift per channel");
  NormForward f{Tensor(d), Tensor(d), std::vector<Real>(d.n * d.c)};
  const std::size_t m = d.spatial();
  for (std::size_t b = 0; b < d.n; ++b)
    for (std::size_t c = 0; c < d.c; ++c) {
      const Real* x = input.channel(b, c);
      Real mean = 0;
      for (std::size_t v = 0; v < m; ++v) mean += x[v];
      mean /= static_cast<Real>(m);
      Real var = 0;
      for (std::size_t v = 0; v < m; ++v) var += (x[v] - mean) * (x[v] - mean);
      var /= static_cast<Real>(m);
      const Real inv = 1.0 / std::sqrt(var + epsilon);
      f.inv_std[b * d.c + c] = inv;
      Real* xh = f.normalized.channel(b, c);
      Real* y = f.output.channel(b, c);
      for (std::size_t v = 0; v < m; ++v) {
        xh[v] = (x[v] - mean) * inv;
        y[v] = scale[c] * xh[v] + shift[c];
      }
    }
  return f;
}

NormGrads instance_norm_backward(const NormForward& fwd, std::span<const Real> scale,
                                 const Tensor& grad_out) {
  check_same_dims(fwd.output, grad_out, "norm grad_out");
  const Dims5& d = grad_out.dims();
  NormGrads g{Tensor(d), std::vector<Real>(d.c, 0), std::vector<Real>(d.c, 0)};
  const std::size_t m = d.spatial();
  const Real inv_m = 1.0 / static_cast<Real>(m);
  for (std::size_t b = 0; b < d.n; ++b)
    for (std::size_t c = 0; c < d.c; ++c) {
      const Real* go = grad_out.channel(b, c);
      const Real* xh = fwd.normalized.channel(b, c);
      Real sum_go = 0, sum_go_xh = 0;
      for (std::size_t v = 0; v < m; ++v) {
        sum_go += go[v];
        sum_go_xh += go[v] * xh[v];
      }
      g.shift[c] += sum_go;
      g.scale[c] += sum_go_xh;
      // d xhat = go * scale; dx = inv/m * (m dxhat - sum dxhat - xhat sum(dxhat xhat))
      const Real k = scale[c] * fwd.inv_std[b * d.c + c];
      const Real mean_go = sum_go * inv_m;
      const Real mean_go_xh = sum_go_xh * inv_m;
      Real* gi = g.input.channel(b, c);
      for (std::size_t v = 0; v < m; ++v) gi[v] = k * (go[v] - mean_go - xh[v] * mean_go_xh);
    }
  return g;
}

Tensor softmax_channels(const Tensor& logits) {
  const Dims5& d = logits.dims();
  Tensor out(d);
  const std::size_t m = d.spatial();
  for (std::size_t b = 0; b < d.n; ++b)
    for (std::size_t v = 0; v < m; ++v) {
      Real mx = logits.channel(b, 0)[v];
      for (std::size_t c = 1; c < d.c; ++c) mx = std::max(mx, logits.channel(b, c)[v]);
      Real sum = 0;
      for (std::size_t c = 0; c < d.c; ++c) {
        const Real e = std::exp(logits.channel(b, c)[v] - mx);
        out.channel(b, c)[v] = e;
        sum += e;
      }
      for (std::size_t c = 0; c < d.c; ++c) out.channel(b, c)[v] /= sum;
    }
  return out;
}

Tensor softmax_backward(const Tensor& probs, const Tensor& grad_probs) {
  check_same_dims(probs, grad_probs, "softmax grad");
  const Dims5& d = probs.dims();
  Tensor out(d);
  const std::size_t m = d.spatial();
  for (std::size_t b = 0; b < d.n; ++b)
    for (std::size_t v = 0; v < m; ++v) {
      Real dot = 0;
      for (std::size_t c = 0; c < d.c; ++c) dot += probs.channel(b, c)[v] * grad_probs.channel(b, c)[v];
      for (std::size_t c = 0; c < d.c; ++c)
        out.channel(b, c)[v] = probs.channel(b, c)[v] * (grad_probs.channel(b, c)[v] - dot);
    }
  return out;
}

LossResult soft_dice_loss(const Tensor& probs, const Tensor& one_hot, Real smooth) {
  check_same_dims(probs, one_hot, "dice loss target");
  const Dims5& d = probs.dims();
  if (d.c < 2) fail(Errc::ShapeMismatch, "dice loss needs a background and a foreground class");
  const std::size_t m = d.spatial();
  const Real terms = static_cast<Real>(d.n * (d.c - 1));
  LossResult r{0, Tensor(d)};
  Real dice_sum = 0;
  for (std::size_t b = 0; b < d.n; ++b)
    for (std::size_t c = 1; c < d.c; ++c) {
      const Real* p = probs.channel(b, c);
      const Real* t = one_hot.channel(b, c);
      Real inter = 0, ps = 0, ts = 0;
      for (std::size_t v = 0; v < m; ++v) {
        inter += p[v] * t[v];
        ps += p[v];
        ts += t[v];
      }
      const Real num = 2 * inter + smooth;
      const Real den = ps + ts + smooth;
      dice_sum += num / den;
      Real* gp = r.grad.channel(b, c);
      const Real den2 = den * den;
      for (std::size_t v = 0; v < m; ++v) gp[v] = -(2 * t[v] * den - num) / den2 / terms;
    }
  r.loss = 1 - dice_sum / terms;
  return r;
}

Tensor upsample_forward(const Tensor& input, std::size_t factor) {
  const Dims5& d = input.dims();
  const Dims5 od{d.n, d.c, d.x * factor, d.y * factor, d.z * factor};
  Tensor out(od);
  for (std::size_t b = 0; b < d.n; ++b)
    for (std::size_t c = 0; c < d.c; ++c) {
      const Real* src = input.channel(b, c);
      Real* dst = out.channel(b, c);
      for (std::size_t z = 0; z < od.z; ++z)
        for (std::size_t y = 0; y < od.y; ++y) {
          const Real* srow = src + d.x * (y / factor + d.y * (z / factor));
          Real* drow = dst + od.x * (y + od.y * z);
          for (std::size_t x = 0; x < od.x; ++x) drow[x] = srow[x / factor];
        }
    }
  return out;
}

Tensor upsample_backward(const Tensor& grad_out, std::size_t factor) {
  const Dims5& od = grad_out.dims();
  if (od.x % factor || od.y % factor || od.z % factor)
    fail(Errc::ShapeMismatch, "upsample grad extent not divisible by factor");
  const Dims5 d{od.n, od.c, od.x / factor, od.y / factor, od.z / factor};
  Tensor out(d);
  for (std::size_t b = 0; b < d.n; ++b)
    for (std::size_t c = 0; c < d.c; ++c) {
      const Real* src = grad_out.channel(b, c);
      Real* dst = out.channel(b, c);
      for (std::size_t z = 0; z < od.z; ++z)
        for (std::size_t y = 0; y < od.y; ++y) {
          const Real* srow = src + od.x * (y + od.y * z);
          Real* drow = dst + d.x * (y / factor + d.y * (z / factor));
          for (std::size_t x = 0; x < od.x; ++x) drow[x / factor] += srow[x];
        }
    }
  return out;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Dims5& da = a.dims();
  const Dims5& db = b.dims();
  if (da.n != db.n || da.x != db.x || da.y != db.y || da.z != db.z)
    fail(Errc::ShapeMismatch, "concat: " + to_string(da) + " vs " + to_string(db));
  Tensor out({da.n, da.c + db.c, da.x, da.y, da.z});
  const std::size_t m = da.spatial();
  for (std::size_t n = 0; n < da.n; ++n) {
    std::copy(a.channel(n, 0), a.channel(n, 0) + da.c * m, out.channel(n, 0));
    std::copy(b.channel(n, 0), b.channel(n, 0) + db.c * m, out.channel(n, da.c));
  }
  return out;
}

std::pair<Tensor, Tensor> split_channels(const Tensor& grad, std::size_t first_channels) {
  const Dims5& d = grad.dims();
  if (first_channels > d.c) fail(Errc::ShapeMismatch, "split beyond channel count");
  Tensor a({d.n, first_channels, d.x, d.y, d.z});
  Tensor b({d.n, d.c - first_channels, d.x, d.y, d.z});
  const std::size_t m = d.spatial();
  for (std::size_t n = 0; n < d.n; ++n) {
    std::copy(grad.channel(n, 0), grad.channel(n, 0) + first_channels * m, a.channel(n, 0));
    std::copy(grad.channel(n, first_channels), grad.channel(n, 0) + d.c * m, b.channel(n, 0));
  }
  return {std::move(a), std::move(b)};
}

}  // namespace volseg::microseg
