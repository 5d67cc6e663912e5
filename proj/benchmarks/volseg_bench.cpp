#include <benchmark/benchmark.h>

#include <random>

#include "volseg/metrics.hpp"
#include "volseg/microseg/ops.hpp"
#include "volseg/microseg/synthetic.hpp"
#include "volseg/nifti.hpp"
#include "volseg/patch_sampler.hpp"
#include "volseg/resample.hpp"

using namespace volseg;
namespace ms = volseg::microseg;

namespace {

ms::Tensor noise(ms::Dims5 d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  ms::Tensor t(d);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

const LabeledVolume& phantom() {
  static const LabeledVolume p = ms::make_phantom(1);
  return p;
}

}  // namespace

static void BM_Conv3dForward(benchmark::State& state) {
  const std::size_t c = state.range(0), n = state.range(1);
  const ms::Tensor x = noise({1, c, n, n, n / 2}, 1);
  const ms::Tensor w = noise({c, c, 3, 3, 3}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ms::conv3d_forward(x, w, {}, {}));
  state.SetItemsProcessed(state.iterations() * x.size() * c * 27);
}
BENCHMARK(BM_Conv3dForward)->Args({8, 32})->Args({16, 16})->Unit(benchmark::kMillisecond);

static void BM_Conv3dBackward(benchmark::State& state) {
  const std::size_t c = state.range(0), n = state.range(1);
  const ms::Tensor x = noise({1, c, n, n, n / 2}, 1);
  const ms::Tensor w = noise({c, c, 3, 3, 3}, 2);
  const ms::Tensor g = noise(x.dims(), 3);
  for (auto _ : state) benchmark::DoNotOptimize(ms::conv3d_backward(x, w, g, {}, false));
}
BENCHMARK(BM_Conv3dBackward)->Args({8, 32})->Unit(benchmark::kMillisecond);

static void BM_ResampleToSpacing(benchmark::State& state) {
  const Volume& v = phantom().image;
  for (auto _ : state) benchmark::DoNotOptimize(resample_to_spacing(v, {1.62, 1.62, 3.22}));
}
BENCHMARK(BM_ResampleToSpacing)->Unit(benchmark::kMillisecond);

static void BM_ResizeTo128(benchmark::State& state) {
  const Volume& v = phantom().image;
  for (auto _ : state) benchmark::DoNotOptimize(resize_to_shape(v, {128, 128, 32}));
}
BENCHMARK(BM_ResizeTo128)->Unit(benchmark::kMillisecond);

static void BM_DiceCase(benchmark::State& state) {
  const LabelVolume& gt = phantom().label;
  LabelVolume pred = gt;
  for (std::size_t i = 0; i < pred.data.size(); i += 17) pred.data[i] = 1;
  for (auto _ : state) benchmark::DoNotOptimize(dice_case(pred, gt));
  state.SetItemsProcessed(state.iterations() * gt.data.size());
}
BENCHMARK(BM_DiceCase);

static void BM_SamplePatches(benchmark::State& state) {
  PatchSamplerConfig cfg;
  cfg.patch_size = {32, 32, 16};
  for (auto _ : state) {
    benchmark::DoNotOptimize(sample_patches(phantom().image, phantom().label, cfg));
    ++cfg.seed;
  }
}
BENCHMARK(BM_SamplePatches)->Unit(benchmark::kMicrosecond);

static void BM_NiftiReadGzip(benchmark::State& state) {
  const auto bytes = nifti::write_image(phantom().image, {nifti::Datatype::Float32, true});
  for (auto _ : state) benchmark::DoNotOptimize(nifti::read_image(bytes));
  state.SetBytesProcessed(state.iterations() * phantom().image.data.size() * 4);
}
BENCHMARK(BM_NiftiReadGzip)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
