#include <benchmark/benchmark.h>

#include <random>

#include "freqdoc/dct.hpp"
#include "freqdoc/encoder.hpp"
#include "freqdoc/frequency_cube.hpp"
#include "freqdoc/synthetic.hpp"

using namespace freqdoc;

namespace {

RgbImage page(int side) { return resize_and_pad(synthetic_document(side * 3 / 4, side, 1), side).canvas; }

EncoderConfig toy() {
  EncoderConfig cfg;
  cfg.embed_dim = 8;
  cfg.heads = {2, 4, 8, 16};
  return cfg;
}

}  // namespace

static void BM_ForwardDctBlock(benchmark::State& state) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> dist(0.0, 255.0);
  std::array<double, 64> px{};
  for (double& v : px) v = dist(gen);
  for (auto _ : state) benchmark::DoNotOptimize(forward_dct_block(px));
}
BENCHMARK(BM_ForwardDctBlock);

static void BM_InverseDctBlock(benchmark::State& state) {
  std::array<double, 64> px{};
  px.fill(77.0);
  const DctBlock X = forward_dct_block(px);
  for (auto _ : state) benchmark::DoNotOptimize(inverse_dct_block(X));
}
BENCHMARK(BM_InverseDctBlock);

static void BM_CanvasToCube(benchmark::State& state) {
  const RgbImage canvas = page(static_cast<int>(state.range(0)));
  const QuantTables tables = build_quant_tables(50);
  for (auto _ : state) benchmark::DoNotOptimize(canvas_to_cube(canvas, tables, CubeMode::kDequantized));
}
BENCHMARK(BM_CanvasToCube)->Arg(640)->Arg(1280)->Arg(2560)->Unit(benchmark::kMillisecond);

static void BM_RgbFlatten(benchmark::State& state) {
  const RgbImage canvas = page(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(rgb_flatten_cube(canvas));
}
BENCHMARK(BM_RgbFlatten)->Arg(1280)->Arg(2560)->Unit(benchmark::kMillisecond);

static void BM_Adapter(benchmark::State& state) {
  const Tensor cube({192, 320, 320}, 0.5f);
  const AdapterWeights w = AdapterWeights::init(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(adapter_project(cube, w));
}
BENCHMARK(BM_Adapter)->Arg(8)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_EncoderToy(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const EncoderConfig cfg = toy();
  const ParamSet<float> params = init_params(cfg).cast<float>();
  const Tensor features({8, static_cast<std::uint32_t>(side), static_cast<std::uint32_t>(side)}, 0.1f);
  for (auto _ : state) benchmark::DoNotOptimize(encode(features, params, cfg));
}
BENCHMARK(BM_EncoderToy)->Arg(80)->Arg(160)->Arg(320)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
