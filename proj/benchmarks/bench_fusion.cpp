// Microbenchmarks for the fusion forward and backward passes at the
// default configuration, plus the static-fusion baseline for scale.
#include <benchmark/benchmark.h>

#include <adafuse/fusion.hpp>
#include <adafuse/numerics.hpp>
#include <adafuse/rng.hpp>

namespace {

using namespace adafuse;

Vector random_unit(Rng& rng, std::size_t d) {
  Vector v(d);
  for (std::size_t i = 0; i < d; ++i) v[i] = real(rng.gaussian());
  return l2_normalize(v);
}

void bench_fuse_forward(benchmark::State& state) {
  FusionConfig config;
  FusionParams params = init_params(config, 7);
  Rng rng(11);
  Vector z_t = random_unit(rng, config.d);
  Vector z_d = random_unit(rng, config.d);
  for (auto _ : state) {
    ForwardResult r = fuse_forward(params, z_t, z_d);
    benchmark::DoNotOptimize(r.z_final.data());
  }
}
BENCHMARK(bench_fuse_forward);

void bench_fuse_backward(benchmark::State& state) {
  FusionConfig config;
  FusionParams params = init_params(config, 7);
  Rng rng(11);
  Vector z_t = random_unit(rng, config.d);
  Vector z_d = random_unit(rng, config.d);
  Vector grad = random_unit(rng, config.d);
  ForwardResult fw = fuse_forward(params, z_t, z_d);
  for (auto _ : state) {
    BackwardResult bw = fuse_backward(params, fw.acts, z_t, z_d, grad);
    benchmark::DoNotOptimize(bw.grads.out_b.data());
  }
}
BENCHMARK(bench_fuse_backward);

void bench_static_fusion(benchmark::State& state) {
  Rng rng(11);
  Vector z_t = random_unit(rng, 64);
  Vector z_d = random_unit(rng, 64);
  for (auto _ : state) {
    Vector z = static_fusion(z_t, z_d, real(0.55));
    benchmark::DoNotOptimize(z.data());
  }
}
BENCHMARK(bench_static_fusion);

} // namespace

BENCHMARK_MAIN();
