// Serial reference kernels against the OpenMP kernels at layer-sized shapes.
// Thread count follows OMP_NUM_THREADS.
#include <benchmark/benchmark.h>

#include <vector>

#include "styleforge/kernels.hpp"
#include "styleforge/rng.hpp"

namespace {

using styleforge::real;
namespace k = styleforge::kernels;

std::vector<real> random_buffer(std::size_t n, std::uint64_t seed) {
  styleforge::Rng rng(seed);
  std::vector<real> v(n);
  for (auto& x : v) x = static_cast<real>(rng.normal());
  return v;
}

// {channels, side, kernel, stride, pad}: content stem, downsampling, residual.
k::ConvGeometry geometry(const benchmark::State& state) {
  return {static_cast<int>(state.range(0)), static_cast<int>(state.range(1)), static_cast<int>(state.range(1)),
          static_cast<int>(state.range(2)), static_cast<int>(state.range(3)), static_cast<int>(state.range(4))};
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({3, 64, 7, 1, 3})->Args({32, 64, 4, 2, 1})->Args({128, 16, 3, 1, 1});
}

template <bool Parallel>
void BM_im2col(benchmark::State& state) {
  const k::ConvGeometry g = geometry(state);
  const auto image = random_buffer(static_cast<std::size_t>(g.channels) * g.height * g.width, 1);
  std::vector<real> cols(static_cast<std::size_t>(g.patch_size()) * g.out_height() * g.out_width());
  for (auto _ : state) {
    Parallel ? k::im2col(image.data(), g, cols.data()) : k::serial::im2col(image.data(), g, cols.data());
    benchmark::DoNotOptimize(cols.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * cols.size() * sizeof(real)));
}

template <bool Parallel>
void BM_col2im(benchmark::State& state) {
  const k::ConvGeometry g = geometry(state);
  const auto cols = random_buffer(static_cast<std::size_t>(g.patch_size()) * g.out_height() * g.out_width(), 2);
  std::vector<real> image(static_cast<std::size_t>(g.channels) * g.height * g.width);
  for (auto _ : state) {
    Parallel ? k::col2im(cols.data(), g, image.data()) : k::serial::col2im(cols.data(), g, image.data());
    benchmark::DoNotOptimize(image.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * cols.size() * sizeof(real)));
}

// {m, n, k}: conv forward GEMMs of the stem, a downsampling layer and a residual block.
template <bool Parallel>
void BM_gemm(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0)), n = static_cast<int>(state.range(1)),
            kk = static_cast<int>(state.range(2));
  const auto a = random_buffer(static_cast<std::size_t>(m) * kk, 3);
  const auto b = random_buffer(static_cast<std::size_t>(kk) * n, 4);
  std::vector<real> c(static_cast<std::size_t>(m) * n);
  for (auto _ : state) {
    Parallel ? k::gemm(false, false, m, n, kk, 1, a.data(), b.data(), 0, c.data())
             : k::serial::gemm(false, false, m, n, kk, 1, a.data(), b.data(), 0, c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(state.iterations() * 2 * static_cast<std::int64_t>(m) * n * kk);
}

void gemm_args(benchmark::internal::Benchmark* b) {
  b->Args({32, 4096, 147})->Args({64, 1024, 512})->Args({128, 256, 1152});
}

// {planes, plane size}: instance norm over a batch of feature maps.
template <bool Parallel>
void BM_normalize(benchmark::State& state) {
  const int planes = static_cast<int>(state.range(0)), size = static_cast<int>(state.range(1));
  const auto x = random_buffer(static_cast<std::size_t>(planes) * size, 5);
  std::vector<real> out(x.size()), inv_std(static_cast<std::size_t>(planes));
  for (auto _ : state) {
    Parallel ? k::normalize_planes(x.data(), planes, size, real(1e-5), out.data(), inv_std.data())
             : k::serial::normalize_planes(x.data(), planes, size, real(1e-5), out.data(), inv_std.data());
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * x.size() * sizeof(real)));
}

void normalize_args(benchmark::internal::Benchmark* b) { b->Args({8 * 32, 64 * 64})->Args({8 * 128, 16 * 16}); }

}  // namespace

BENCHMARK(BM_im2col<false>)->Name("im2col/serial")->Apply(conv_args);
BENCHMARK(BM_im2col<true>)->Name("im2col/omp")->Apply(conv_args);
BENCHMARK(BM_col2im<false>)->Name("col2im/serial")->Apply(conv_args);
BENCHMARK(BM_col2im<true>)->Name("col2im/omp")->Apply(conv_args);
BENCHMARK(BM_gemm<false>)->Name("gemm/serial")->Apply(gemm_args);
BENCHMARK(BM_gemm<true>)->Name("gemm/omp")->Apply(gemm_args);
BENCHMARK(BM_normalize<false>)->Name("normalize/serial")->Apply(normalize_args);
BENCHMARK(BM_normalize<true>)->Name("normalize/omp")->Apply(normalize_args);

BENCHMARK_MAIN();
