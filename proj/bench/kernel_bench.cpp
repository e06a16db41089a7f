// Serial reference kernels against their OpenMP counterparts.
// Run with OMP_NUM_THREADS=N to set the parallel thread count.

#include <benchmark/benchmark.h>

#include "nora/kernels.hpp"
#include "nora/rng.hpp"

namespace k = nora::kernels;

namespace {

template <typename T>
struct Inputs {
  nora::BasicMatrix<T> x, w, out;
  Inputs(std::size_t r, std::size_t c) : x(r, c), w(r, c), out(r, c) {
    nora::Rng rng(r * 1000003 + c);
    x = nora::random_normal(r, c, rng).cast<T>();
    w = nora::random_normal(r, c, rng).cast<T>();
  }
};

template <typename T, bool Parallel>
void BM_RowNormalize(benchmark::State& state) {
  Inputs<T> in(state.range(0), state.range(1));
  for (auto _ : state) {
    if constexpr (Parallel) k::parallel::row_normalize(in.x, T{0}, in.out);
    else k::serial::row_normalize(in.x, T{0}, in.out);
    benchmark::DoNotOptimize(in.out.data().data());
  }
  state.SetBytesProcessed(state.iterations() * 2 * in.x.size() * sizeof(T));
}

template <typename T, bool Parallel>
void BM_RowPerpProject(benchmark::State& state) {
  Inputs<T> in(state.range(0), state.range(1));
  for (auto _ : state) {
    if constexpr (Parallel) k::parallel::row_perp_project(in.x, in.w, in.out);
    else k::serial::row_perp_project(in.x, in.w, in.out);
    benchmark::DoNotOptimize(in.out.data().data());
  }
  state.SetBytesProcessed(state.iterations() * 3 * in.x.size() * sizeof(T));
}

template <typename T, bool Parallel>
void BM_Norm12(benchmark::State& state) {
  Inputs<T> in(state.range(0), state.range(1));
  for (auto _ : state) {
    T v;
    if constexpr (Parallel) v = k::parallel::norm_12(in.x);
    else v = k::serial::norm_12(in.x);
    benchmark::DoNotOptimize(v);
  }
  state.SetBytesProcessed(state.iterations() * in.x.size() * sizeof(T));
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({512, 512})->Args({1376, 512})->Args({2048, 2048})->Args({5461, 2048});
}

}  // namespace

BENCHMARK(BM_RowNormalize<float, false>)->Apply(shapes);
BENCHMARK(BM_RowNormalize<float, true>)->Apply(shapes);
BENCHMARK(BM_RowNormalize<double, false>)->Apply(shapes);
BENCHMARK(BM_RowNormalize<double, true>)->Apply(shapes);
BENCHMARK(BM_RowPerpProject<float, false>)->Apply(shapes);
BENCHMARK(BM_RowPerpProject<float, true>)->Apply(shapes);
BENCHMARK(BM_RowPerpProject<double, false>)->Apply(shapes);
BENCHMARK(BM_RowPerpProject<double, true>)->Apply(shapes);
BENCHMARK(BM_Norm12<double, false>)->Apply(shapes);
BENCHMARK(BM_Norm12<double, true>)->Apply(shapes);

BENCHMARK_MAIN();
