#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "kbdial/kernels.hpp"

namespace {

using Gemm = void (*)(std::size_t, std::size_t, std::size_t, const double*, const double*, double*);

// Square n x n x n product; n = 200 matches the default hidden size.
template <Gemm G>
void run(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> a(n * n), b(n * n), c(n * n);
  for (auto& x : a) x = u(rng);
  for (auto& x : b) x = u(rng);
  for (auto _ : state) {
    G(n, n, n, a.data(), b.data(), c.data());
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

}  // namespace

using namespace kbdial::kernels;
BENCHMARK(run<reference::gemm_nn>)->Name("reference/gemm_nn")->Arg(32)->Arg(64)->Arg(200);
BENCHMARK(run<gemm_nn>)->Name("openmp/gemm_nn")->Arg(32)->Arg(64)->Arg(200);
BENCHMARK(run<reference::gemm_nt>)->Name("reference/gemm_nt")->Arg(32)->Arg(64)->Arg(200);
BENCHMARK(run<gemm_nt>)->Name("openmp/gemm_nt")->Arg(32)->Arg(64)->Arg(200);
BENCHMARK(run<reference::gemm_tn>)->Name("reference/gemm_tn")->Arg(32)->Arg(64)->Arg(200);
BENCHMARK(run<gemm_tn>)->Name("openmp/gemm_tn")->Arg(32)->Arg(64)->Arg(200);

BENCHMARK_MAIN();
