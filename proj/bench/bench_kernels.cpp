#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "condflow/flows/nlsq.hpp"
#include "condflow/kernels/gemm.hpp"

namespace {

std::vector<double> random_values(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const condflow::kernels::GemmArgs g{false, false, n, n, n, false};
    const auto a = random_values(n * n, 1);
    const auto b = random_values(n * n, 2);
    std::vector<double> c(n * n);
    for (auto _ : state) {
        if constexpr (Parallel)
            condflow::kernels::omp::gemm(g, a, b, c);
        else
            condflow::kernels::serial::gemm(g, a, b, c);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

template <bool Parallel>
void BM_NlsqForward(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const auto eps = random_values(n, 3);
    const auto raw = random_values(5 * n, 4);
    std::vector<condflow::flows::NlsqCoeffs> coeffs(n);
    for (std::size_t i = 0; i < n; ++i)
        coeffs[i] = condflow::flows::constrain_coeffs(std::span<const double>(raw.data() + 5 * i, 5));
    std::vector<double> out(n);
    for (auto _ : state) {
        if constexpr (Parallel)
            condflow::flows::omp::nlsq_forward_batch(eps, coeffs, out);
        else
            condflow::flows::serial::nlsq_forward_batch(eps, coeffs, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

}  // namespace

BENCHMARK(BM_Gemm<false>)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_Gemm<true>)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(BM_NlsqForward<false>)->Arg(1 << 12)->Arg(1 << 16);
BENCHMARK(BM_NlsqForward<true>)->Arg(1 << 12)->Arg(1 << 16);

BENCHMARK_MAIN();
