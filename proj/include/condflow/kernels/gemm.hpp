#pragma once

#include <cstddef>
#include <span>

// Dense row-major matrix products. Two implementations share one contract:
//   C[m x n] (+)= op(A) * op(B),  op(A) is m x k, op(B) is k x n.
// A is stored k x m when trans_a is set, B is stored n x k when trans_b is set.
// Both implementations sum every output element in the same order, so their
// results are bit-identical; the OpenMP one only splits rows across threads.
namespace condflow::kernels {

struct GemmArgs {
    bool trans_a = false;
    bool trans_b = false;
    std::size_t m = 0;
    std::size_t n = 0;
    std::size_t k = 0;
    bool accumulate = false;
};

namespace serial {
void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c);
}  // namespace serial

namespace omp {
void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c);
}  // namespace omp

// Picks the OpenMP path once the product is large enough to amortize the
// parallel region.
void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c);

inline constexpr std::size_t kParallelGemmFlops = 1u << 16;

}  // namespace condflow::kernels
