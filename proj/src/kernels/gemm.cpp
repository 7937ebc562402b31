#include "condflow/kernels/gemm.hpp"

#include <algorithm>
#include <cstdint>

#include "condflow/errors.hpp"

namespace condflow::kernels {
namespace {

void check_sizes(const GemmArgs& g, std::size_t a, std::size_t b, std::size_t c) {
    if (a < g.m * g.k || b < g.k * g.n || c < g.m * g.n) {
        throw ShapeError("gemm: buffer too small for requested product");
    }
}

// One output row. Shared by both implementations so the floating-point
// summation order is identical.
inline void gemm_row(const GemmArgs& g, const double* a, const double* b, double* c,
                     std::size_t i) {
    double* crow = c + i * g.n;
    if (!g.accumulate) std::fill(crow, crow + g.n, 0.0);
    if (!g.trans_b) {
        for (std::size_t p = 0; p < g.k; ++p) {
            const double aip = g.trans_a ? a[p * g.m + i] : a[i * g.k + p];
            const double* brow = b + p * g.n;
            for (std::size_t j = 0; j < g.n; ++j) crow[j] += aip * brow[j];
        }
    } else {
        for (std::size_t j = 0; j < g.n; ++j) {
            const double* brow = b + j * g.k;
            double acc = 0.0;
            if (!g.trans_a) {
                const double* arow = a + i * g.k;
                for (std::size_t p = 0; p < g.k; ++p) acc += arow[p] * brow[p];
            } else {
                for (std::size_t p = 0; p < g.k; ++p) acc += a[p * g.m + i] * brow[p];
            }
            crow[j] += acc;
        }
    }
}

}  // namespace

namespace serial {
void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c) {
    check_sizes(args, a.size(), b.size(), c.size());
    for (std::size_t i = 0; i < args.m; ++i) gemm_row(args, a.data(), b.data(), c.data(), i);
}
}  // namespace serial

namespace omp {
void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c) {
    check_sizes(args, a.size(), b.size(), c.size());
    const auto rows = static_cast<std::int64_t>(args.m);
    const double* ap = a.data();
    const double* bp = b.data();
    double* cp = c.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < rows; ++i) gemm_row(args, ap, bp, cp, static_cast<std::size_t>(i));
}
}  // namespace omp

void gemm(const GemmArgs& args, std::span<const double> a, std::span<const double> b,
          std::span<double> c) {
    if (args.m > 1 && args.m * args.n * args.k >= kParallelGemmFlops) {
        omp::gemm(args, a, b, c);
    } else {
        serial::gemm(args, a, b, c);
    }
}

}  // namespace condflow::kernels
