#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "condflow/kernels/gemm.hpp"

using namespace condflow::kernels;

namespace {

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

// Textbook triple loop, independent of the kernel's loop order.
std::vector<double> naive(const GemmArgs& g, const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> c(g.m * g.n, 0.0);
    for (std::size_t i = 0; i < g.m; ++i)
        for (std::size_t j = 0; j < g.n; ++j)
            for (std::size_t p = 0; p < g.k; ++p) {
                const double av = g.trans_a ? a[p * g.m + i] : a[i * g.k + p];
                const double bv = g.trans_b ? b[j * g.k + p] : b[p * g.n + j];
                c[i * g.n + j] += av * bv;
            }
    return c;
}

}  // namespace

TEST(Gemm, SerialMatchesNaiveForAllTransposes) {
    std::mt19937_64 rng(2);
    for (bool ta : {false, true}) {
        for (bool tb : {false, true}) {
            const GemmArgs g{ta, tb, 7, 5, 9, false};
            const auto a = random_values(g.m * g.k, rng);
            const auto b = random_values(g.k * g.n, rng);
            std::vector<double> c(g.m * g.n);
            serial::gemm(g, a, b, c);
            const auto ref = naive(g, a, b);
            for (std::size_t i = 0; i < c.size(); ++i) EXPECT_NEAR(c[i], ref[i], 1e-12);
        }
    }
}

TEST(Gemm, OpenMpBitIdenticalToSerial) {
    std::mt19937_64 rng(4);
    for (bool ta : {false, true}) {
        for (bool tb : {false, true}) {
            const GemmArgs g{ta, tb, 97, 64, 131, true};
            const auto a = random_values(g.m * g.k, rng);
            const auto b = random_values(g.k * g.n, rng);
            auto c1 = random_values(g.m * g.n, rng);
            auto c2 = c1;
            serial::gemm(g, a, b, c1);
            omp::gemm(g, a, b, c2);
            EXPECT_EQ(c1, c2);
        }
    }
}

TEST(Gemm, EmptyInnerDimensionGivesZeros) {
    const GemmArgs g{false, false, 3, 2, 0, false};
    std::vector<double> c(6, 5.0);
    serial::gemm(g, {}, {}, c);
    for (double v : c) EXPECT_EQ(v, 0.0);
}
