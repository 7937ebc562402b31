#include "condflow/flows/nlsq.hpp"

#include <algorithm>
#include <cstdint>
#include <string>

#include "condflow/errors.hpp"

namespace condflow::flows {
namespace {

double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

void check_sizes(std::size_t a, std::size_t b, const char* op) {
    if (a != b) throw ShapeError(std::string(op) + ": coefficient count does not match input");
}

}  // namespace

NlsqCoeffs constrain_coeffs(std::span<const double> raw) {
    if (raw.size() != 5) throw ShapeError("constrain_coeffs: expected 5 raw values");
    for (double r : raw)
        if (!std::isfinite(r)) throw DomainError("constrain_coeffs: non-finite raw coefficient");
    NlsqCoeffs k;
    k.a = raw[0];
    k.b = std::exp(raw[1]);
    k.d = softplus(raw[3]) + kMinSharpness;
    k.g = raw[4];
    k.c = kBoundSafety * kMonotoneBound * (k.b / k.d) * std::tanh(raw[2]);
    return k;
}

void check_invertible(const NlsqCoeffs& k) {
    if (!(k.b > 0.0) || !(k.d > 0.0) || !std::isfinite(k.a) || !std::isfinite(k.g) ||
        !(std::abs(k.c) < kMonotoneBound * k.b / k.d)) {
        throw InvertibilityError("nlsq: coefficients violate monotonicity (b=" + std::to_string(k.b) +
                                 ", c=" + std::to_string(k.c) + ", d=" + std::to_string(k.d) + ")");
    }
}

double nlsq_map(double z, const NlsqCoeffs& k) {
    const double u = k.d * z + k.g;
    return k.a + k.b * z + k.c / (1.0 + u * u);
}

double nlsq_derivative(double z, const NlsqCoeffs& k) {
    const double u = k.d * z + k.g;
    const double q = 1.0 + u * u;
    return k.b - 2.0 * k.c * k.d * u / (q * q);
}

InverseResult nlsq_inverse(std::span<const double> z, std::span<const NlsqCoeffs> coeffs) {
    check_sizes(z.size(), coeffs.size(), "nlsq_inverse");
    InverseResult r;
    r.eps.resize(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) {
        check_invertible(coeffs[j]);
        r.eps[j] = nlsq_map(z[j], coeffs[j]);
        const double slope = nlsq_derivative(z[j], coeffs[j]);
        if (!(slope > 0.0)) throw InvertibilityError("nlsq_inverse: non-positive derivative");
        r.logdet += std::log(slope);
    }
    return r;
}

double nlsq_solve(double v, const NlsqCoeffs& k) {
    check_invertible(k);
    const double w = v - k.a;
    const double g2 = k.g * k.g + 1.0;
    const double lead = -k.b * k.d * k.d;
    const double p2 = (w * k.d * k.d - 2.0 * k.d * k.g * k.b) / lead;
    const double p1 = (2.0 * k.d * k.g * w - k.b * g2) / lead;
    const double p0 = (w * g2 - k.c) / lead;

    // u = t - p2/3 turns it into t^3 + P t + Q = 0.
    const double P = p1 - p2 * p2 / 3.0;
    const double Q = 2.0 * p2 * p2 * p2 / 27.0 - p2 * p1 / 3.0 + p0;
    double disc = (Q / 2.0) * (Q / 2.0) + (P / 3.0) * (P / 3.0) * (P / 3.0);
    const double scale = (Q / 2.0) * (Q / 2.0) + std::abs(P / 3.0) * (P / 3.0) * (P / 3.0);
    if (disc < 0.0) {
        // A strictly monotone map has one simple real root, so a clearly
        // negative discriminant means the coefficients are inadmissible.
        if (disc < -1e-9 * scale) throw InvertibilityError("nlsq_solve: cubic has three real roots");
        disc = 0.0;
    }
    const double big = -Q / 2.0 - std::copysign(std::sqrt(disc), Q);
    const double s = std::cbrt(big);
    const double t = s != 0.0 ? s - P / (3.0 * s) : 0.0;
    double u = t - p2 / 3.0;

    // Root is bracketed because the bump term is bounded by |c|.
    double lo = (w - std::abs(k.c)) / k.b;
    double hi = (w + std::abs(k.c)) / k.b;
    if (!std::isfinite(u) || u < lo || u > hi) u = 0.5 * (lo + hi);
    for (int it = 0; it < 100; ++it) {
        const double f = nlsq_map(u, k) - v;
        if (f == 0.0) break;
        if (f > 0.0)
            hi = std::min(hi, u);
        else
            lo = std::max(lo, u);
        const double step = f / nlsq_derivative(u, k);
        double next = u - step;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        const double moved = std::abs(next - u);
        u = next;
        if (it >= 1 && moved <= 1e-15 * (1.0 + std::abs(u))) break;
        if (hi - lo <= 1e-15 * (1.0 + std::abs(u))) break;
    }
    return u;
}

std::vector<double> nlsq_forward(std::span<const double> eps, std::span<const NlsqCoeffs> coeffs) {
    check_sizes(eps.size(), coeffs.size(), "nlsq_forward");
    std::vector<double> z(eps.size());
    for (std::size_t j = 0; j < eps.size(); ++j) z[j] = nlsq_solve(eps[j], coeffs[j]);
    return z;
}

namespace serial {
void nlsq_forward_batch(std::span<const double> eps, std::span<const NlsqCoeffs> coeffs,
                        std::span<double> out) {
    check_sizes(eps.size(), coeffs.size(), "nlsq_forward_batch");
    check_sizes(eps.size(), out.size(), "nlsq_forward_batch");
    for (std::size_t i = 0; i < eps.size(); ++i) out[i] = nlsq_solve(eps[i], coeffs[i]);
}
}  // namespace serial

namespace omp {
void nlsq_forward_batch(std::span<const double> eps, std::span<const NlsqCoeffs> coeffs,
                        std::span<double> out) {
    check_sizes(eps.size(), coeffs.size(), "nlsq_forward_batch");
    check_sizes(eps.size(), out.size(), "nlsq_forward_batch");
    const auto n = static_cast<std::int64_t>(eps.size());
    // Exceptions cannot cross the parallel region; record and rethrow.
    bool failed = false;
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        try {
            out[static_cast<std::size_t>(i)] =
                nlsq_solve(eps[static_cast<std::size_t>(i)], coeffs[static_cast<std::size_t>(i)]);
        } catch (...) {
#pragma omp atomic write
            failed = true;
        }
    }
    if (failed) throw InvertibilityError("nlsq_forward_batch: inadmissible coefficients");
}
}  // namespace omp

AffineResult affine_inverse(std::span<const double> z, std::span<const double> shift,
                            std::span<const double> log_scale) {
    check_sizes(z.size(), shift.size(), "affine_inverse");
    check_sizes(z.size(), log_scale.size(), "affine_inverse");
    AffineResult r;
    r.out.resize(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) {
        if (!std::isfinite(log_scale[j])) throw DomainError("affine: non-finite log scale");
        r.out[j] = shift[j] + std::exp(log_scale[j]) * z[j];
        r.logdet += log_scale[j];
    }
    return r;
}

std::vector<double> affine_forward(std::span<const double> eps, std::span<const double> shift,
                                   std::span<const double> log_scale) {
    check_sizes(eps.size(), shift.size(), "affine_forward");
    check_sizes(eps.size(), log_scale.size(), "affine_forward");
    std::vector<double> z(eps.size());
    for (std::size_t j = 0; j < eps.size(); ++j) {
        if (!std::isfinite(log_scale[j])) throw DomainError("affine: non-finite log scale");
        z[j] = (eps[j] - shift[j]) * std::exp(-log_scale[j]);
    }
    return z;
}

}  // namespace condflow::flows
