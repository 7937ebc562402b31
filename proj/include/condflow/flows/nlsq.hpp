#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

// Scalar non-linear squared (NLSq) transform, one tuple of coefficients per
// transformed dimension:
//
//   eps = a + b*z + c / (1 + (d*z + g)^2)
//
// The closed form maps the latent side z to the base side eps. Going from eps
// back to z means solving a cubic, which has a single real root as long as the
// map is strictly increasing:  b > 0, d > 0, |c| < (8*sqrt(3)/9) * b / d.
namespace condflow::flows {

struct NlsqCoeffs {
    double a = 0.0;
    double b = 1.0;
    double c = 0.0;
    double d = 1.0;
    double g = 0.0;
};

// 8*sqrt(3)/9: |c| must stay below this times b/d.
inline constexpr double kMonotoneBound = 8.0 * std::numbers::sqrt3 / 9.0;
inline constexpr double kBoundSafety = 0.95;
inline constexpr double kMinSharpness = 0.01;

// a = r0, b = exp(r1), d = softplus(r3) + 0.01, g = r4,
// c = 0.95 * (8*sqrt(3)/9) * (b/d) * tanh(r2).
// DomainError on non-finite input.
NlsqCoeffs constrain_coeffs(std::span<const double> raw);

// InvertibilityError unless b > 0, d > 0 and |c| is strictly inside the bound.
void check_invertible(const NlsqCoeffs& k);

// Closed-form z -> eps for one dimension.
double nlsq_map(double z, const NlsqCoeffs& k);
// d eps / d z; strictly positive for admissible coefficients.
double nlsq_derivative(double z, const NlsqCoeffs& k);

struct InverseResult {
    std::vector<double> eps;
    double logdet = 0.0;  // sum of log |d eps / d z|
};

// Applies nlsq_map per dimension. coeffs.size() must equal z.size().
InverseResult nlsq_inverse(std::span<const double> z, std::span<const NlsqCoeffs> coeffs);

// Real root u of
//   -b d^2 u^3 + ((v-a) d^2 - 2 d g b) u^2 + (2 d g (v-a) - b (g^2+1)) u
//   + ((v-a)(g^2+1) - c) = 0
// via Cardano on the depressed cubic, polished by bracketed Newton on the
// monotone map. Throws InvertibilityError when the discriminant reports three
// real roots.
double nlsq_solve(double v, const NlsqCoeffs& k);

// eps -> z per dimension.
std::vector<double> nlsq_forward(std::span<const double> eps, std::span<const NlsqCoeffs> coeffs);

// Batched eps -> z over a flat buffer; coeffs line up with eps entry by entry.
namespace serial {
void nlsq_forward_batch(std::span<const double> eps, std::span<const NlsqCoeffs> coeffs,
                        std::span<double> out);
}
namespace omp {
void nlsq_forward_batch(std::span<const double> eps, std::span<const NlsqCoeffs> coeffs,
                        std::span<double> out);
}

struct AffineResult {
    std::vector<double> out;
    double logdet = 0.0;
};

// eps = shift + exp(log_scale) * z, logdet = sum(log_scale).
AffineResult affine_inverse(std::span<const double> z, std::span<const double> shift,
                            std::span<const double> log_scale);
// z = (eps - shift) * exp(-log_scale).
std::vector<double> affine_forward(std::span<const double> eps, std::span<const double> shift,
                                   std::span<const double> log_scale);

}  // namespace condflow::flows
