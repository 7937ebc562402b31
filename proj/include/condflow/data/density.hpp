#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "condflow/autodiff/tensor.hpp"
#include "condflow/nn/layers.hpp"

// Toy conditional densities p(y | x) over 2-D points with exact log-densities.
namespace condflow::data {

using ad::Tensor;

struct DensitySample {
    Tensor cond;                      // [n x cond_dim]
    Tensor y;                         // [n x 2]
    std::vector<std::size_t> labels;  // condition label per row
};

class ConditionalDensity {
public:
    virtual ~ConditionalDensity() = default;

    virtual std::string name() const = 0;
    virtual std::size_t cond_dim() const = 0;
    // Valid condition labels.
    virtual std::vector<std::size_t> labels() const = 0;
    // Network-facing condition vector for a label.
    virtual std::vector<double> condition(std::size_t label) const = 0;
    // n i.i.d. points [n x 2] from p(y | label).
    virtual Tensor sample(std::size_t label, std::size_t n, nn::Rng& rng) const = 0;
    // log p(y | label) per row of y.
    virtual std::vector<double> log_prob(std::size_t label, const Tensor& y) const = 0;

    // n draws with labels uniform over labels().
    DensitySample draw(std::size_t n, nn::Rng& rng) const;
};

// Label k in {1..4} selects k equally weighted isotropic components. k = 1 is
// centred at the origin; otherwise the means sit on a circle of `radius`.
class CondMog2d final : public ConditionalDensity {
public:
    explicit CondMog2d(double radius = 2.0, double sigma = 0.5);

    std::string name() const override { return "cond_mog2d"; }
    std::size_t cond_dim() const override { return 4; }
    std::vector<std::size_t> labels() const override { return {1, 2, 3, 4}; }
    std::vector<double> condition(std::size_t label) const override;  // one-hot
    Tensor sample(std::size_t label, std::size_t n, nn::Rng& rng) const override;
    std::vector<double> log_prob(std::size_t label, const Tensor& y) const override;

    // Component means (k x 2, row-major). InputError for labels outside 1..4.
    std::vector<double> means(std::size_t label) const;
    double sigma() const { return sigma_; }

private:
    double radius_, sigma_;
};

struct RingArc {
    double radius = 1.0;
    double orientation = 0.0;  // radians; centre of the arc
};

struct RingConfig {
    std::vector<double> radii{1.0, 2.0};
    std::vector<double> orientations{0.0, 1.5707963267948966, 3.141592653589793, 4.71238898038469};
    double span = 5.5;  // angular width of the arc, radians; < 2*pi leaves a gap
    double radial_sigma = 0.1;
};

// Noisy arcs: theta ~ U(orientation - span/2, orientation + span/2),
// rho ~ N(radius, radial_sigma^2), y = rho (cos theta, sin theta).
//
// The density is p(theta) p(rho) / rho. The radial Gaussian is treated as
// normalised on rho > 0, which ignores the mass Phi(-radius/radial_sigma)
// below zero; samples with rho <= 0 are redrawn so the sampler matches.
class CondRing2d final : public ConditionalDensity {
public:
    explicit CondRing2d(RingConfig cfg = {});

    std::string name() const override { return "cond_ring2d"; }
    std::size_t cond_dim() const override { return 3; }
    std::vector<std::size_t> labels() const override;
    // (radius, cos orientation, sin orientation)
    std::vector<double> condition(std::size_t label) const override;
    Tensor sample(std::size_t label, std::size_t n, nn::Rng& rng) const override;
    std::vector<double> log_prob(std::size_t label, const Tensor& y) const override;

    RingArc arc(std::size_t label) const;
    Tensor sample_arc(const RingArc& arc, std::size_t n, nn::Rng& rng) const;
    std::vector<double> log_prob_arc(const RingArc& arc, const Tensor& y) const;
    const RingConfig& config() const { return cfg_; }

private:
    RingConfig cfg_;
};

// "cond_mog2d" or "cond_ring2d"; InputError otherwise.
std::unique_ptr<ConditionalDensity> make_density(const std::string& name);

}  // namespace condflow::data
