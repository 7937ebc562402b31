#include "condflow/data/density.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "condflow/errors.hpp"

namespace condflow::data {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_normal(double x, double mu, double sigma) {
    const double u = (x - mu) / sigma;
    return -0.5 * u * u - std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi);
}

}  // namespace

DensitySample ConditionalDensity::draw(std::size_t n, nn::Rng& rng) const {
    const auto labs = labels();
    const std::size_t c = cond_dim();
    std::uniform_int_distribution<std::size_t> pick(0, labs.size() - 1);
    DensitySample out;
    std::vector<double> cond(n * c), y(n * 2);
    out.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t label = labs[pick(rng)];
        out.labels[i] = label;
        const auto cv = condition(label);
        std::copy(cv.begin(), cv.end(), cond.begin() + static_cast<std::ptrdiff_t>(i * c));
        const Tensor s = sample(label, 1, rng);
        y[2 * i] = s.at(0, 0);
        y[2 * i + 1] = s.at(0, 1);
    }
    out.cond = Tensor::from(n, c, std::move(cond));
    out.y = Tensor::from(n, 2, std::move(y));
    return out;
}

// ---------------------------------------------------------------- mog

CondMog2d::CondMog2d(double radius, double sigma) : radius_(radius), sigma_(sigma) {
    if (!(sigma > 0.0)) throw InputError("cond_mog2d: sigma must be positive");
}

std::vector<double> CondMog2d::means(std::size_t label) const {
    if (label < 1 || label > 4) throw InputError("cond_mog2d: label must be in 1..4, got " + std::to_string(label));
    if (label == 1) return {0.0, 0.0};
    std::vector<double> mu;
    for (std::size_t i = 0; i < label; ++i) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(label);
        mu.push_back(radius_ * std::cos(a));
        mu.push_back(radius_ * std::sin(a));
    }
    return mu;
}

std::vector<double> CondMog2d::condition(std::size_t label) const {
    means(label);
    std::vector<double> c(4, 0.0);
    c[label - 1] = 1.0;
    return c;
}

Tensor CondMog2d::sample(std::size_t label, std::size_t n, nn::Rng& rng) const {
    const auto mu = means(label);
    std::uniform_int_distribution<std::size_t> pick(0, label - 1);
    std::normal_distribution<double> noise(0.0, sigma_);
    std::vector<double> y(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t m = pick(rng);
        y[2 * i] = mu[2 * m] + noise(rng);
        y[2 * i + 1] = mu[2 * m + 1] + noise(rng);
    }
    return Tensor::from(n, 2, std::move(y));
}

std::vector<double> CondMog2d::log_prob(std::size_t label, const Tensor& y) const {
    if (y.cols() != 2) throw ShapeError("cond_mog2d: points must have 2 columns");
    const auto mu = means(label);
    const double log_w = -std::log(static_cast<double>(label));
    std::vector<double> out(y.rows());
    std::vector<double> terms(label);
    for (std::size_t i = 0; i < y.rows(); ++i) {
        double top = kNegInf;
        for (std::size_t m = 0; m < label; ++m) {
            terms[m] = log_w + log_normal(y.at(i, 0), mu[2 * m], sigma_) + log_normal(y.at(i, 1), mu[2 * m + 1], sigma_);
            top = std::max(top, terms[m]);
        }
        double acc = 0.0;
        for (double t : terms) acc += std::exp(t - top);
        out[i] = top + std::log(acc);
    }
    return out;
}

// ---------------------------------------------------------------- ring

CondRing2d::CondRing2d(RingConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.radii.empty() || cfg_.orientations.empty()) throw InputError("cond_ring2d: empty condition set");
    for (double r : cfg_.radii)
        if (!(r > 0.0)) throw InputError("cond_ring2d: radius must be positive");
    if (!(cfg_.radial_sigma > 0.0)) throw InputError("cond_ring2d: radial_sigma must be positive");
    if (!(cfg_.span > 0.0) || cfg_.span > 2.0 * std::numbers::pi)
        throw InputError("cond_ring2d: span must be in (0, 2*pi]");
}

std::vector<std::size_t> CondRing2d::labels() const {
    std::vector<std::size_t> l(cfg_.radii.size() * cfg_.orientations.size());
    for (std::size_t i = 0; i < l.size(); ++i) l[i] = i;
    return l;
}

RingArc CondRing2d::arc(std::size_t label) const {
    const std::size_t n = cfg_.orientations.size();
    if (label >= cfg_.radii.size() * n) throw InputError("cond_ring2d: unknown label " + std::to_string(label));
    return {cfg_.radii[label / n], cfg_.orientations[label % n]};
}

std::vector<double> CondRing2d::condition(std::size_t label) const {
    const RingArc a = arc(label);
    return {a.radius, std::cos(a.orientation), std::sin(a.orientation)};
}

Tensor CondRing2d::sample_arc(const RingArc& arc, std::size_t n, nn::Rng& rng) const {
    std::uniform_real_distribution<double> theta(arc.orientation - 0.5 * cfg_.span, arc.orientation + 0.5 * cfg_.span);
    std::normal_distribution<double> rho(arc.radius, cfg_.radial_sigma);
    std::vector<double> y(n * 2);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = theta(rng);
        double r = rho(rng);
        while (r <= 0.0) r = rho(rng);
        y[2 * i] = r * std::cos(t);
        y[2 * i + 1] = r * std::sin(t);
    }
    return Tensor::from(n, 2, std::move(y));
}

std::vector<double> CondRing2d::log_prob_arc(const RingArc& arc, const Tensor& y) const {
    if (y.cols() != 2) throw ShapeError("cond_ring2d: points must have 2 columns");
    std::vector<double> out(y.rows());
    for (std::size_t i = 0; i < y.rows(); ++i) {
        const double px = y.at(i, 0), py = y.at(i, 1);
        const double rho = std::hypot(px, py);
        double rel = std::remainder(std::atan2(py, px) - arc.orientation, 2.0 * std::numbers::pi);
        if (rho <= 0.0 || std::abs(rel) > 0.5 * cfg_.span) {
            out[i] = kNegInf;
            continue;
        }
        out[i] = -std::log(cfg_.span) + log_normal(rho, arc.radius, cfg_.radial_sigma) - std::log(rho);
    }
    return out;
}

Tensor CondRing2d::sample(std::size_t label, std::size_t n, nn::Rng& rng) const {
    return sample_arc(arc(label), n, rng);
}

std::vector<double> CondRing2d::log_prob(std::size_t label, const Tensor& y) const {
    return log_prob_arc(arc(label), y);
}

std::unique_ptr<ConditionalDensity> make_density(const std::string& name) {
    if (name == "cond_mog2d") return std::make_unique<CondMog2d>();
    if (name == "cond_ring2d") return std::make_unique<CondRing2d>();
    throw InputError("unknown density generator '" + name + "' (valid: cond_mog2d, cond_ring2d)");
}

}  // namespace condflow::data
