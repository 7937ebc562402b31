#include "condflow/flows/flow_stack.hpp"

#include <numbers>

#include "condflow/errors.hpp"

namespace condflow::flows {

std::string to_string(FlowKind kind) { return kind == FlowKind::nlsq ? "nlsq" : "affine"; }

FlowKind flow_kind_from_string(const std::string& name) {
    if (name == "nlsq") return FlowKind::nlsq;
    if (name == "affine") return FlowKind::affine;
    throw ConfigError("unknown flow kind '" + name + "' (valid: nlsq, affine)");
}

CoeffTensors constrain_coeffs(const Tensor& raw) {
    if (raw.cols() % 5 != 0) throw ShapeError("constrain_coeffs: raw width must be a multiple of 5");
    const std::size_t k = raw.cols() / 5;
    CoeffTensors out;
    out.a = ad::slice_cols(raw, 0, k);
    out.b = ad::exp(ad::slice_cols(raw, k, 2 * k));
    out.d = ad::add_scalar(ad::softplus(ad::slice_cols(raw, 3 * k, 4 * k)), kMinSharpness);
    out.g = ad::slice_cols(raw, 4 * k, 5 * k);
    out.c = ad::scale(ad::div(out.b, out.d), kBoundSafety * kMonotoneBound) *
            ad::tanh(ad::slice_cols(raw, 2 * k, 3 * k));
    return out;
}

std::pair<Tensor, Tensor> nlsq_inverse(const Tensor& z, const Tensor& raw) {
    if (raw.cols() != 5 * z.cols() || raw.rows() != z.rows())
        throw ShapeError("nlsq_inverse: raw coefficients do not match input");
    const CoeffTensors k = constrain_coeffs(raw);
    const Tensor u = k.d * z + k.g;
    const Tensor inv = ad::reciprocal(ad::add_scalar(ad::square(u), 1.0));
    const Tensor eps = k.a + k.b * z + k.c * inv;
    const Tensor slope = k.b - ad::scale(k.c * k.d * u * ad::square(inv), 2.0);
    for (double s : slope.data())
        if (!(s > 0.0)) throw InvertibilityError("nlsq_inverse: non-positive derivative");
    return {eps, ad::sum_cols(ad::log(slope))};
}

std::pair<Tensor, Tensor> affine_inverse(const Tensor& z, const Tensor& raw) {
    if (raw.cols() != 2 * z.cols() || raw.rows() != z.rows())
        throw ShapeError("affine_inverse: raw coefficients do not match input");
    const std::size_t k = z.cols();
    const Tensor shift = ad::slice_cols(raw, 0, k);
    const Tensor log_scale = ad::slice_cols(raw, k, 2 * k);
    if (!log_scale.is_finite()) throw DomainError("affine_inverse: non-finite log scale");
    return {shift + ad::exp(log_scale) * z, ad::sum_cols(log_scale)};
}

// ---------------------------------------------------------------- layer

CouplingLayer::CouplingLayer(std::size_t index, const FlowConfig& cfg, nn::Rng& rng)
    : kind_(cfg.kind), dim_(cfg.latent_dim), cond_dim_(cfg.cond_dim) {
    const std::size_t left = (dim_ + 1) / 2;
    if (index % 2 == 0) {
        t_begin_ = 0;
        t_end_ = left;
    } else {
        t_begin_ = left;
        t_end_ = dim_;
    }
    const std::size_t width = t_end_ - t_begin_;
    const std::size_t frozen = dim_ - width;
    const std::size_t in = std::max<std::size_t>(frozen + cond_dim_, 1);
    const std::size_t out = (kind_ == FlowKind::nlsq ? 5 : 2) * width;
    conditioner_ = nn::Mlp(in, cfg.hidden, out, rng, /*zero_last=*/true);
}

Tensor CouplingLayer::frozen_part(const Tensor& x) const {
    if (t_begin_ == 0) return ad::slice_cols(x, t_end_, dim_);
    return ad::slice_cols(x, 0, t_begin_);
}

Tensor CouplingLayer::assemble(const Tensor& transformed, const Tensor& frozen) const {
    if (t_begin_ == 0) return ad::concat_cols({transformed, frozen});
    return ad::concat_cols({frozen, transformed});
}

Tensor CouplingLayer::conditioner_input(const Tensor& frozen, const Tensor& cond) const {
    if (cond_dim_ > 0 && !cond.defined()) throw ShapeError("coupling: layer requires a condition");
    if (cond.defined() && cond.cols() != cond_dim_)
        throw ShapeError("coupling: condition width " + std::to_string(cond.cols()) + ", expected " +
                         std::to_string(cond_dim_));
    if (frozen.cols() + cond_dim_ == 0) return Tensor::full(frozen.rows(), 1, 1.0);
    if (cond_dim_ == 0) return frozen;
    if (frozen.cols() == 0) return cond;
    return ad::concat_cols({frozen, cond});
}

Tensor CouplingLayer::conditioner_output(const Tensor& frozen, const Tensor& cond) const {
    return conditioner_(conditioner_input(frozen, cond));
}

std::pair<Tensor, Tensor> CouplingLayer::inverse(const Tensor& z, const Tensor& cond) const {
    if (z.cols() != dim_) throw ShapeError("coupling: latent width mismatch");
    if (t_end_ == t_begin_) return {z, Tensor::zeros(z.rows(), 1)};
    const Tensor frozen = frozen_part(z);
    const Tensor zt = ad::slice_cols(z, t_begin_, t_end_);
    const Tensor raw = conditioner_output(frozen, cond);
    auto [eps_t, logdet] = kind_ == FlowKind::nlsq ? nlsq_inverse(zt, raw) : affine_inverse(zt, raw);
    return {assemble(eps_t, frozen), logdet};
}

Tensor CouplingLayer::forward(const Tensor& eps, const Tensor& cond) const {
    if (eps.cols() != dim_) throw ShapeError("coupling: latent width mismatch");
    ad::NoGradGuard no_grad;
    if (t_end_ == t_begin_) return eps;
    const Tensor frozen = frozen_part(eps);
    const Tensor et = ad::slice_cols(eps, t_begin_, t_end_);
    const Tensor raw = conditioner_output(frozen, cond);
    const std::size_t rows = eps.rows(), k = t_end_ - t_begin_;
    std::vector<double> out(rows * k);
    const auto rv = raw.data();
    if (kind_ == FlowKind::nlsq) {
        std::vector<NlsqCoeffs> coeffs(rows * k);
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                const double r[5] = {rv[i * 5 * k + j], rv[i * 5 * k + k + j], rv[i * 5 * k + 2 * k + j],
                                     rv[i * 5 * k + 3 * k + j], rv[i * 5 * k + 4 * k + j]};
                coeffs[i * k + j] = flows::constrain_coeffs(r);
            }
        }
        if (rows * k >= 256)
            omp::nlsq_forward_batch(et.data(), coeffs, out);
        else
            serial::nlsq_forward_batch(et.data(), coeffs, out);
    } else {
        const auto ev = et.data();
        for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                const double shift = rv[i * 2 * k + j];
                const double log_scale = rv[i * 2 * k + k + j];
                if (!std::isfinite(log_scale)) throw DomainError("affine: non-finite log scale");
                out[i * k + j] = (ev[i * k + j] - shift) * std::exp(-log_scale);
            }
        }
    }
    return assemble(Tensor::from(rows, k, std::move(out)), frozen);
}

// ---------------------------------------------------------------- stack

FlowStack::FlowStack(const FlowConfig& cfg, nn::Rng& rng) : cfg_(cfg) {
    if (cfg.latent_dim == 0) throw ConfigError("flow: latent_dim must be positive");
    layers_.reserve(cfg.layers);
    for (std::size_t i = 0; i < cfg.layers; ++i) layers_.emplace_back(i, cfg, rng);
}

std::pair<Tensor, Tensor> FlowStack::inverse(const Tensor& z, const Tensor& cond) const {
    if (z.cols() != cfg_.latent_dim)
        throw ShapeError("flow: latent has " + std::to_string(z.cols()) + " columns, expected " +
                         std::to_string(cfg_.latent_dim));
    Tensor h = z;
    Tensor logdet = Tensor::zeros(z.rows(), 1);
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
        auto [next, ld] = it->inverse(h, cond);
        h = std::move(next);
        logdet = logdet + ld;
    }
    return {h, logdet};
}

Tensor FlowStack::log_prob(const Tensor& z, const Tensor& cond) const {
    auto [eps, logdet] = inverse(z, cond);
    return standard_normal_log_prob(eps) + logdet;
}

Tensor FlowStack::forward(const Tensor& eps, const Tensor& cond) const {
    Tensor h = eps;
    for (const auto& layer : layers_) h = layer.forward(h, cond);
    return h;
}

Tensor FlowStack::sample(const Tensor& cond, std::size_t rows, nn::Rng& rng) const {
    if (cond.defined() && cond.rows() != rows) throw ShapeError("flow sample: condition rows mismatch");
    return forward(standard_normal(rows, cfg_.latent_dim, rng), cond);
}

nn::ParamSet FlowStack::params() const {
    nn::ParamSet p;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        p.append(layers_[i].params(), "layer" + std::to_string(i) + ".");
    return p;
}

Tensor standard_normal_log_prob(const Tensor& x) {
    const double c = -0.5 * static_cast<double>(x.cols()) * std::log(2.0 * std::numbers::pi);
    return ad::add_scalar(ad::scale(ad::sum_cols(ad::square(x)), -0.5), c);
}

Tensor standard_normal(std::size_t rows, std::size_t dim, nn::Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(rows * dim);
    for (auto& x : v) x = n(rng);
    return Tensor::from(rows, dim, std::move(v));
}

}  // namespace condflow::flows
