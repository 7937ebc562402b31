#include "condflow/priors/prior.hpp"

#include <cmath>
#include <numbers>

#include "condflow/errors.hpp"

namespace condflow::priors {

std::string to_string(PriorKind kind) {
    switch (kind) {
        case PriorKind::conditional_flow: return "conditional_flow";
        case PriorKind::conditional_mog: return "conditional_mog";
        case PriorKind::standard_gaussian: return "standard_gaussian";
        case PriorKind::unconditional_flow: return "unconditional_flow";
    }
    return "unknown";
}

PriorKind prior_kind_from_string(const std::string& name) {
    if (name == "conditional_flow" || name == "flow") return PriorKind::conditional_flow;
    if (name == "conditional_mog" || name == "mog") return PriorKind::conditional_mog;
    if (name == "standard_gaussian" || name == "gauss") return PriorKind::standard_gaussian;
    if (name == "unconditional_flow" || name == "uflow") return PriorKind::unconditional_flow;
    throw ConfigError("unknown prior kind '" + name + "' (valid: flow, mog, gauss, uflow)");
}

std::unique_ptr<Prior> make_prior(const PriorConfig& cfg, nn::Rng& rng) {
    if (cfg.latent_dim == 0) throw ConfigError("prior: latent_dim must be positive");
    switch (cfg.kind) {
        case PriorKind::standard_gaussian: return std::make_unique<StandardGaussianPrior>(cfg);
        case PriorKind::conditional_flow:
        case PriorKind::unconditional_flow: return std::make_unique<FlowPrior>(cfg, rng);
        case PriorKind::conditional_mog: return std::make_unique<MogPrior>(cfg, rng);
    }
    throw ConfigError("prior: unhandled kind");
}

Tensor mog_log_prob(const Tensor& z, const MogParams& p) {
    const std::size_t m = p.log_weights.cols();
    const std::size_t d = z.cols();
    if (p.means.cols() != m * d || p.scales.cols() != m || p.means.rows() != z.rows())
        throw ShapeError("mog_log_prob: parameter shapes do not match latent");
    for (double s : p.scales.data())
        if (!(s > 0.0)) throw DomainError("mog_log_prob: non-positive component scale");
    const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
    std::vector<Tensor> comps;
    comps.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        const Tensor mu = ad::slice_cols(p.means, i * d, (i + 1) * d);
        const Tensor sigma = ad::slice_cols(p.scales, i, i + 1);
        const Tensor sq = ad::sum_cols(ad::square(z - mu));
        const Tensor lp = ad::scale(sq * ad::reciprocal(ad::square(sigma)), -0.5) -
                          ad::scale(ad::log(sigma), static_cast<double>(d)) -
                          static_cast<double>(d) * half_log_2pi;
        comps.push_back(lp + ad::slice_cols(p.log_weights, i, i + 1));
    }
    return ad::logsumexp_cols(ad::concat_cols(comps));
}

// ---------------------------------------------------------------- gaussian

StandardGaussianPrior::StandardGaussianPrior(PriorConfig cfg) : Prior(std::move(cfg)) {}

Tensor StandardGaussianPrior::log_prob(const Tensor& z, const Tensor&) const {
    if (z.cols() != latent_dim()) throw ShapeError("prior: latent width mismatch");
    return flows::standard_normal_log_prob(z);
}

Tensor StandardGaussianPrior::sample(const Tensor&, std::size_t rows, nn::Rng& rng) const {
    return flows::standard_normal(rows, latent_dim(), rng);
}

// ---------------------------------------------------------------- flow

namespace {
flows::FlowConfig flow_config(const PriorConfig& cfg) {
    flows::FlowConfig f;
    f.kind = cfg.flow_kind;
    f.layers = cfg.flow_layers;
    f.latent_dim = cfg.latent_dim;
    f.cond_dim = cfg.kind == PriorKind::conditional_flow ? cfg.cond_dim : 0;
    f.hidden = cfg.flow_hidden;
    return f;
}
}  // namespace

FlowPrior::FlowPrior(PriorConfig cfg, nn::Rng& rng) : Prior(std::move(cfg)), stack_(flow_config(cfg_), rng) {}

Tensor FlowPrior::log_prob(const Tensor& z, const Tensor& cond) const {
    return stack_.log_prob(z, kind() == PriorKind::conditional_flow ? cond : Tensor());
}

Tensor FlowPrior::sample(const Tensor& cond, std::size_t rows, nn::Rng& rng) const {
    return stack_.sample(kind() == PriorKind::conditional_flow ? cond : Tensor(), rows, rng);
}

// ---------------------------------------------------------------- mog

MogPrior::MogPrior(PriorConfig cfg, nn::Rng& rng) : Prior(std::move(cfg)) {
    if (cfg_.mog_components == 0) throw ConfigError("mog prior: need at least one component");
    const std::size_t m = cfg_.mog_components;
    net_ = nn::Mlp(std::max<std::size_t>(cfg_.cond_dim, 1), cfg_.mog_hidden, m + m * latent_dim() + m, rng);
}

MogParams MogPrior::mixture(const Tensor& cond, std::size_t rows) const {
    const std::size_t m = cfg_.mog_components, d = latent_dim();
    Tensor input;
    if (cfg_.cond_dim == 0) {
        input = Tensor::full(rows, 1, 1.0);
    } else {
        if (!cond.defined() || cond.cols() != cfg_.cond_dim || cond.rows() != rows)
            throw ShapeError("mog prior: condition shape mismatch");
        input = cond;
    }
    const Tensor out = net_(input);
    const Tensor logits = ad::slice_cols(out, 0, m);
    MogParams p;
    p.log_weights = logits - ad::logsumexp_cols(logits);
    p.means = ad::slice_cols(out, m, m + m * d);
    p.scales = ad::add_scalar(ad::softplus(ad::slice_cols(out, m + m * d, 2 * m + m * d)), kMogScaleFloor);
    return p;
}

Tensor MogPrior::log_prob(const Tensor& z, const Tensor& cond) const {
    if (z.cols() != latent_dim()) throw ShapeError("prior: latent width mismatch");
    return mog_log_prob(z, mixture(cond, z.rows()));
}

Tensor MogPrior::sample(const Tensor& cond, std::size_t rows, nn::Rng& rng) const {
    ad::NoGradGuard guard;
    const MogParams p = mixture(cond, rows);
    const std::size_t m = cfg_.mog_components, d = latent_dim();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> out(rows * d);
    for (std::size_t r = 0; r < rows; ++r) {
        const double pick = u(rng);
        std::size_t comp = m - 1;
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            acc += std::exp(p.log_weights.at(r, i));
            if (pick < acc) {
                comp = i;
                break;
            }
        }
        const double sigma = p.scales.at(r, comp);
        for (std::size_t j = 0; j < d; ++j) out[r * d + j] = p.means.at(r, comp * d + j) + sigma * n(rng);
    }
    return Tensor::from(rows, d, std::move(out));
}

}  // namespace condflow::priors
