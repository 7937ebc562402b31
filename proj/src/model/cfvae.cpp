#include "condflow/model/cfvae.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>

#include "condflow/errors.hpp"

namespace condflow::model {
namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

priors::PriorConfig prior_config(const ModelConfig& cfg, std::size_t cond_dim) {
    priors::PriorConfig p;
    p.kind = cfg.prior;
    p.latent_dim = cfg.latent_dim;
    p.cond_dim = cond_dim;
    p.flow_kind = cfg.flow_kind;
    p.flow_layers = cfg.flow_layers;
    p.flow_hidden = cfg.flow_hidden;
    p.mog_components = cfg.mog_components;
    p.mog_hidden = cfg.mog_hidden;
    return p;
}

std::vector<Tensor> step_features(const std::vector<double>& seq, std::size_t len,
                                  const data::TrajectoryBatch& batch) {
    const std::size_t b = batch.size(), t = batch.past_len;
    std::vector<Tensor> out;
    out.reserve(len);
    for (std::size_t i = 0; i < len; ++i) {
        std::vector<double> f(b * 4);
        for (std::size_t c = 0; c < b; ++c) {
            const double* anchor = batch.past.data() + (c * t + t - 1) * 2;
            const double* p = seq.data() + (c * len + i) * 2;
            // The first future step measures its displacement from the anchor.
            const double* prev = i > 0 ? p - 2 : (&seq == &batch.past ? p : anchor);
            f[c * 4 + 0] = p[0] - anchor[0];
            f[c * 4 + 1] = p[1] - anchor[1];
            f[c * 4 + 2] = p[0] - prev[0];
            f[c * 4 + 3] = p[1] - prev[1];
        }
        out.push_back(Tensor::from(b, 4, std::move(f)));
    }
    return out;
}

template <class Fn>
void parallel_cases(std::size_t n, Fn&& fn) {
    std::exception_ptr error;
    const auto count = static_cast<std::int64_t>(n);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < count; ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(condflow_case_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) {
    auto mix = [](std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    };
    return mix(mix(seed) ^ (index + 0x632BE59BD9B4E019ULL));
}

void validate(const ModelConfig& cfg) {
    if (cfg.latent_dim == 0) throw ConfigError("latent_dim must be positive");
    if (cfg.future_len == 0) throw ConfigError("future_len must be positive");
    if (cfg.encoder_hidden == 0 || cfg.recognition_hidden == 0 || cfg.decoder_hidden == 0)
        throw ConfigError("recurrent widths must be positive");
    if (cfg.posterior_reg && !(cfg.c_var > 0.0)) throw ConfigError("c_var must be positive");
    if (!(cfg.sigma_y > 0.0)) throw ConfigError("sigma_y must be positive");
    if (cfg.grid_features > 0 && (cfg.social_channels == 0 || cfg.social_out == 0))
        throw ConfigError("social pooling widths must be positive");
}

std::vector<Tensor> past_features(const data::TrajectoryBatch& batch) {
    if (batch.past_len == 0) throw InputError("encode_condition: empty past");
    return step_features(batch.past, batch.past_len, batch);
}

std::vector<Tensor> future_features(const data::TrajectoryBatch& batch) {
    if (batch.future_len == 0) throw InputError("recognize: empty future");
    return step_features(batch.future, batch.future_len, batch);
}

Tensor last_past(const data::TrajectoryBatch& batch) {
    const std::size_t b = batch.size(), t = batch.past_len;
    std::vector<double> v(b * 2);
    for (std::size_t c = 0; c < b; ++c) {
        v[2 * c] = batch.past[(c * t + t - 1) * 2];
        v[2 * c + 1] = batch.past[(c * t + t - 1) * 2 + 1];
    }
    return Tensor::from(b, 2, std::move(v));
}

Tensor future_relative(const data::TrajectoryBatch& batch) {
    const std::size_t b = batch.size(), t = batch.past_len, f = batch.future_len;
    std::vector<double> v(b * f * 2);
    for (std::size_t c = 0; c < b; ++c) {
        const double* anchor = batch.past.data() + (c * t + t - 1) * 2;
        for (std::size_t i = 0; i < f; ++i) {
            v[(c * f + i) * 2] = batch.future[(c * f + i) * 2] - anchor[0];
            v[(c * f + i) * 2 + 1] = batch.future[(c * f + i) * 2 + 1] - anchor[1];
        }
    }
    return Tensor::from(b, f * 2, std::move(v));
}

Tensor gaussian_log_likelihood(const Tensor& y, const Tensor& mean, double sigma) {
    const double k = static_cast<double>(y.cols());
    const Tensor sq = ad::sum_cols(ad::square(y - mean));
    return ad::add_scalar(ad::scale(sq, -0.5 / (sigma * sigma)), -k * (std::log(sigma) + 0.5 * kLog2Pi));
}

double iw_log_mean_exp(std::span<const double> log_w) {
    if (log_w.empty()) throw ConfigError("importance weighting needs at least one sample");
    const double top = *std::max_element(log_w.begin(), log_w.end());
    if (!std::isfinite(top)) return top;
    double acc = 0.0;
    for (double v : log_w) acc += std::exp(v - top);
    return top + std::log(acc) - std::log(static_cast<double>(log_w.size()));
}

// ---------------------------------------------------------------- model

CfVae::CfVae(ModelConfig cfg, nn::Rng& rng) : cfg_(std::move(cfg)) {
    validate(cfg_);
    encoder_ = nn::LstmCell(4, cfg_.encoder_hidden, rng);
    if (cfg_.grid_features > 0)
        social_ = nn::SocialPool(data::kGridLong, data::kGridLanes, cfg_.grid_features, cfg_.social_channels,
                                 cfg_.social_out, rng);
    const std::size_t x = encoding_width();
    recognition_ = nn::LstmCell(4, cfg_.recognition_hidden, rng);
    rec_mean_ = nn::Linear(cfg_.recognition_hidden + x, cfg_.latent_dim, rng);
    if (!cfg_.posterior_reg) rec_logvar_ = nn::Linear(cfg_.recognition_hidden + x, cfg_.latent_dim, rng);
    decoder_ = nn::LstmCell(cfg_.latent_dim + (cfg_.conditioned_decoder ? x : 0), cfg_.decoder_hidden, rng);
    dec_out_ = nn::Linear(cfg_.decoder_hidden, 2, rng);
    prior_ = priors::make_prior(prior_config(cfg_, x), rng);
}

std::size_t CfVae::encoding_width() const {
    return cfg_.encoder_hidden + (cfg_.grid_features > 0 ? cfg_.social_out : 0);
}

void CfVae::check_batch(const data::TrajectoryBatch& batch) const {
    batch.validate();
    if (batch.future_len != cfg_.future_len)
        throw ConfigError("batch future length " + std::to_string(batch.future_len) + " does not match model (" +
                          std::to_string(cfg_.future_len) + ")");
    if (batch.grid_features != cfg_.grid_features)
        throw ConfigError("batch grid features " + std::to_string(batch.grid_features) + " do not match model (" +
                          std::to_string(cfg_.grid_features) + ")");
}

ConditionEncoding CfVae::encode_condition(const data::TrajectoryBatch& batch) const {
    ConditionEncoding e;
    e.x_t = nn::encode_sequence(encoder_, past_features(batch));
    if (cfg_.grid_features > 0) {
        if (batch.grid_features == 0) throw ShapeError("encode_condition: model expects a neighbour grid");
        e.x_p = social_(Tensor::from(batch.size(), batch.grid_width(), batch.grid));
        e.x = ad::concat_cols({e.x_t, e.x_p});
    } else {
        e.x = e.x_t;
    }
    return e;
}

PosteriorParams CfVae::recognize(const Tensor& x_enc, const data::TrajectoryBatch& batch) const {
    const Tensor h = ad::concat_cols({nn::encode_sequence(recognition_, future_features(batch)), x_enc});
    PosteriorParams q;
    q.mean = rec_mean_(h);
    if (cfg_.posterior_reg) {
        q.logvar = Tensor::full(h.rows(), cfg_.latent_dim, std::log(cfg_.c_var));
        q.fixed_variance = true;
    } else {
        q.logvar = rec_logvar_(h);
    }
    return q;
}

Tensor CfVae::decode(const Tensor& z, const Tensor& x_enc) const {
    if (z.cols() != cfg_.latent_dim) throw ShapeError("decode: latent width mismatch");
    if (!cfg_.conditioned_decoder && x_enc.defined())
        throw ConfigError("decode: condition given to an unconditioned (cR) decoder");
    if (cfg_.conditioned_decoder && !x_enc.defined()) throw ConfigError("decode: conditioned decoder needs x_enc");
    const Tensor input = cfg_.conditioned_decoder ? ad::concat_cols({z, x_enc}) : z;
    nn::LstmState s = decoder_.zero_state(z.rows());
    Tensor pos = Tensor::zeros(z.rows(), 2);
    std::vector<Tensor> steps;
    steps.reserve(cfg_.future_len);
    for (std::size_t i = 0; i < cfg_.future_len; ++i) {
        s = decoder_(input, s);
        pos = pos + dec_out_(s.h);
        steps.push_back(pos);
    }
    return ad::concat_cols(steps);
}

Tensor CfVae::sample_posterior(const PosteriorParams& q, nn::Rng& rng) const {
    const Tensor eta = flows::standard_normal(q.mean.rows(), cfg_.latent_dim, rng);
    return q.mean + ad::exp(ad::scale(q.logvar, 0.5)) * eta;
}

Tensor CfVae::posterior_log_prob(const Tensor& z, const PosteriorParams& q) const {
    const Tensor quad = ad::square(z - q.mean) * ad::exp(-q.logvar);
    const Tensor per_dim = ad::add_scalar(quad + q.logvar, kLog2Pi);
    return ad::scale(ad::sum_cols(per_dim), -0.5);
}

Tensor CfVae::posterior_entropy(const PosteriorParams& q) const {
    return ad::scale(ad::sum_cols(ad::add_scalar(q.logvar, 1.0 + kLog2Pi)), 0.5);
}

ElboTerms CfVae::elbo(const data::TrajectoryBatch& batch, nn::Rng& rng, double beta) const {
    check_batch(batch);
    const ConditionEncoding enc = encode_condition(batch);
    const PosteriorParams q = recognize(enc.x, batch);
    const Tensor z = sample_posterior(q, rng);
    const Tensor y_hat = decode(z, cfg_.conditioned_decoder ? enc.x : Tensor());
    ElboTerms t;
    t.recon = gaussian_log_likelihood(future_relative(batch), y_hat, cfg_.sigma_y);
    t.entropy = posterior_entropy(q);
    t.prior = prior_->log_prob(z, enc.x);
    t.elbo = t.recon + ad::scale(t.entropy + t.prior, beta);
    return t;
}

std::vector<double> CfVae::estimate_cll(const data::TrajectoryBatch& batch, std::size_t k,
                                        std::uint64_t seed) const {
    if (k < 1) throw ConfigError("estimate_cll: K must be at least 1");
    check_batch(batch);
    std::vector<double> out(batch.size());
    parallel_cases(batch.size(), [&](std::size_t i) {
        ad::NoGradGuard guard;
        nn::Rng rng(stream_seed(seed, i));
        const data::TrajectoryBatch one = batch.select({i});
        const ConditionEncoding enc = encode_condition(one);
        const PosteriorParams q1 = recognize(enc.x, one);
        PosteriorParams q{ad::repeat_rows(q1.mean, k), ad::repeat_rows(q1.logvar, k), q1.fixed_variance};
        const Tensor x = ad::repeat_rows(enc.x, k);
        const Tensor z = sample_posterior(q, rng);
        const Tensor y_hat = decode(z, cfg_.conditioned_decoder ? x : Tensor());
        const Tensor log_w = gaussian_log_likelihood(ad::repeat_rows(future_relative(one), k), y_hat, cfg_.sigma_y) +
                             prior_->log_prob(z, x) - posterior_log_prob(z, q);
        out[i] = -iw_log_mean_exp(log_w.data());
    });
    return out;
}

std::vector<double> CfVae::predict(const data::TrajectoryBatch& batch, std::size_t n, std::uint64_t seed) const {
    if (n < 1) throw ConfigError("predict: N must be at least 1");
    batch.validate();
    if (batch.grid_features != cfg_.grid_features) throw ConfigError("predict: grid features do not match model");
    const std::size_t f = cfg_.future_len;
    std::vector<double> out(batch.size() * n * f * 2);
    parallel_cases(batch.size(), [&](std::size_t i) {
        ad::NoGradGuard guard;
        nn::Rng rng(stream_seed(seed, i));
        const data::TrajectoryBatch one = batch.select({i});
        const Tensor x = ad::repeat_rows(encode_condition(one).x, n);
        const Tensor z = prior_->sample(x, n, rng);
        const Tensor y_hat = decode(z, cfg_.conditioned_decoder ? x : Tensor());
        const Tensor anchor = last_past(one);
        double* dst = out.data() + i * n * f * 2;
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t j = 0; j < f; ++j) {
                dst[(s * f + j) * 2] = y_hat.at(s, 2 * j) + anchor.at(0, 0);
                dst[(s * f + j) * 2 + 1] = y_hat.at(s, 2 * j + 1) + anchor.at(0, 1);
            }
    });
    return out;
}

nn::ParamSet CfVae::model_params() const {
    nn::ParamSet p;
    p.append(encoder_.params(), "encoder.");
    if (cfg_.grid_features > 0) p.append(social_.params(), "social.");
    p.append(recognition_.params(), "recognition.");
    p.append(rec_mean_.params(), "rec_mean.");
    if (!cfg_.posterior_reg) p.append(rec_logvar_.params(), "rec_logvar.");
    p.append(decoder_.params(), "decoder.");
    p.append(dec_out_.params(), "dec_out.");
    return p;
}

nn::ParamSet CfVae::prior_params() const { return prior_->params(); }

nn::ParamSet CfVae::params() const {
    nn::ParamSet p = model_params();
    p.append(prior_params(), "prior.");
    return p;
}

}  // namespace condflow::model
