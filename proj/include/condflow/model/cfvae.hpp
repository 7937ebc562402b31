#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "condflow/autodiff/tensor.hpp"
#include "condflow/data/trajectory.hpp"
#include "condflow/nn/layers.hpp"
#include "condflow/priors/prior.hpp"

// Conditional VAE over future trajectories with a pluggable latent prior.
// Futures are modelled relative to the last observed point, so the decoder
// can run without the condition (cR) and still produce usable rollouts.
namespace condflow::model {

using ad::Tensor;

struct ModelConfig {
    std::size_t latent_dim = 8;
    std::size_t future_len = 12;

    priors::PriorKind prior = priors::PriorKind::conditional_flow;
    flows::FlowKind flow_kind = flows::FlowKind::nlsq;
    std::size_t flow_layers = 16;
    std::vector<std::size_t> flow_hidden{64, 64};
    std::size_t mog_components = 3;
    std::vector<std::size_t> mog_hidden{64};

    std::size_t encoder_hidden = 64;
    std::size_t recognition_hidden = 64;
    std::size_t decoder_hidden = 48;

    bool posterior_reg = true;  // pR: posterior variance fixed to c_var
    double c_var = 0.2;
    bool conditioned_decoder = true;  // false => cR, decoder sees z only
    double sigma_y = 0.1;

    std::size_t grid_features = 0;  // > 0 enables social pooling
    std::size_t social_channels = 8;
    std::size_t social_out = 16;
};

// ConfigError for inconsistent settings.
void validate(const ModelConfig& cfg);

struct ConditionEncoding {
    Tensor x_t;  // recurrent summary of the past
    Tensor x_p;  // social features, undefined without a grid
    Tensor x;    // concat(x_t, x_p)
};

struct PosteriorParams {
    Tensor mean;    // [B x D]
    Tensor logvar;  // [B x D]; constant log C under pR
    bool fixed_variance = false;
};

// Per-case ELBO pieces, each [B x 1].
struct ElboTerms {
    Tensor recon;    // log p(y | z, x)
    Tensor entropy;  // H(q)
    Tensor prior;    // log p(z | x)
    Tensor elbo;     // recon + beta * (entropy + prior)
};

// Past step features: position relative to the last past point and the
// displacement from the previous point.
std::vector<Tensor> past_features(const data::TrajectoryBatch& batch);
// Same features for the future, relative to the last past point.
std::vector<Tensor> future_features(const data::TrajectoryBatch& batch);
// [B x 2F] future positions relative to the last past point.
Tensor future_relative(const data::TrajectoryBatch& batch);
// [B x 2] last past point.
Tensor last_past(const data::TrajectoryBatch& batch);

// log N(y; mean, sigma^2 I) per row, [B x 1].
Tensor gaussian_log_likelihood(const Tensor& y, const Tensor& mean, double sigma);

// log (1/K) sum_k exp(log_w[k]), stable.
double iw_log_mean_exp(std::span<const double> log_w);

class CfVae {
public:
    CfVae(ModelConfig cfg, nn::Rng& rng);

    // InputError for an empty past; ShapeError for a grid of the wrong width.
    ConditionEncoding encode_condition(const data::TrajectoryBatch& batch) const;
    PosteriorParams recognize(const Tensor& x_enc, const data::TrajectoryBatch& batch) const;
    // z [B x D] -> [B x 2F] relative positions. x_enc must be given exactly
    // when the decoder is conditioned; ConfigError otherwise.
    Tensor decode(const Tensor& z, const Tensor& x_enc) const;

    // One reparameterised draw per case.
    Tensor sample_posterior(const PosteriorParams& q, nn::Rng& rng) const;
    // log q(z | x, y) per row.
    Tensor posterior_log_prob(const Tensor& z, const PosteriorParams& q) const;
    Tensor posterior_entropy(const PosteriorParams& q) const;

    ElboTerms elbo(const data::TrajectoryBatch& batch, nn::Rng& rng, double beta = 1.0) const;

    // Importance-weighted -log p(y | x) per case with K posterior draws.
    // Cases run in parallel, case i drawing from a stream seeded by (seed, i).
    std::vector<double> estimate_cll(const data::TrajectoryBatch& batch, std::size_t k, std::uint64_t seed) const;

    // n futures per case in absolute coordinates: [B][n][F][2] flattened.
    std::vector<double> predict(const data::TrajectoryBatch& batch, std::size_t n, std::uint64_t seed) const;

    const ModelConfig& config() const { return cfg_; }
    const priors::Prior& prior() const { return *prior_; }
    std::size_t encoding_width() const;

    // Everything except the prior; the prior alone; both (prefixed names).
    nn::ParamSet model_params() const;
    nn::ParamSet prior_params() const;
    nn::ParamSet params() const;

private:
    void check_batch(const data::TrajectoryBatch& batch) const;

    ModelConfig cfg_;
    nn::LstmCell encoder_;
    nn::SocialPool social_;
    nn::LstmCell recognition_;
    nn::Linear rec_mean_, rec_logvar_;
    nn::LstmCell decoder_;
    nn::Linear dec_out_;
    std::unique_ptr<priors::Prior> prior_;
};

// Independent stream seed for (seed, index).
std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace condflow::model
