#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "condflow/autodiff/tensor.hpp"
#include "condflow/flows/flow_stack.hpp"
#include "condflow/nn/layers.hpp"

namespace condflow::priors {

using ad::Tensor;

enum class PriorKind { conditional_flow, conditional_mog, standard_gaussian, unconditional_flow };

std::string to_string(PriorKind kind);
// Accepts the long names and the CLI short forms flow|mog|gauss|uflow.
PriorKind prior_kind_from_string(const std::string& name);

struct PriorConfig {
    PriorKind kind = PriorKind::conditional_flow;
    std::size_t latent_dim = 2;
    std::size_t cond_dim = 0;
    flows::FlowKind flow_kind = flows::FlowKind::nlsq;
    std::size_t flow_layers = 16;
    std::vector<std::size_t> flow_hidden{64, 64};
    std::size_t mog_components = 3;
    std::vector<std::size_t> mog_hidden{64};
};

// Latent prior p(z | x). log_prob returns [rows x 1]; sample draws one latent
// per row of cond.
class Prior {
public:
    virtual ~Prior() = default;

    virtual Tensor log_prob(const Tensor& z, const Tensor& cond) const = 0;
    virtual Tensor sample(const Tensor& cond, std::size_t rows, nn::Rng& rng) const = 0;
    virtual nn::ParamSet params() const = 0;

    const PriorConfig& config() const { return cfg_; }
    PriorKind kind() const { return cfg_.kind; }
    std::size_t latent_dim() const { return cfg_.latent_dim; }
    bool conditional() const {
        return cfg_.kind == PriorKind::conditional_flow || cfg_.kind == PriorKind::conditional_mog;
    }

protected:
    explicit Prior(PriorConfig cfg) : cfg_(std::move(cfg)) {}
    PriorConfig cfg_;
};

std::unique_ptr<Prior> make_prior(const PriorConfig& cfg, nn::Rng& rng);

// Spherical mixture parameters per row: log-weights [rows x M],
// means [rows x M*D] (component-major), scales [rows x M].
struct MogParams {
    Tensor log_weights;
    Tensor means;
    Tensor scales;
};

// log sum_m w_m N(z; mu_m, sigma_m^2 I). DomainError for non-positive scales.
Tensor mog_log_prob(const Tensor& z, const MogParams& params);

class StandardGaussianPrior final : public Prior {
public:
    explicit StandardGaussianPrior(PriorConfig cfg);
    Tensor log_prob(const Tensor& z, const Tensor& cond) const override;
    Tensor sample(const Tensor& cond, std::size_t rows, nn::Rng& rng) const override;
    nn::ParamSet params() const override { return {}; }
};

// Conditional or unconditional flow; the unconditional kind never reads cond.
class FlowPrior final : public Prior {
public:
    FlowPrior(PriorConfig cfg, nn::Rng& rng);
    Tensor log_prob(const Tensor& z, const Tensor& cond) const override;
    Tensor sample(const Tensor& cond, std::size_t rows, nn::Rng& rng) const override;
    nn::ParamSet params() const override { return stack_.params(); }
    const flows::FlowStack& stack() const { return stack_; }

private:
    flows::FlowStack stack_;
};

// Mixture of spherical Gaussians whose weights, means and scales come from a
// feed-forward network on the condition. softmax weights, softplus + 1e-3 scales.
class MogPrior final : public Prior {
public:
    MogPrior(PriorConfig cfg, nn::Rng& rng);
    Tensor log_prob(const Tensor& z, const Tensor& cond) const override;
    Tensor sample(const Tensor& cond, std::size_t rows, nn::Rng& rng) const override;
    nn::ParamSet params() const override { return net_.params(); }
    MogParams mixture(const Tensor& cond, std::size_t rows) const;

private:
    nn::Mlp net_;
};

inline constexpr double kMogScaleFloor = 1e-3;

}  // namespace condflow::priors
