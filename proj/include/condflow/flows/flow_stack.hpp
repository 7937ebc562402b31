#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "condflow/autodiff/tensor.hpp"
#include "condflow/flows/nlsq.hpp"
#include "condflow/nn/layers.hpp"

namespace condflow::flows {

using ad::Tensor;

enum class FlowKind { nlsq, affine };

std::string to_string(FlowKind kind);
FlowKind flow_kind_from_string(const std::string& name);

struct FlowConfig {
    FlowKind kind = FlowKind::nlsq;
    std::size_t layers = 16;
    std::size_t latent_dim = 2;
    std::size_t cond_dim = 0;  // 0 => unconditional
    std::vector<std::size_t> hidden{64, 64};
};

// Constrained NLSq coefficients as differentiable [batch x k] tensors.
struct CoeffTensors {
    Tensor a, b, c, d, g;
};

// raw: [batch x 5k], blocks a|b|c|d|g of width k each.
CoeffTensors constrain_coeffs(const Tensor& raw);

// Differentiable z -> eps for one coupling half. Returns eps and the per-row
// log-determinant [batch x 1].
std::pair<Tensor, Tensor> nlsq_inverse(const Tensor& z, const Tensor& raw);
// raw: [batch x 2k], blocks shift|log_scale.
std::pair<Tensor, Tensor> affine_inverse(const Tensor& z, const Tensor& raw);

// One split coupling layer. Even layers transform the leading ceil(D/2)
// coordinates, odd layers the trailing floor(D/2); the conditioner only sees
// the frozen half and the condition.
class CouplingLayer {
public:
    CouplingLayer(std::size_t index, const FlowConfig& cfg, nn::Rng& rng);

    // z -> eps with [batch x 1] log|det d eps / d z|.
    std::pair<Tensor, Tensor> inverse(const Tensor& z, const Tensor& cond) const;
    // eps -> z, not differentiable.
    Tensor forward(const Tensor& eps, const Tensor& cond) const;
    // Raw conditioner output for a given frozen half.
    Tensor conditioner_output(const Tensor& frozen, const Tensor& cond) const;

    std::size_t transformed_begin() const { return t_begin_; }
    std::size_t transformed_end() const { return t_end_; }
    FlowKind kind() const { return kind_; }
    nn::ParamSet params() const { return conditioner_.params(); }

private:
    Tensor frozen_part(const Tensor& x) const;
    Tensor assemble(const Tensor& transformed, const Tensor& frozen) const;
    Tensor conditioner_input(const Tensor& frozen, const Tensor& cond) const;

    FlowKind kind_;
    std::size_t dim_, cond_dim_;
    std::size_t t_begin_, t_end_;
    nn::Mlp conditioner_;
};

// Stack of coupling layers between a standard normal base eps and latent z.
// layers()[0] sits next to the base distribution.
class FlowStack {
public:
    FlowStack() = default;
    FlowStack(const FlowConfig& cfg, nn::Rng& rng);

    // log p(z | cond) = log N(eps; 0, I) + sum of layer log-dets. [batch x 1].
    Tensor log_prob(const Tensor& z, const Tensor& cond) const;
    // z -> eps through every layer, with the summed log-det.
    std::pair<Tensor, Tensor> inverse(const Tensor& z, const Tensor& cond) const;
    // eps -> z through every layer.
    Tensor forward(const Tensor& eps, const Tensor& cond) const;
    // One draw per row of cond (cond may have zero columns).
    Tensor sample(const Tensor& cond, std::size_t rows, nn::Rng& rng) const;

    const FlowConfig& config() const { return cfg_; }
    const std::vector<CouplingLayer>& layers() const { return layers_; }
    nn::ParamSet params() const;

private:
    FlowConfig cfg_;
    std::vector<CouplingLayer> layers_;
};

// Standard normal log-density per row, [batch x 1].
Tensor standard_normal_log_prob(const Tensor& x);

// [rows x dim] of independent standard normal draws.
Tensor standard_normal(std::size_t rows, std::size_t dim, nn::Rng& rng);

}  // namespace condflow::flows
