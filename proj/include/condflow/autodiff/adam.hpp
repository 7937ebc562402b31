#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "condflow/autodiff/tensor.hpp"

namespace condflow::ad {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::int64_t step = 0;
};

// In-place bias-corrected Adam update of params from grads.
// ShapeError when the state or grads do not line up with params.
void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads,
               AdamState& state, const AdamConfig& cfg);

// Owns the moment buffers for a fixed parameter list and reads gradients
// straight from the tensors.
class Adam {
public:
    Adam(std::vector<Tensor> params, AdamConfig cfg);

    void step();
    void zero_grad();

    const AdamState& state() const { return state_; }
    void set_state(AdamState state);
    const std::vector<Tensor>& params() const { return params_; }
    AdamConfig& config() { return cfg_; }

private:
    std::vector<Tensor> params_;
    AdamConfig cfg_;
    AdamState state_;
};

}  // namespace condflow::ad
