#include "condflow/autodiff/adam.hpp"

#include <cmath>

#include "condflow/errors.hpp"

namespace condflow::ad {

void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads,
               AdamState& state, const AdamConfig& cfg) {
    if (grads.size() != params.size()) throw ShapeError("adam: grads do not match params");
    if (state.m.empty() && state.v.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.size(), 0.0);
            state.v.emplace_back(p.size(), 0.0);
        }
    }
    if (state.m.size() != params.size() || state.v.size() != params.size())
        throw ShapeError("adam: state does not match params");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (state.m[i].size() != params[i].size() || state.v[i].size() != params[i].size() ||
            grads[i].size() != params[i].size())
            throw ShapeError("adam: shape mismatch at parameter " + std::to_string(i));
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(cfg.beta1, t);
    const double c2 = 1.0 - std::pow(cfg.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto w = params[i].mutable_data();
        auto& m = state.m[i];
        auto& v = state.v[i];
        const auto& g = grads[i];
        for (std::size_t j = 0; j < w.size(); ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            const double mhat = m[j] / c1;
            const double vhat = v[j] / c2;
            w[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

Adam::Adam(std::vector<Tensor> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {}

void Adam::step() {
    std::vector<std::vector<double>> grads;
    grads.reserve(params_.size());
    for (auto& p : params_) {
        if (p.has_grad())
            grads.emplace_back(p.grad().begin(), p.grad().end());
        else
            grads.emplace_back(p.size(), 0.0);
    }
    adam_step(params_, grads, state_, cfg_);
}

void Adam::zero_grad() {
    for (auto& p : params_) p.zero_grad();
}

void Adam::set_state(AdamState state) {
    if (!state.m.empty() && state.m.size() != params_.size())
        throw ShapeError("adam: restored state does not match params");
    state_ = std::move(state);
}

}  // namespace condflow::ad
