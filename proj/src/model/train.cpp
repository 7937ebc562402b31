#include "condflow/model/train.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "condflow/errors.hpp"

namespace condflow::model {
namespace {

std::vector<std::size_t> minibatch(std::size_t n, std::size_t size, nn::Rng& rng) {
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::size_t> idx(std::min(size, n));
    for (auto& i : idx) i = pick(rng);
    return idx;
}

std::vector<std::vector<double>> grads_of(const std::vector<Tensor>& params) {
    std::vector<std::vector<double>> g;
    g.reserve(params.size());
    for (const auto& p : params) {
        if (p.has_grad())
            g.emplace_back(p.grad().begin(), p.grad().end());
        else
            g.emplace_back(p.size(), 0.0);
    }
    return g;
}

void zero_grads(std::vector<Tensor>& params) {
    for (auto& p : params) p.zero_grad();
}

}  // namespace

std::string to_string(TrainMode mode) { return mode == TrainMode::joint ? "joint" : "alternating"; }

TrainMode train_mode_from_string(const std::string& name) {
    if (name == "joint") return TrainMode::joint;
    if (name == "alternating") return TrainMode::alternating;
    throw ConfigError("unknown training mode '" + name + "' (valid: joint, alternating)");
}

double cyclic_kl_beta(std::size_t step, std::size_t cycle_len, double ramp_fraction) {
    if (cycle_len == 0) throw ConfigError("cyclic KL: cycle length must be positive");
    if (!(ramp_fraction > 0.0) || ramp_fraction > 1.0) throw ConfigError("cyclic KL: ramp fraction must be in (0, 1]");
    const double pos = static_cast<double>(step % cycle_len) / static_cast<double>(cycle_len);
    return std::min(1.0, pos / ramp_fraction);
}

TrainState train(const CfVae& model, const data::TrajectoryBatch& data, const TrainConfig& cfg, TrainState state,
                 const std::function<void(std::size_t, double)>& on_step) {
    if (data.size() == 0) throw InputError("train: empty dataset");
    if (cfg.batch_size == 0) throw ConfigError("train: batch_size must be positive");
    auto model_params = model.model_params().tensors();
    auto prior_params = model.prior_params().tensors();
    const ad::AdamConfig adam{cfg.lr};
    if (state.trace.size() != state.step) throw ConfigError("train: resume state has an inconsistent trace");

    for (; state.step < cfg.steps; ++state.step) {
        nn::Rng rng(stream_seed(cfg.seed, state.step));
        const auto batch = data.select(minibatch(data.size(), cfg.batch_size, rng));
        const double beta = cfg.kl_cycle > 0 ? cyclic_kl_beta(state.step, cfg.kl_cycle, cfg.kl_ramp) : 1.0;

        zero_grads(model_params);
        zero_grads(prior_params);
        ElboTerms terms;
        try {
            terms = model.elbo(batch, rng, beta);
        } catch (const DomainError& e) {
            throw TrainingError("step " + std::to_string(state.step) + ": " + e.what());
        } catch (const InvertibilityError& e) {
            throw TrainingError("step " + std::to_string(state.step) + ": " + e.what());
        }
        const Tensor loss = -ad::mean(terms.elbo);
        const double value = loss.item();
        if (!std::isfinite(value)) {
            std::ostringstream msg;
            msg << "step " << state.step << ": non-finite loss (recon " << ad::mean(terms.recon).item()
                << ", entropy " << ad::mean(terms.entropy).item() << ", prior " << ad::mean(terms.prior).item() << ")";
            throw TrainingError(msg.str());
        }
        loss.backward();

        const bool update_model = cfg.mode == TrainMode::joint || state.step % 2 == 0;
        const bool update_prior = cfg.mode == TrainMode::joint || state.step % 2 == 1;
        if (update_model && !model_params.empty())
            ad::adam_step(model_params, grads_of(model_params), state.model_opt, adam);
        if (update_prior && !prior_params.empty())
            ad::adam_step(prior_params, grads_of(prior_params), state.prior_opt, adam);
        state.trace.push_back(value);
        if (on_step) on_step(state.step, value);
    }
    return state;
}

std::vector<double> fit_density(const priors::Prior& density, const data::DensitySample& train,
                                const DensityFitConfig& cfg) {
    const std::size_t n = train.y.rows();
    if (n == 0) throw InputError("fit_density: empty training set");
    auto params = density.params().tensors();
    ad::AdamState opt;
    const ad::AdamConfig adam{cfg.lr};
    std::vector<double> trace;
    trace.reserve(cfg.steps);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        nn::Rng rng(stream_seed(cfg.seed, step));
        const auto idx = minibatch(n, cfg.batch_size, rng);
        std::vector<double> y, c;
        const std::size_t cd = train.cond.cols();
        for (std::size_t i : idx) {
            y.push_back(train.y.at(i, 0));
            y.push_back(train.y.at(i, 1));
            for (std::size_t j = 0; j < cd; ++j) c.push_back(train.cond.at(i, j));
        }
        const Tensor cond = cd > 0 ? Tensor::from(idx.size(), cd, std::move(c)) : Tensor();
        zero_grads(params);
        Tensor loss;
        try {
            loss = -ad::mean(density.log_prob(Tensor::from(idx.size(), 2, std::move(y)), cond));
        } catch (const DomainError& e) {
            throw TrainingError("step " + std::to_string(step) + ": " + e.what());
        } catch (const InvertibilityError& e) {
            throw TrainingError("step " + std::to_string(step) + ": " + e.what());
        }
        const double value = loss.item();
        if (!std::isfinite(value))
            throw TrainingError("step " + std::to_string(step) + ": non-finite density loss");
        loss.backward();
        if (!params.empty()) ad::adam_step(params, grads_of(params), opt, adam);
        trace.push_back(value);
    }
    return trace;
}

double mean_nll(const priors::Prior& density, const data::DensitySample& sample) {
    ad::NoGradGuard guard;
    const Tensor cond = sample.cond.cols() > 0 ? sample.cond : Tensor();
    return -ad::mean(density.log_prob(sample.y, cond)).item();
}

}  // namespace condflow::model
