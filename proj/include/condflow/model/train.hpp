#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "condflow/autodiff/adam.hpp"
#include "condflow/data/density.hpp"
#include "condflow/data/trajectory.hpp"
#include "condflow/model/cfvae.hpp"

namespace condflow::model {

enum class TrainMode { joint, alternating };

std::string to_string(TrainMode mode);
TrainMode train_mode_from_string(const std::string& name);

struct TrainConfig {
    std::size_t steps = 2000;
    std::size_t batch_size = 64;
    double lr = 1e-3;
    TrainMode mode = TrainMode::joint;
    std::uint64_t seed = 1;
    std::size_t kl_cycle = 0;  // 0 disables cyclic KL annealing
    double kl_ramp = 0.5;
};

// Everything needed to continue a run exactly where it stopped.
struct TrainState {
    std::size_t step = 0;
    ad::AdamState model_opt;
    ad::AdamState prior_opt;
    std::vector<double> trace;  // loss per completed step
};

// Linear ramp 0 -> 1 over the first ramp_fraction of every cycle, then 1.
double cyclic_kl_beta(std::size_t step, std::size_t cycle_len, double ramp_fraction = 0.5);

// Adam on the batch-mean negative ELBO until state.step == cfg.steps. Step s
// draws its minibatch and noise from stream_seed(cfg.seed, s), so a resumed
// run reproduces an uninterrupted one. Joint mode updates every parameter
// each step; alternating mode updates the encoder/recognition/decoder group on
// even steps and the prior on odd steps. TrainingError names the step on a
// non-finite loss.
TrainState train(const CfVae& model, const data::TrajectoryBatch& data, const TrainConfig& cfg,
                 TrainState state = {}, const std::function<void(std::size_t, double)>& on_step = {});

// Maximum-likelihood fit of a prior used directly as a conditional density
// over 2-D points.
struct DensityFitConfig {
    std::size_t steps = 2000;
    std::size_t batch_size = 128;
    double lr = 3e-3;
    std::uint64_t seed = 1;
};

std::vector<double> fit_density(const priors::Prior& density, const data::DensitySample& train,
                                const DensityFitConfig& cfg);
// Mean negative log-likelihood of held-out points.
double mean_nll(const priors::Prior& density, const data::DensitySample& sample);

}  // namespace condflow::model
