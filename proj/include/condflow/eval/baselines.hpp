#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "condflow/data/trajectory.hpp"

// Deterministic extrapolation baselines. A past is t x 2 points; every
// baseline returns K x horizon x 2 candidate futures, flattened.
namespace condflow::eval {

// Exponential weights over the last four past step vectors, oldest first.
inline constexpr double kShotgunWeights[4] = {0.0, 0.3, 0.7, 1.0};
inline constexpr double kShotgunAngles[5] = {0.0, 8.0, -8.0, 15.0, -15.0};  // degrees

// Last step vector of the past. InputError with fewer than two points.
std::vector<double> last_step_velocity(std::span<const double> past);
// Weighted mean of the last (up to four) step vectors with kShotgunWeights,
// normalised by the weights actually used.
std::vector<double> weighted_velocity(std::span<const double> past);

// Ten templates: each orientation in kShotgunAngles paired with the
// last-step velocity, then with the weighted velocity. A stationary past
// yields ten copies of the last point.
std::vector<double> shotgun(std::span<const double> past, std::size_t horizon);

// K rays at angles evenly spaced over [-theta_max, theta_max] degrees around
// the last heading, at the last-step speed; K = 1 gives the 0 degree ray.
std::vector<double> shotgun_uniform(std::span<const double> past, double theta_max_deg, std::size_t k,
                                    std::size_t horizon);

// Last displacement repeated.
std::vector<double> constant_velocity(std::span<const double> past, std::size_t horizon);

struct BaselineSpec {
    std::string name;      // shotgun | shotgun_uniform | constant_velocity
    double theta_max = 90.0;
    std::size_t k = 50;    // shotgun_uniform ray count
};

// Candidate count the baseline produces per case.
std::size_t baseline_count(const BaselineSpec& spec);
// Runs a baseline over every case: [B][K][F][2] flattened. InputError for
// unknown names.
std::vector<double> baseline_predictions(const BaselineSpec& spec, const data::TrajectoryBatch& batch);
bool is_baseline(const std::string& name);

}  // namespace condflow::eval
