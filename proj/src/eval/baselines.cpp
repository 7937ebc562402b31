#include "condflow/eval/baselines.hpp"

#include <cmath>
#include <numbers>

#include "condflow/errors.hpp"

namespace condflow::eval {
namespace {

std::size_t point_count(std::span<const double> past) {
    if (past.size() % 2 != 0) throw InputError("baseline: past must hold 2-D points");
    const std::size_t t = past.size() / 2;
    if (t < 2) throw InputError("baseline: past needs at least two points");
    return t;
}

void rollout(std::span<const double> past, double vx, double vy, std::size_t horizon, std::vector<double>& out) {
    const double x0 = past[past.size() - 2], y0 = past[past.size() - 1];
    for (std::size_t j = 1; j <= horizon; ++j) {
        out.push_back(x0 + static_cast<double>(j) * vx);
        out.push_back(y0 + static_cast<double>(j) * vy);
    }
}

std::pair<double, double> rotate(const std::vector<double>& v, double deg) {
    const double a = deg * std::numbers::pi / 180.0;
    const double c = std::cos(a), s = std::sin(a);
    return {c * v[0] - s * v[1], s * v[0] + c * v[1]};
}

}  // namespace

std::vector<double> last_step_velocity(std::span<const double> past) {
    const std::size_t t = point_count(past);
    return {past[2 * t - 2] - past[2 * t - 4], past[2 * t - 1] - past[2 * t - 3]};
}

std::vector<double> weighted_velocity(std::span<const double> past) {
    const std::size_t t = point_count(past);
    const std::size_t steps = std::min<std::size_t>(t - 1, 4);
    double vx = 0.0, vy = 0.0, total = 0.0;
    for (std::size_t i = 0; i < steps; ++i) {
        // i = 0 is the newest step and takes the last weight.
        const double w = kShotgunWeights[3 - i];
        const std::size_t p = t - 1 - i;
        vx += w * (past[2 * p] - past[2 * p - 2]);
        vy += w * (past[2 * p + 1] - past[2 * p - 1]);
        total += w;
    }
    return {vx / total, vy / total};
}

std::vector<double> shotgun(std::span<const double> past, std::size_t horizon) {
    const auto last = last_step_velocity(past);
    const auto weighted = weighted_velocity(past);
    std::vector<double> out;
    out.reserve(10 * horizon * 2);
    for (const auto* v : {&last, &weighted})
        for (double deg : kShotgunAngles) {
            const auto [vx, vy] = rotate(*v, deg);
            rollout(past, vx, vy, horizon, out);
        }
    return out;
}

std::vector<double> shotgun_uniform(std::span<const double> past, double theta_max_deg, std::size_t k,
                                    std::size_t horizon) {
    if (k < 1) throw InputError("shotgun_uniform: K must be at least 1");
    const auto v = last_step_velocity(past);
    std::vector<double> out;
    out.reserve(k * horizon * 2);
    for (std::size_t i = 0; i < k; ++i) {
        const double deg =
            k == 1 ? 0.0 : -theta_max_deg + 2.0 * theta_max_deg * static_cast<double>(i) / static_cast<double>(k - 1);
        const auto [vx, vy] = rotate(v, deg);
        rollout(past, vx, vy, horizon, out);
    }
    return out;
}

std::vector<double> constant_velocity(std::span<const double> past, std::size_t horizon) {
    const auto v = last_step_velocity(past);
    std::vector<double> out;
    out.reserve(horizon * 2);
    rollout(past, v[0], v[1], horizon, out);
    return out;
}

bool is_baseline(const std::string& name) {
    return name == "shotgun" || name == "shotgun_uniform" || name == "constant_velocity";
}

std::size_t baseline_count(const BaselineSpec& spec) {
    if (spec.name == "shotgun") return 10;
    if (spec.name == "shotgun_uniform") return spec.k;
    if (spec.name == "constant_velocity") return 1;
    throw InputError("unknown baseline '" + spec.name + "' (valid: shotgun, shotgun_uniform, constant_velocity)");
}

std::vector<double> baseline_predictions(const BaselineSpec& spec, const data::TrajectoryBatch& batch) {
    const std::size_t k = baseline_count(spec);
    const std::size_t t = batch.past_len, f = batch.future_len;
    std::vector<double> out;
    out.reserve(batch.size() * k * f * 2);
    for (std::size_t c = 0; c < batch.size(); ++c) {
        const std::span<const double> past(batch.past.data() + c * t * 2, t * 2);
        std::vector<double> cand;
        if (spec.name == "shotgun")
            cand = shotgun(past, f);
        else if (spec.name == "shotgun_uniform")
            cand = shotgun_uniform(past, spec.theta_max, spec.k, f);
        else
            cand = constant_velocity(past, f);
        out.insert(out.end(), cand.begin(), cand.end());
    }
    return out;
}

}  // namespace condflow::eval
