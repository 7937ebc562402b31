#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "condflow/autodiff/tensor.hpp"

namespace condflow::testsupport {

struct GradCheckResult {
    double worst_rel_error = 0.0;  // max over tensors of ||analytic - numeric|| / max(norms)
    std::size_t checked = 0;
};

// Central finite differences over every entry of every tensor in `wrt`,
// compared block-wise against the tape's analytic gradient.
inline GradCheckResult gradcheck(const std::function<ad::Tensor()>& loss_fn, std::vector<ad::Tensor> wrt,
                                 double h = 1e-5) {
    for (auto& t : wrt) t.zero_grad();
    loss_fn().backward();
    GradCheckResult res;
    for (auto& t : wrt) {
        std::vector<double> analytic(t.size(), 0.0);
        if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
        std::vector<double> numeric(t.size());
        auto data = t.mutable_data();
        for (std::size_t i = 0; i < t.size(); ++i) {
            const double orig = data[i];
            data[i] = orig + h;
            const double fp = loss_fn().item();
            data[i] = orig - h;
            const double fm = loss_fn().item();
            data[i] = orig;
            numeric[i] = (fp - fm) / (2.0 * h);
        }
        double diff = 0.0, na = 0.0, nn = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
            na += analytic[i] * analytic[i];
            nn += numeric[i] * numeric[i];
        }
        const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-8});
        res.worst_rel_error = std::max(res.worst_rel_error, std::sqrt(diff) / denom);
        res.checked += t.size();
        t.zero_grad();
    }
    return res;
}

}  // namespace condflow::testsupport
