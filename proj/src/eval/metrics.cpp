#include "condflow/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numeric>
#include <ostream>

#include "json.hpp"

#include "condflow/errors.hpp"

namespace condflow::eval {
namespace {

void check_set(const PredictionSet& set) {
    if (set.n == 0) throw InputError("prediction set is empty");
    if (set.horizon == 0) throw InputError("prediction set has no horizon");
    if (set.candidates.size() != set.n * set.horizon * 2 || set.truth.size() != set.horizon * 2)
        throw InputError("prediction set sizes do not match n x horizon x 2");
}

std::size_t selected_count(double n_pct, std::size_t n) {
    // Guard against 0.1 * 30 landing a hair above 3.
    const double raw = n_pct * static_cast<double>(n);
    const double count = std::ceil(raw - 1e-9 * std::max(1.0, raw));
    return count < 1.0 ? 0 : static_cast<std::size_t>(count);
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string format_short(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%g", v);
    return buf;
}

}  // namespace

double step_error(const PredictionSet& set, std::size_t k, std::size_t j) {
    const double* c = set.candidates.data() + (k * set.horizon + j) * 2;
    const double* t = set.truth.data() + j * 2;
    return std::hypot(c[0] - t[0], c[1] - t[1]);
}

double mean_error(const PredictionSet& set, std::size_t k) {
    double s = 0.0;
    for (std::size_t j = 0; j < set.horizon; ++j) s += step_error(set, k, j);
    return s / static_cast<double>(set.horizon);
}

std::vector<double> top_n_percent_error(const PredictionSet& set, double n_pct, std::span<const std::size_t> horizons) {
    check_set(set);
    const std::size_t count = selected_count(n_pct, set.n);
    if (count < 1) throw InputError("top-n%: selection is empty");
    if (count > set.n) throw InputError("top-n%: percentage above 100");
    for (std::size_t h : horizons)
        if (h < 1 || h > set.horizon) throw InputError("top-n%: horizon " + std::to_string(h) + " out of range");

    std::vector<double> score(set.n);
    for (std::size_t k = 0; k < set.n; ++k) score[k] = mean_error(set, k);
    std::vector<std::size_t> order(set.n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });

    std::vector<double> out;
    out.reserve(horizons.size());
    for (std::size_t h : horizons) {
        double s = 0.0;
        for (std::size_t i = 0; i < count; ++i) s += step_error(set, order[i], h - 1);
        out.push_back(s / static_cast<double>(count));
    }
    return out;
}

MadeMfde made_mfde(const PredictionSet& set) {
    check_set(set);
    MadeMfde r{mean_error(set, 0), step_error(set, 0, set.horizon - 1)};
    for (std::size_t k = 1; k < set.n; ++k) {
        r.made = std::min(r.made, mean_error(set, k));
        r.mfde = std::min(r.mfde, step_error(set, k, set.horizon - 1));
    }
    return r;
}

MetricReport metric_report(const data::TrajectoryBatch& truth, std::span<const double> candidates, std::size_t n,
                           const ReportConfig& cfg, std::span<const double> neg_cll) {
    const std::size_t b = truth.size(), f = truth.future_len;
    if (n == 0) throw InputError("metric report: N must be positive");
    if (candidates.size() != b * n * f * 2) throw InputError("metric report: candidate count does not match cases");
    if (!neg_cll.empty() && neg_cll.size() != b) throw InputError("metric report: one -CLL value per case expected");
    if (b == 0) throw InputError("metric report: no test cases");

    MetricReport rep;
    rep.config = cfg;
    rep.n = n;
    rep.has_cll = !neg_cll.empty();
    rep.cases.resize(b);
    std::exception_ptr error;
    const auto count = static_cast<std::int64_t>(b);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t ci = 0; ci < count; ++ci) {
        try {
            const auto c = static_cast<std::size_t>(ci);
            PredictionSet set;
            set.n = n;
            set.horizon = f;
            set.candidates.assign(candidates.begin() + static_cast<std::ptrdiff_t>(c * n * f * 2),
                                  candidates.begin() + static_cast<std::ptrdiff_t>((c + 1) * n * f * 2));
            set.truth.assign(truth.future.begin() + static_cast<std::ptrdiff_t>(c * f * 2),
                             truth.future.begin() + static_cast<std::ptrdiff_t>((c + 1) * f * 2));
            CaseMetrics& m = rep.cases[c];
            m.top_errors = top_n_percent_error(set, cfg.top_pct, cfg.horizons);
            const auto mm = made_mfde(set);
            m.made = mm.made;
            m.mfde = mm.mfde;
            m.neg_cll = rep.has_cll ? neg_cll[c] : 0.0;
        } catch (...) {
#pragma omp critical(condflow_report_error)
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);

    rep.summary.top_errors.assign(cfg.horizons.size(), 0.0);
    for (const auto& m : rep.cases) {
        for (std::size_t h = 0; h < cfg.horizons.size(); ++h) rep.summary.top_errors[h] += m.top_errors[h];
        rep.summary.made += m.made;
        rep.summary.mfde += m.mfde;
        rep.summary.neg_cll += m.neg_cll;
    }
    const double inv = 1.0 / static_cast<double>(b);
    for (auto& v : rep.summary.top_errors) v *= inv;
    rep.summary.made *= inv;
    rep.summary.mfde *= inv;
    rep.summary.neg_cll *= inv;
    return rep;
}

void write_report_csv(std::ostream& out, const MetricReport& rep) {
    const std::string pct = format_short(rep.config.top_pct * 100.0);
    out << "case";
    for (std::size_t h : rep.config.horizons)
        out << ",top" << pct << "@" << format_short(static_cast<double>(h) / rep.config.frame_rate) << "s";
    out << ",made,mfde";
    if (rep.has_cll) out << ",neg_cll";
    out << "\n";
    auto row = [&](const std::string& label, const CaseMetrics& m) {
        out << label;
        for (double e : m.top_errors) out << "," << format_double(e);
        out << "," << format_double(m.made) << "," << format_double(m.mfde);
        if (rep.has_cll) out << "," << format_double(m.neg_cll);
        out << "\n";
    };
    for (std::size_t c = 0; c < rep.cases.size(); ++c) row(std::to_string(c), rep.cases[c]);
    row("mean", rep.summary);
}

std::string report_json(const MetricReport& rep) {
    nlohmann::ordered_json j;
    j["cases"] = rep.cases.size();
    j["n"] = rep.n;
    j["top_pct"] = rep.config.top_pct;
    j["frame_rate"] = rep.config.frame_rate;
    nlohmann::ordered_json hz = nlohmann::ordered_json::array();
    for (std::size_t h = 0; h < rep.config.horizons.size(); ++h)
        hz.push_back({{"step", rep.config.horizons[h]},
                      {"seconds", static_cast<double>(rep.config.horizons[h]) / rep.config.frame_rate},
                      {"top_error", rep.summary.top_errors[h]}});
    j["horizons"] = hz;
    j["made"] = rep.summary.made;
    j["mfde"] = rep.summary.mfde;
    if (rep.has_cll) j["neg_cll"] = rep.summary.neg_cll;
    return j.dump(2) + "\n";
}

}  // namespace condflow::eval
