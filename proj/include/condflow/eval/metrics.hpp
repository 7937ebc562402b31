#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "condflow/data/trajectory.hpp"

namespace condflow::eval {

// N candidate futures and the ground truth, each horizon x 2.
struct PredictionSet {
    std::size_t n = 0;
    std::size_t horizon = 0;
    std::vector<double> candidates;  // n x horizon x 2
    std::vector<double> truth;       // horizon x 2
};

// Euclidean error of candidate k at step j (0-based).
double step_error(const PredictionSet& set, std::size_t k, std::size_t j);
// Mean Euclidean error of candidate k over the whole horizon.
double mean_error(const PredictionSet& set, std::size_t k);

// Ranks candidates by whole-sequence mean error, keeps the best
// ceil(n_pct * N) and averages their error at each horizon step (1-based).
// InputError for an empty set, an empty selection or a horizon out of range.
std::vector<double> top_n_percent_error(const PredictionSet& set, double n_pct,
                                        std::span<const std::size_t> horizons);

struct MadeMfde {
    double made = 0.0;
    double mfde = 0.0;
};

// Minimum average and minimum final displacement error; the two minima may
// come from different candidates.
MadeMfde made_mfde(const PredictionSet& set);

struct ReportConfig {
    std::vector<std::size_t> horizons{3, 6, 9, 12};  // steps, 1-based
    double top_pct = 0.1;
    double frame_rate = 1.0;  // steps per second, for column labels
};

struct CaseMetrics {
    std::vector<double> top_errors;  // one per horizon
    double made = 0.0;
    double mfde = 0.0;
    double neg_cll = 0.0;
};

struct MetricReport {
    ReportConfig config;
    std::size_t n = 0;  // candidates per case
    bool has_cll = false;
    std::vector<CaseMetrics> cases;
    CaseMetrics summary;  // means over cases
};

// candidates: [B][N][F][2] flattened for the cases of `truth`. neg_cll is
// optional (empty) or one value per case. Cases are scored in parallel and
// reduced in case order.
MetricReport metric_report(const data::TrajectoryBatch& truth, std::span<const double> candidates, std::size_t n,
                           const ReportConfig& cfg, std::span<const double> neg_cll = {});

// One row per case plus a final "mean" row. Columns:
// case, top<pct>@<seconds>s..., made, mfde[, neg_cll]
void write_report_csv(std::ostream& out, const MetricReport& report);
// Summary only: config, counts and mean metrics.
std::string report_json(const MetricReport& report);

}  // namespace condflow::eval
