#include <gtest/gtest.h>

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "condflow/errors.hpp"
#include "condflow/eval/baselines.hpp"
#include "condflow/eval/metrics.hpp"

using namespace condflow;
using namespace condflow::eval;

namespace {

std::vector<double> straight_past(std::size_t t, double vx, double vy) {
    std::vector<double> p;
    for (std::size_t i = 0; i < t; ++i) {
        p.push_back(1.0 + vx * i);
        p.push_back(-2.0 + vy * i);
    }
    return p;
}

double heading_of_first_step(const std::vector<double>& cand, std::size_t k, std::size_t horizon,
                             const std::vector<double>& past) {
    const double* c = cand.data() + k * horizon * 2;
    return std::atan2(c[1] - past[past.size() - 1], c[0] - past[past.size() - 2]);
}

PredictionSet random_set(std::mt19937_64& rng, std::size_t n, std::size_t horizon) {
    std::normal_distribution<double> d(0.0, 1.0);
    PredictionSet s{n, horizon, std::vector<double>(n * horizon * 2), std::vector<double>(horizon * 2)};
    for (auto& v : s.candidates) v = d(rng);
    for (auto& v : s.truth) v = d(rng);
    return s;
}

// Exhaustive reference: full sort by (error, index), average the head.
std::vector<double> brute_top(const PredictionSet& s, std::size_t count, const std::vector<std::size_t>& hs) {
    std::vector<std::pair<double, std::size_t>> rank;
    for (std::size_t k = 0; k < s.n; ++k) {
        double e = 0.0;
        for (std::size_t j = 0; j < s.horizon; ++j) {
            const double dx = s.candidates[(k * s.horizon + j) * 2] - s.truth[j * 2];
            const double dy = s.candidates[(k * s.horizon + j) * 2 + 1] - s.truth[j * 2 + 1];
            e += std::hypot(dx, dy);
        }
        rank.emplace_back(e / s.horizon, k);
    }
    std::sort(rank.begin(), rank.end());
    std::vector<double> out;
    for (std::size_t h : hs) {
        double acc = 0.0;
        for (std::size_t i = 0; i < count; ++i) acc += step_error(s, rank[i].second, h - 1);
        out.push_back(acc / count);
    }
    return out;
}

data::TrajectoryBatch small_batch(std::size_t cases, std::uint64_t seed) {
    data::HighwaySpec spec;
    spec.past_len = 5;
    spec.future_len = 6;
    spec.p_major = 0.7;
    nn::Rng rng(seed);
    return data::gen_highway(spec, cases, rng);
}

}  // namespace

// ---------------------------------------------------------------- baselines

TEST(Shotgun, StraightPastContinuesExactly) {
    const auto past = straight_past(5, 0.5, 0.25);
    const auto c = shotgun(past, 4);
    ASSERT_EQ(c.size(), 10u * 4 * 2);
    for (std::size_t j = 0; j < 4; ++j) {
        EXPECT_NEAR(c[j * 2], 1.0 + 0.5 * (4 + j + 1), 1e-12);
        EXPECT_NEAR(c[j * 2 + 1], -2.0 + 0.25 * (4 + j + 1), 1e-12);
    }
}

TEST(Shotgun, OrientationsRotateDisplacement) {
    const std::vector<double> past{0, 0, 0.3, 0.1, 0.5, 0.4, 1.0, 0.6};
    const std::size_t f = 3;
    const auto c = shotgun(past, f);
    const double x0 = past[6], y0 = past[7];
    for (std::size_t tmpl : {0u, 5u}) {
        for (std::size_t o = 1; o < 5; ++o) {
            const double a = kShotgunAngles[o] * std::numbers::pi / 180.0;
            for (std::size_t j = 0; j < f; ++j) {
                const double dx = c[(tmpl * f + j) * 2] - x0, dy = c[(tmpl * f + j) * 2 + 1] - y0;
                const double* r = c.data() + ((tmpl + o) * f + j) * 2;
                EXPECT_NEAR(r[0] - x0, std::cos(a) * dx - std::sin(a) * dy, 1e-12);
                EXPECT_NEAR(r[1] - y0, std::sin(a) * dx + std::cos(a) * dy, 1e-12);
            }
        }
    }
}

TEST(Shotgun, WeightedVelocityMatchesDirectSum) {
    const std::vector<double> past{0, 0, 1, 0, 1.5, 0.5, 2.5, 0.7, 2.9, 1.5, 3.0, 2.5};
    // Last four steps, oldest first, weighted (0, 0.3, 0.7, 1.0).
    const double steps[4][2] = {{0.5, 0.5}, {1.0, 0.2}, {0.4, 0.8}, {0.1, 1.0}};
    const double w[4] = {0.0, 0.3, 0.7, 1.0};
    double vx = 0, vy = 0;
    for (int i = 0; i < 4; ++i) {
        vx += w[i] * steps[i][0];
        vy += w[i] * steps[i][1];
    }
    const auto v = weighted_velocity(past);
    EXPECT_NEAR(v[0], vx / 2.0, 1e-14);
    EXPECT_NEAR(v[1], vy / 2.0, 1e-14);
    // Templates 5..9 use it.
    const auto c = shotgun(past, 1);
    EXPECT_NEAR(c[10], 3.0 + vx / 2.0, 1e-12);
    EXPECT_NEAR(c[11], 2.5 + vy / 2.0, 1e-12);
}

TEST(Shotgun, ShortPastUsesAvailableSteps) {
    const std::vector<double> past{0, 0, 1, 0, 1, 2};
    const auto v = weighted_velocity(past);
    // Two steps take the two newest weights 0.7 and 1.0.
    EXPECT_NEAR(v[0], (0.7 * 1 + 1.0 * 0) / 1.7, 1e-14);
    EXPECT_NEAR(v[1], (0.7 * 0 + 1.0 * 2) / 1.7, 1e-14);
}

TEST(Shotgun, StationaryPastStaysPut) {
    const std::vector<double> past{2, 3, 2, 3, 2, 3};
    for (double v : shotgun(past, 3)) EXPECT_TRUE(v == 2.0 || v == 3.0);
    const auto c = shotgun(past, 3);
    for (std::size_t i = 0; i < c.size(); i += 2) {
        EXPECT_EQ(c[i], 2.0);
        EXPECT_EQ(c[i + 1], 3.0);
    }
}

TEST(Shotgun, SinglePointRejected) {
    EXPECT_THROW(shotgun(std::vector<double>{1, 1}, 3), InputError);
    EXPECT_THROW(constant_velocity(std::vector<double>{}, 3), InputError);
    EXPECT_THROW(shotgun_uniform(std::vector<double>{1, 1}, 90, 3, 3), InputError);
}

TEST(ShotgunUniform, SingleRayIsStraight) {
    const std::vector<double> past{0, 0, 0.4, 0.3, 1.0, 0.5};
    EXPECT_EQ(shotgun_uniform(past, 90, 1, 5), constant_velocity(past, 5));
}

TEST(ShotgunUniform, EvenlySpacedAngles) {
    const auto past = straight_past(3, 1.0, 0.0);
    const auto c = shotgun_uniform(past, 90, 3, 2);
    const double expected[3] = {-90, 0, 90};
    for (std::size_t k = 0; k < 3; ++k)
        EXPECT_NEAR(heading_of_first_step(c, k, 2, past) * 180 / std::numbers::pi, expected[k], 1e-10);
}

TEST(ShotgunUniform, SharedSpeedAndBoundedAngles) {
    const std::vector<double> past{0, 0, 0.2, 0.3, 0.6, 0.9};
    const double heading = std::atan2(0.6, 0.4);
    for (double theta : {90.0, 135.0}) {
        const std::size_t k = 37;
        const auto c = shotgun_uniform(past, theta, k, 4);
        for (std::size_t i = 0; i < k; ++i) {
            const double* r = c.data() + i * 8;
            EXPECT_NEAR(std::hypot(r[0] - 0.6, r[1] - 0.9), std::hypot(0.4, 0.6), 1e-12);
            const double rel = std::remainder(heading_of_first_step(c, i, 4, past) - heading, 2 * std::numbers::pi);
            EXPECT_LE(std::abs(rel), theta * std::numbers::pi / 180 + 1e-12);
        }
    }
}

TEST(ConstantVelocity, StraightAndStationary) {
    const auto past = straight_past(4, 0.3, -0.2);
    const auto c = constant_velocity(past, 3);
    PredictionSet s{1, 3, c, {}};
    for (std::size_t j = 1; j <= 3; ++j) {
        s.truth.push_back(1.0 + 0.3 * (3 + j));
        s.truth.push_back(-2.0 - 0.2 * (3 + j));
    }
    EXPECT_NEAR(made_mfde(s).made, 0.0, 1e-12);
    const std::vector<double> still{5, 5, 5, 5};
    EXPECT_EQ(constant_velocity(still, 2), (std::vector<double>{5, 5, 5, 5}));
}

TEST(ConstantVelocity, MatchesShotgunFirstTemplate) {
    const std::vector<double> past{0, 0, 0.4, 0.3, 1.0, 0.5, 1.2, 1.1};
    const auto sg = shotgun(past, 6);
    EXPECT_EQ(constant_velocity(past, 6), std::vector<double>(sg.begin(), sg.begin() + 12));
}

TEST(Baselines, BatchPredictionsAndNames) {
    const auto b = small_batch(4, 1);
    const auto p = baseline_predictions({"shotgun"}, b);
    EXPECT_EQ(p.size(), 4u * 10 * b.future_len * 2);
    EXPECT_EQ(baseline_count({"shotgun_uniform", 135, 7}), 7u);
    EXPECT_THROW(baseline_count({"oracle"}), InputError);
    EXPECT_TRUE(is_baseline("constant_velocity"));
    EXPECT_FALSE(is_baseline("cfvae"));
}

// ---------------------------------------------------------------- metrics

TEST(TopN, PerfectPredictionsScoreZero) {
    std::mt19937_64 rng(2);
    auto s = random_set(rng, 5, 4);
    for (std::size_t k = 0; k < 5; ++k) std::copy(s.truth.begin(), s.truth.end(), s.candidates.begin() + k * 8);
    const std::vector<std::size_t> hs{1, 2, 4};
    for (double e : top_n_percent_error(s, 0.4, hs)) EXPECT_EQ(e, 0.0);
}

TEST(TopN, OracleFindsTheExactMatch) {
    std::mt19937_64 rng(3);
    auto s = random_set(rng, 10, 5);
    std::copy(s.truth.begin(), s.truth.end(), s.candidates.begin() + 7 * 10);
    const std::vector<std::size_t> hs{1, 3, 5};
    for (double e : top_n_percent_error(s, 0.1, hs)) EXPECT_EQ(e, 0.0);
}

TEST(TopN, EqualsBruteForce) {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::size_t> nd(1, 40), hd(1, 8);
    std::uniform_real_distribution<double> pd(0.01, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = nd(rng), h = hd(rng);
        const auto s = random_set(rng, n, h);
        const double pct = pd(rng);
        std::vector<std::size_t> hs;
        for (std::size_t j = 1; j <= h; ++j) hs.push_back(j);
        const std::size_t count = static_cast<std::size_t>(std::ceil(pct * n - 1e-9 * std::max(1.0, pct * n)));
        EXPECT_EQ(top_n_percent_error(s, pct, hs), brute_top(s, count, hs));
    }
}

TEST(TopN, AddingCandidatesNeverHurtsAtFixedCount) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        auto small = random_set(rng, 10, 6);
        auto big = small;
        const auto extra = random_set(rng, 10, 6);
        big.n = 20;
        big.candidates.insert(big.candidates.end(), extra.candidates.begin(), extra.candidates.end());
        const std::vector<std::size_t> all{1, 2, 3, 4, 5, 6};
        auto avg = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
        EXPECT_LE(avg(top_n_percent_error(big, 0.1, all)), avg(top_n_percent_error(small, 0.2, all)) + 1e-12);
    }
}

TEST(TopN, InvalidInputsRejected) {
    PredictionSet empty;
    const std::vector<std::size_t> hs{1};
    EXPECT_THROW(top_n_percent_error(empty, 0.1, hs), InputError);
    std::mt19937_64 rng(6);
    const auto s = random_set(rng, 4, 3);
    EXPECT_THROW(top_n_percent_error(s, 0.0, hs), InputError);
    const std::vector<std::size_t> bad{4};
    EXPECT_THROW(top_n_percent_error(s, 0.5, bad), InputError);
}

TEST(MadeMfde, PerfectSingleAndBruteForce) {
    std::mt19937_64 rng(7);
    auto s = random_set(rng, 6, 4);
    std::copy(s.truth.begin(), s.truth.end(), s.candidates.begin() + 2 * 8);
    const auto r = made_mfde(s);
    EXPECT_EQ(r.made, 0.0);
    EXPECT_EQ(r.mfde, 0.0);

    const auto one = random_set(rng, 1, 5);
    EXPECT_EQ(made_mfde(one).made, mean_error(one, 0));
    EXPECT_EQ(made_mfde(one).mfde, step_error(one, 0, 4));

    for (int trial = 0; trial < 1000; ++trial) {
        const auto t = random_set(rng, 1 + trial % 25, 1 + trial % 7);
        double best_ade = 1e300, best_fde = 1e300;
        for (std::size_t k = 0; k < t.n; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < t.horizon; ++j) acc += step_error(t, k, j);
            best_ade = std::min(best_ade, acc / t.horizon);
            best_fde = std::min(best_fde, step_error(t, k, t.horizon - 1));
        }
        const auto m = made_mfde(t);
        EXPECT_EQ(m.made, best_ade);
        EXPECT_EQ(m.mfde, best_fde);
    }
}

TEST(Metrics, RigidRotationInvariance) {
    std::mt19937_64 rng(8);
    const double a = 0.83, c = std::cos(a), s = std::sin(a);
    const std::vector<std::size_t> hs{1, 3, 5};
    for (int trial = 0; trial < 50; ++trial) {
        const auto set = random_set(rng, 12, 5);
        auto rot = set;
        auto spin = [&](std::vector<double>& v) {
            for (std::size_t i = 0; i < v.size(); i += 2) {
                const double x = v[i], y = v[i + 1];
                v[i] = c * x - s * y + 3.0;
                v[i + 1] = s * x + c * y - 1.0;
            }
        };
        spin(rot.candidates);
        spin(rot.truth);
        const auto e1 = top_n_percent_error(set, 0.25, hs), e2 = top_n_percent_error(rot, 0.25, hs);
        for (std::size_t i = 0; i < hs.size(); ++i) EXPECT_NEAR(e1[i], e2[i], 1e-10);
        EXPECT_NEAR(made_mfde(set).made, made_mfde(rot).made, 1e-10);
        EXPECT_NEAR(made_mfde(set).mfde, made_mfde(rot).mfde, 1e-10);
    }
}

// ---------------------------------------------------------------- report

TEST(Report, RowsAndDeterminismAcrossThreadCounts) {
    const auto b = small_batch(37, 9);
    const auto cand = baseline_predictions({"shotgun_uniform", 90, 20}, b);
    ReportConfig cfg;
    cfg.horizons = {2, 4, 6};
    cfg.frame_rate = 2.0;
    std::vector<double> cll(37);
    for (std::size_t i = 0; i < 37; ++i) cll[i] = 0.5 * i - 3;
    auto render = [&](int threads) {
        omp_set_num_threads(threads);
        const auto rep = metric_report(b, cand, 20, cfg, cll);
        std::ostringstream s;
        write_report_csv(s, rep);
        return s.str() + report_json(rep);
    };
    const std::string one = render(1);
    EXPECT_EQ(one, render(4));
    EXPECT_EQ(one, render(1));
    omp_set_num_threads(1);

    const auto rep = metric_report(b, cand, 20, cfg, cll);
    std::ostringstream s;
    write_report_csv(s, rep);
    const std::string csv = s.str();
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 37 + 2);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "case,top10@1s,top10@2s,top10@3s,made,mfde,neg_cll");
    EXPECT_NE(csv.find("\nmean,"), std::string::npos);
    EXPECT_NEAR(rep.summary.neg_cll, 6.0, 1e-12);
    for (const auto& m : rep.cases)
        for (double e : m.top_errors) EXPECT_TRUE(std::isfinite(e) && e >= 0.0);
}

TEST(Report, SizeMismatchRejected) {
    const auto b = small_batch(3, 10);
    const auto cand = baseline_predictions({"shotgun"}, b);
    EXPECT_THROW(metric_report(b, cand, 9, ReportConfig{{1, 2}}), InputError);
    const std::vector<double> cll{1.0};
    EXPECT_THROW(metric_report(b, cand, 10, ReportConfig{{1, 2}}, cll), InputError);
}
