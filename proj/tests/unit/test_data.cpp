#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "condflow/data/density.hpp"
#include "condflow/data/trajectory.hpp"
#include "condflow/errors.hpp"
#include "support/oracles.hpp"

using namespace condflow;
using namespace condflow::data;

namespace {

std::vector<double> flat(const ad::Tensor& t) { return {t.data().begin(), t.data().end()}; }

double mean_nll(const ConditionalDensity& d, std::size_t label, const ad::Tensor& y) {
    const auto lp = d.log_prob(label, y);
    double s = 0.0;
    for (double v : lp) s -= v;
    return s / static_cast<double>(lp.size());
}

double grid_mass(const ConditionalDensity& d, std::size_t label, double extent, std::size_t cells) {
    return testsupport::quadrature_2d(
        [&](const std::vector<double>& pts) { return d.log_prob(label, ad::Tensor::from(pts.size() / 2, 2, pts)); },
        extent, cells);
}

}  // namespace

// ---------------------------------------------------------------- cond_mog2d

TEST(CondMog2d, SingleComponentMeanAndEntropy) {
    CondMog2d d;
    nn::Rng rng(1);
    const std::size_t n = 10000;
    const auto y = d.sample(1, n, rng);
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += y.at(i, 0) / n;
        my += y.at(i, 1) / n;
    }
    const double tol = 3.0 * d.sigma() / std::sqrt(static_cast<double>(n));
    EXPECT_NEAR(mx, 0.0, tol);
    EXPECT_NEAR(my, 0.0, tol);
    const double entropy = std::log(2.0 * std::numbers::pi * std::numbers::e * d.sigma() * d.sigma());
    EXPECT_NEAR(mean_nll(d, 1, y), entropy, 0.03);
}

TEST(CondMog2d, NllMatchesNearestNeighbourEntropy) {
    CondMog2d d;
    for (std::size_t k : {2, 3, 4}) {
        nn::Rng rng(10 + k);
        const auto y = d.sample(k, 10000, rng);
        EXPECT_NEAR(mean_nll(d, k, y), testsupport::knn_entropy_2d(flat(y)), 0.1) << k;
    }
}

TEST(CondMog2d, LogDensityNormalizes) {
    CondMog2d d;
    for (std::size_t k : d.labels()) EXPECT_NEAR(grid_mass(d, k, 6.0, 400), 1.0, 1e-3) << k;
}

TEST(CondMog2d, UnknownLabelRejected) {
    CondMog2d d;
    nn::Rng rng(0);
    EXPECT_THROW(d.sample(0, 1, rng), InputError);
    EXPECT_THROW(d.condition(5), InputError);
    EXPECT_THROW(d.log_prob(7, ad::Tensor::zeros(1, 2)), InputError);
}

TEST(CondMog2d, ConditionIsOneHot) {
    CondMog2d d;
    EXPECT_EQ(d.condition(3), (std::vector<double>{0, 0, 1, 0}));
}

// ---------------------------------------------------------------- cond_ring2d

TEST(CondRing2d, RadiiConcentrate) {
    CondRing2d d;
    nn::Rng rng(2);
    const double sr = d.config().radial_sigma;
    for (std::size_t label : d.labels()) {
        const RingArc arc = d.arc(label);
        const auto y = d.sample(label, 2000, rng);
        std::size_t inside = 0;
        for (std::size_t i = 0; i < y.rows(); ++i) {
            const double r = std::hypot(y.at(i, 0), y.at(i, 1));
            if (std::abs(r - arc.radius) <= 3.0 * sr) ++inside;
            EXPECT_LT(std::abs(r - arc.radius), 6.0 * sr);
        }
        EXPECT_GT(static_cast<double>(inside) / 2000.0, 0.99);
    }
}

TEST(CondRing2d, AnglesUniformOverArc) {
    CondRing2d d;
    nn::Rng rng(3);
    const std::size_t n = 10000, bins = 20;
    const RingArc arc = d.arc(5);
    const double span = d.config().span;
    const auto y = d.sample(5, n, rng);
    std::vector<double> counts(bins, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double rel = std::remainder(std::atan2(y.at(i, 1), y.at(i, 0)) - arc.orientation, 2 * std::numbers::pi);
        ASSERT_LE(std::abs(rel), 0.5 * span + 1e-12);
        const auto b = static_cast<std::size_t>(std::min((rel / span + 0.5) * bins, bins - 1.0));
        counts[b] += 1.0;
    }
    const double expected = static_cast<double>(n) / bins;
    double chi2 = 0.0;
    for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
    EXPECT_LT(chi2, 36.191);  // chi-square, 19 dof, alpha = 0.01
}

TEST(CondRing2d, RotatingConditionRotatesSamples) {
    CondRing2d d;
    const double phi = 0.7;
    nn::Rng r1(4), r2(4);
    const auto a = d.sample_arc({1.5, 0.2}, 100, r1);
    const auto b = d.sample_arc({1.5, 0.2 + phi}, 100, r2);
    for (std::size_t i = 0; i < 100; ++i) {
        const double x = std::cos(phi) * a.at(i, 0) - std::sin(phi) * a.at(i, 1);
        const double y = std::sin(phi) * a.at(i, 0) + std::cos(phi) * a.at(i, 1);
        EXPECT_NEAR(b.at(i, 0), x, 1e-12);
        EXPECT_NEAR(b.at(i, 1), y, 1e-12);
    }
}

TEST(CondRing2d, LogDensityNormalizesAndVanishesInGap) {
    CondRing2d d;
    for (std::size_t label : {0u, 6u}) EXPECT_NEAR(grid_mass(d, label, 3.0, 600), 1.0, 2e-3) << label;
    const RingArc arc = d.arc(0);
    const double gap = arc.orientation + std::numbers::pi;
    const auto lp = d.log_prob(0, ad::Tensor::from(1, 2, {arc.radius * std::cos(gap), arc.radius * std::sin(gap)}));
    EXPECT_TRUE(std::isinf(lp[0]) && lp[0] < 0);
}

TEST(CondRing2d, NllMatchesNearestNeighbourEntropy) {
    CondRing2d d;
    nn::Rng rng(5);
    const auto y = d.sample(3, 10000, rng);
    EXPECT_NEAR(mean_nll(d, 3, y), testsupport::knn_entropy_2d(flat(y)), 0.1);
}

TEST(Density, DrawCarriesConditions) {
    const auto d = make_density("cond_ring2d");
    nn::Rng rng(6);
    const auto s = d->draw(50, rng);
    ASSERT_EQ(s.cond.rows(), 50u);
    ASSERT_EQ(s.cond.cols(), 3u);
    for (std::size_t i = 0; i < 50; ++i) {
        const auto c = d->condition(s.labels[i]);
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(s.cond.at(i, j), c[j]);
    }
    EXPECT_THROW(make_density("spiral"), InputError);
}

TEST(Density, SeededDrawsReproduce) {
    CondMog2d d;
    nn::Rng a(7), b(7);
    EXPECT_EQ(flat(d.draw(100, a).y), flat(d.draw(100, b).y));
}

// ---------------------------------------------------------------- strokes

TEST(Strokes, NoiselessTwoModesGiveTwoFutures) {
    StrokeSpec spec;
    spec.noise = 0.0;
    spec.modes = {{0.5, 0.05, 0.5}, {-0.5, -0.05, 0.5}};
    nn::Rng rng(8);
    const auto b = gen_strokes(spec, 200, rng);
    std::set<std::vector<double>> futures;
    const std::size_t fw = spec.future_len * 2, pw = spec.past_len * 2;
    for (std::size_t c = 0; c < b.size(); ++c) {
        futures.insert({b.future.begin() + c * fw, b.future.begin() + (c + 1) * fw});
        EXPECT_TRUE(std::equal(b.past.begin(), b.past.begin() + pw, b.past.begin() + c * pw));
    }
    EXPECT_EQ(futures.size(), 2u);
    EXPECT_EQ(b.past[0], spec.origin_x);
    EXPECT_EQ(b.past[1], spec.origin_y);
}

TEST(Strokes, ModeFrequenciesMatchSpec) {
    StrokeSpec spec;
    nn::Rng rng(9);
    const std::size_t n = 10000;
    const auto b = gen_strokes(spec, n, rng);
    for (std::size_t m = 0; m < spec.modes.size(); ++m) {
        const double p = spec.modes[m].probability;
        const double freq = static_cast<double>(std::count(b.modes.begin(), b.modes.end(), static_cast<int>(m))) / n;
        EXPECT_NEAR(freq, p, 3.0 * std::sqrt(p * (1 - p) / n)) << m;
    }
}

TEST(Strokes, InvalidProbabilitiesRejected) {
    StrokeSpec spec;
    spec.modes = {{0.0, 0.0, 0.5}, {1.0, 0.0, 0.6}};
    nn::Rng rng(0);
    EXPECT_THROW(gen_strokes(spec, 1, rng), InputError);
}

// ---------------------------------------------------------------- highway

TEST(Highway, AllMajorMeansAllStraight) {
    HighwaySpec spec;
    spec.p_major = 1.0;
    spec.noise = 0.0;
    nn::Rng rng(10);
    const auto b = gen_highway(spec, 500, rng);
    for (std::size_t c = 0; c < b.size(); ++c) {
        EXPECT_EQ(b.modes[c], 0);
        for (std::size_t j = 0; j < spec.future_len; ++j) EXPECT_EQ(b.future[(c * spec.future_len + j) * 2 + 1], 0.0);
    }
}

TEST(Highway, LaneChangeFraction) {
    HighwaySpec spec;
    nn::Rng rng(11);
    const std::size_t n = 10000;
    const auto b = gen_highway(spec, n, rng);
    std::size_t changes = 0;
    for (std::size_t c = 0; c < n; ++c) {
        const double lateral = b.future[(c * spec.future_len + spec.future_len - 1) * 2 + 1] -
                               b.past[(c * spec.past_len + spec.past_len - 1) * 2 + 1];
        const auto basin = classify_lateral(lateral, spec.lane_width);
        EXPECT_EQ(static_cast<int>(basin), b.modes[c]);
        if (basin != HighwayMode::straight) ++changes;
    }
    const double q = 1.0 - spec.p_major;
    EXPECT_NEAR(static_cast<double>(changes) / n, q, 3.0 * std::sqrt(q * (1 - q) / n));
}

TEST(Highway, GridOccupancyMatchesNeighbours) {
    HighwaySpec spec;
    nn::Rng rng(12);
    std::vector<std::vector<Neighbour>> neighbours;
    const auto b = gen_highway(spec, 300, rng, &neighbours);
    ASSERT_EQ(neighbours.size(), 300u);
    const std::size_t gw = b.grid_width();
    ASSERT_EQ(gw, 13u * 3u * spec.grid_features);
    for (std::size_t c = 0; c < b.size(); ++c) {
        double occupied = 0.0;
        for (std::size_t k = 0; k < 39; ++k) occupied += b.grid[c * gw + k * spec.grid_features];
        EXPECT_EQ(occupied, static_cast<double>(neighbours[c].size()));
        EXPECT_LE(neighbours[c].size(), spec.max_neighbors);
        // Ego cell stays empty.
        EXPECT_EQ(b.grid[c * gw + (6 * 3 + 1) * spec.grid_features], 0.0);
    }
}

TEST(Highway, RasterizePlacesNeighbour) {
    HighwaySpec spec;
    const auto g = rasterize_neighbours({{2.5 * spec.cell_length, 1, 0.3}}, spec);
    // dx / L + 6.5 = 9.0 -> row 9, lane index 2, offset -0.5.
    const std::size_t base = (9 * 3 + 2) * spec.grid_features;
    EXPECT_EQ(g[base], 1.0);
    EXPECT_DOUBLE_EQ(g[base + 1], -0.5);
    EXPECT_EQ(g[base + 2], 0.3);
    EXPECT_EQ(std::count(g.begin(), g.end(), 0.0), static_cast<long>(g.size() - 3));
    EXPECT_EQ(rasterize_neighbours({{20.0 * spec.cell_length, 0, 0.0}}, spec), std::vector<double>(g.size(), 0.0));
}

// ---------------------------------------------------------------- batch + normalisation

TEST(Batch, ValidateCatchesBadShapes) {
    TrajectoryBatch b;
    EXPECT_THROW(b.validate(), InputError);
    b.past_len = 2;
    b.future_len = 1;
    b.past = {0, 0, 1, 0};
    b.future = {2, 0};
    EXPECT_NO_THROW(b.validate());
    b.future.push_back(1.0);
    EXPECT_THROW(b.validate(), InputError);
    b.future = {std::nan(""), 0};
    EXPECT_THROW(b.validate(), InputError);
}

TEST(Batch, NormalizationRoundTripAndMoments) {
    nn::Rng rng(13);
    auto b = gen_strokes(StrokeSpec{}, 200, rng);
    const auto original = b;
    const NormStats s = compute_norm(b);
    normalize(b, s);
    const NormStats after = compute_norm(b);
    EXPECT_NEAR(after.mean_x, 0.0, 1e-12);
    EXPECT_NEAR(after.mean_y, 0.0, 1e-12);
    EXPECT_NEAR(after.scale, 1.0, 1e-12);
    denormalize(b, s);
    for (std::size_t i = 0; i < b.past.size(); ++i) EXPECT_NEAR(b.past[i], original.past[i], 1e-12);
}

TEST(Batch, SelectAndAppend) {
    nn::Rng rng(14);
    const auto b = gen_highway(HighwaySpec{}, 10, rng);
    auto head = b.slice(0, 4);
    head.append(b.slice(4, 10));
    EXPECT_EQ(head.past, b.past);
    EXPECT_EQ(head.future, b.future);
    EXPECT_EQ(head.grid, b.grid);
    EXPECT_EQ(head.modes, b.modes);
    const auto picked = b.select({3});
    EXPECT_EQ(picked.modes[0], b.modes[3]);
}

// ---------------------------------------------------------------- csv

TEST(Csv, WindowCount) {
    for (std::size_t rows : {12u, 13u, 20u, 31u}) {
        std::ostringstream s;
        s << "track_id,frame,x,y\n";
        for (std::size_t i = 0; i < rows; ++i) s << "7," << i * 10 << "," << i << "," << -double(i) << "\n";
        std::istringstream in(s.str());
        const WindowSpec w{8, 4, 3};
        const auto b = read_csv(in, w);
        EXPECT_EQ(b.size(), (rows - 12) / 3 + 1) << rows;
        EXPECT_EQ(b.past[2], 1.0);
        EXPECT_EQ(b.future[0], 8.0);
    }
}

TEST(Csv, WriteReadRoundTrip) {
    nn::Rng rng(15);
    StrokeSpec spec;
    const auto b = gen_strokes(spec, 25, rng);
    std::stringstream s;
    write_csv(s, b);
    const auto back = read_csv(s, {spec.past_len, spec.future_len, 1});
    EXPECT_EQ(back.past, b.past);
    EXPECT_EQ(back.future, b.future);
}

TEST(Csv, ShuffledFramesAreSorted) {
    nn::Rng rng(16);
    StrokeSpec spec;
    const auto b = gen_strokes(spec, 6, rng);
    std::stringstream s;
    write_csv(s, b);
    std::string header, line;
    std::getline(s, header);
    std::vector<std::string> lines;
    while (std::getline(s, line)) lines.push_back(line);
    std::shuffle(lines.begin(), lines.end(), rng);
    // Track order follows first appearance, so reorder the expectation to match.
    std::vector<std::size_t> first;
    for (const auto& l : lines) {
        const auto id = static_cast<std::size_t>(std::stoul(l.substr(0, l.find(','))));
        if (std::find(first.begin(), first.end(), id) == first.end()) first.push_back(id);
    }
    std::stringstream shuffled;
    shuffled << header << "\n";
    for (const auto& l : lines) shuffled << l << "\n";
    const auto back = read_csv(shuffled, {spec.past_len, spec.future_len, 1});
    const auto expected = b.select(first);
    EXPECT_EQ(back.past, expected.past);
    EXPECT_EQ(back.future, expected.future);
}

TEST(Csv, FormatErrorsNameTheLine) {
    auto error_of = [](const std::string& text) -> std::string {
        std::istringstream in(text);
        try {
            read_csv(in, {1, 1, 1});
        } catch (const FormatError& e) {
            return e.what();
        }
        return "";
    };
    EXPECT_NE(error_of("track_id,frame,x,y\na,0,0,0\na,1,0,0\na,1,1,1\n").find("line 4"), std::string::npos);
    EXPECT_NE(error_of("track_id,frame,x,y\na,0,0,0\na,1,0,0\na,3,1,1\n").find("line 4"), std::string::npos);
    EXPECT_NE(error_of("track_id,frame,x,y\na,0,0\n").find("line 2"), std::string::npos);
    EXPECT_NE(error_of("track_id,frame,x,y\na,zero,0,0\n").find("line 2"), std::string::npos);
    EXPECT_NE(error_of("id,t,x,y\n").find("line 1"), std::string::npos);
}
