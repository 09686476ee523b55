#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "htl/simulate.hpp"
#include "htl/transfer.hpp"

using htl::TruthFunction;

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_statistic(std::vector<double> sample) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = normal_cdf(sample[i]);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    return d;
}

}  // namespace

TEST(GpSamplePath, DeterministicGivenSeed) {
    const auto a = htl::gp_sample_path(2.01, 0.2, 2001, 77);
    const auto b = htl::gp_sample_path(2.01, 0.2, 2001, 77);
    EXPECT_EQ(a.anchor_values(), b.anchor_values());
    EXPECT_NE(a.anchor_values(), htl::gp_sample_path(2.01, 0.2, 2001, 78).anchor_values());
    EXPECT_EQ(a.nominal_m(), 2.01);
}

TEST(GpSamplePath, MarginalsAreStandardNormal) {
    const Eigen::Index nodes[] = {0, 1000, 1731};
    std::vector<std::vector<double>> samples(3);
    for (std::uint64_t seed = 0; seed < 2000; ++seed) {
        const auto path = htl::gp_sample_path(2.01, 0.2, 2001, 1000 + seed);
        for (int k = 0; k < 3; ++k) samples[k].push_back(path.anchor_values()[nodes[k]]);
    }
    const double critical = 1.628 / std::sqrt(2000.0);  // 1% two-sided
    for (int k = 0; k < 3; ++k) EXPECT_LT(ks_statistic(samples[k]), critical) << "node " << nodes[k];
}

TEST(GpSamplePath, CovarianceMatchesMaternKernel) {
    const int seeds = 500;
    const std::pair<Eigen::Index, Eigen::Index> pairs[] = {{0, 0}, {100, 140}, {1000, 1100}, {500, 2000}, {1500, 1520}};
    std::vector<htl::Vector> paths;
    for (int s = 0; s < seeds; ++s) paths.push_back(htl::gp_sample_path(3.01, 0.2, 2001, 5000 + s).anchor_values());
    for (const auto& [i, j] : pairs) {
        double cov = 0.0;
        for (const auto& p : paths) cov += p[i] * p[j];
        cov /= seeds;
        const double r = std::abs(i - j) / 2000.0;
        const double expected = htl::matern_from_distance(r, 3.01, 0.2);
        const double se = std::sqrt((1.0 + expected * expected) / seeds);
        EXPECT_LT(std::abs(cov - expected), 3.0 * se) << i << "," << j;
    }
}

TEST(GpSamplePath, RejectsCoarseGrid) { EXPECT_THROW(htl::gp_sample_path(2.01, 0.2, 15, 1), htl::InputError); }

TEST(TruthFunction, InterpolatesAnchorsExactly) {
    const auto f = htl::gp_sample_path(1.01, 0.2, 2001, 3);
    const htl::Vector& grid = f.anchor_grid();
    for (Eigen::Index i = 0; i < grid.size(); ++i) EXPECT_EQ(f(grid[i]), f.anchor_values()[i]);
}

TEST(TruthFunction, ContinuousAcrossNodesOnRefinedGrid) {
    const auto f = htl::gp_sample_path(1.01, 0.2, 2001, 3);
    const htl::Vector dense = htl::equispaced(0.0, 1.0, 4 * 2000 + 1);
    for (Eigen::Index k = 0; k < dense.size(); k += 4) {
        const double x = dense[k];
        EXPECT_EQ(f(x), f.anchor_values()[k / 4]);
        if (k > 0 && k + 1 < dense.size()) {
            EXPECT_LT(std::abs(f(std::nextafter(x, 0.0)) - f(std::nextafter(x, 1.0))), 1e-9);
        }
    }
    for (Eigen::Index k = 0; k < dense.size(); ++k) EXPECT_TRUE(std::isfinite(f(dense[k])));
}

TEST(TruthFunction, ReproducesLinearFunctions) {
    const htl::Vector grid = htl::equispaced(0, 1, 33);
    const TruthFunction f(htl::Vector((2.0 * grid.array() - 0.5).matrix()), 1.0);
    for (double x = 0.0; x <= 1.0; x += 0.0123) EXPECT_NEAR(f(x), 2.0 * x - 0.5, 1e-13);
}

TEST(TruthFunction, ScaleIsLinear) {
    const auto f = htl::gp_sample_path(2.01, 0.2, 257, 9);
    const auto g = f.scaled(-2.5);
    for (double x = 0.0; x <= 1.0; x += 0.07) EXPECT_DOUBLE_EQ(g(x), -2.5 * f(x));
    EXPECT_NEAR(g.squared_norm(), 6.25 * f.squared_norm(), 1e-12 * g.squared_norm());
}

TEST(RegressionData, NoiselessLabelsEqualTruth) {
    const auto f = htl::gp_sample_path(2.01, 0.2, 257, 9);
    const auto d = htl::make_regression_data(f, 50, 0.0, 4);
    for (Eigen::Index i = 0; i < 50; ++i) EXPECT_EQ(d.labels[i], f(d.points(i, 0)));
    EXPECT_THROW(htl::make_regression_data(f, 0, 0.5, 4), htl::InputError);
}

TEST(RegressionData, ReplayFromLoggedDraws) {
    const auto f = htl::gp_sample_path(2.01, 0.2, 257, 9);
    const auto d = htl::make_regression_data(f, 5, 0.5, 123);
    const auto draws = htl::regression_draws(5, 123);
    for (Eigen::Index i = 0; i < 5; ++i) {
        EXPECT_EQ(d.points(i, 0), draws.x[i]);
        EXPECT_EQ(d.labels[i], f(draws.x[i]) + 0.5 * draws.eps[i]);
        EXPECT_GE(draws.x[i], 0.0);
        EXPECT_LT(draws.x[i], 1.0);
    }
}

TEST(ShiftScenario, RealizesXi) {
    htl::ScenarioOptions opt;
    for (const double xi : {0.25, 0.5, 0.75, 1.0, 4.0, 1e-3}) {
        for (const double md : {2.0, 3.0}) {
            const auto s = htl::make_shift_scenario(1.0, md, xi, 10, 10, {1, 2}, opt);
            EXPECT_LE(std::abs(s.realized_xi() - xi) / xi, 1e-10);
            EXPECT_EQ(s.f_delta.nominal_m(), md + 0.01);
            EXPECT_EQ(s.f_P.nominal_m(), 1.01);
        }
    }
    EXPECT_THROW(htl::make_shift_scenario(1.0, 2.0, 0.0, 10, 10, {1, 2}, opt), htl::InputError);
}

TEST(ShiftScenario, RatioInvariantToCommonScaling) {
    const auto s = htl::make_shift_scenario(1.0, 2.0, 0.5, 10, 10, {1, 2});
    htl::ShiftScenario doubled = s;
    doubled.f_P = s.f_P.scaled(2.0);
    doubled.f_delta = s.f_delta.scaled(2.0);
    EXPECT_NEAR(doubled.realized_xi(), s.realized_xi(), 1e-14);
}

TEST(TransferDatasets, NoiselessTargetShiftEqualsDelta) {
    htl::ScenarioOptions opt;
    opt.noise_sd = 0.0;
    opt.n_grid = 257;
    const auto s = htl::make_shift_scenario(1.0, 3.0, 0.25, 40, 30, {5, 6}, opt);
    const auto d = htl::make_transfer_datasets(s, htl::TransformPair::offset(), 7);
    ASSERT_EQ(d.source.size(), 40);
    ASSERT_EQ(d.target.size(), 30);
    for (Eigen::Index i = 0; i < 30; ++i) {
        const double x = d.target.points(i, 0);
        EXPECT_NEAR(d.target.labels[i] - s.f_P(x), s.f_delta(x), 1e-12);
    }
    EXPECT_EQ(d.source.domain, htl::Domain::Source);
    EXPECT_EQ(d.target.domain, htl::Domain::Target);
    EXPECT_THROW(htl::make_transfer_datasets(s, htl::TransformPair::affine(0.2, 0.8), 7), htl::ConfigError);
}

TEST(TransferDatasets, ReplayFromLoggedDraws) {
    htl::ScenarioOptions opt;
    opt.n_grid = 257;
    const auto s = htl::make_shift_scenario(1.0, 2.0, 0.5, 3, 2, {5, 6}, opt);
    const auto d = htl::make_transfer_datasets(s, htl::TransformPair::offset(), 99);
    const auto src = htl::regression_draws(3, htl::derive_seed(99, {11}));
    const auto tgt = htl::regression_draws(2, htl::derive_seed(99, {12}));
    for (Eigen::Index i = 0; i < 3; ++i) {
        EXPECT_EQ(d.source.points(i, 0), src.x[i]);
        EXPECT_EQ(d.source.labels[i], s.f_P(src.x[i]) + 0.5 * src.eps[i]);
    }
    for (Eigen::Index i = 0; i < 2; ++i) {
        EXPECT_EQ(d.target.points(i, 0), tgt.x[i]);
        EXPECT_EQ(d.target.labels[i], s.f_P(tgt.x[i]) + s.f_delta(tgt.x[i]) + 0.5 * tgt.eps[i]);
    }
}

TEST(Records, RoundTripBitwise) {
    const auto f = htl::gp_sample_path(2.01, 0.2, 257, 9);
    const auto d = htl::make_regression_data(f, 25, 0.5, 4);
    std::stringstream ss;
    htl::write_records(ss, d);
    const auto back = htl::read_records(ss);
    EXPECT_EQ(back.points, d.points);
    EXPECT_EQ(back.labels, d.labels);

    std::stringstream ts;
    htl::write_truth(ts, f.scaled(3.0));
    const auto g = htl::read_truth(ts, 2.01);
    for (double x = 0.0; x <= 1.0; x += 0.01) EXPECT_NEAR(g(x), 3.0 * f(x), 1e-13);
}
