#include <cmath>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "htl/checks.hpp"
#include "htl/evaluate.hpp"
#include "htl/parallel.hpp"

namespace {

htl::SimulationSettings fast_settings() {
    htl::SimulationSettings s;
    s.n_grid = 257;
    s.n_test = 257;
    s.seed_base = 2024;
    return s;
}

std::string csv_of(const std::vector<htl::ResultRow>& rows) {
    std::ostringstream os;
    htl::write_csv(os, rows, "hash");
    return os.str();
}

}  // namespace

TEST(Simpson, ExactnessAndConvergence) {
    const std::vector<double> sq{0.0, 1.0 / 16, 0.25, 9.0 / 16, 1.0};
    EXPECT_NEAR(htl::simpson_integral(sq, 0.0, 1.0), 1.0 / 3.0, 1e-15);
    const std::vector<double> c(7, 2.5);
    EXPECT_NEAR(htl::simpson_integral(c, -1.0, 3.0), 10.0, 1e-14);
    const htl::Vector x = htl::equispaced(0, 1, 101);
    const htl::Vector x4 = x.array().pow(4.0);
    EXPECT_NEAR(htl::simpson_integral({x4.data(), 101}, 0.0, 1.0), 0.2, 1e-8);
    EXPECT_LE(htl::checks::simpson_cubic_error(1000, 3), 1e-14);
}

TEST(Simpson, RejectsEvenNodeCountAndBadInterval) {
    const std::vector<double> four(4, 1.0);
    EXPECT_THROW(htl::simpson_integral(four, 0.0, 1.0), htl::InputError);
    const std::vector<double> five(5, 1.0);
    EXPECT_THROW(htl::simpson_integral(five, 1.0, 1.0), htl::InputError);
}

TEST(ExcessRisk, KnownCases) {
    const auto truth = htl::gp_sample_path(2.01, 0.2, 257, 1);
    const auto self = [&](const htl::PointMatrix& p) { return truth.evaluate(p.col(0)); };
    EXPECT_LE(htl::excess_risk(self, truth).value, 1e-20);

    const auto zero = [](const htl::PointMatrix& p) { return htl::Vector::Zero(p.rows()).eval(); };
    const htl::Vector nodes = htl::equispaced(0, 1, 5001);
    const htl::Vector sq = truth.evaluate(nodes).array().square();
    EXPECT_NEAR(htl::excess_risk(zero, truth).value, htl::simpson_integral({sq.data(), 5001}, 0.0, 1.0), 1e-14);

    const auto constant = [](const htl::PointMatrix& p) { return htl::Vector::Constant(p.rows(), 1.5).eval(); };
    EXPECT_NEAR(htl::excess_risk(constant, [](double) { return -0.5; }).value, 4.0, 1e-13);
    EXPECT_THROW(htl::excess_risk(constant, truth, 100), htl::InputError);
}

TEST(FitRate, PlantedPowerLaws) {
    const std::vector<long long> ns{100, 200, 400, 800, 1600};
    std::vector<double> exact;
    std::vector<double> scaled;
    for (const long long n : ns) {
        exact.push_back(std::pow(static_cast<double>(n), -0.8));
        scaled.push_back(2.0 * std::pow(static_cast<double>(n), -6.0 / 7.0));
    }
    const auto a = htl::fit_rate(ns, exact, 2.0, 1);
    EXPECT_NEAR(a.slope, -0.8, 1e-12);
    EXPECT_NEAR(a.r_squared, 1.0, 1e-12);
    EXPECT_DOUBLE_EQ(a.theoretical_slope, -0.8);
    const auto b = htl::fit_rate(ns, scaled, 3.0, 1);
    EXPECT_NEAR(b.slope, -6.0 / 7.0, 1e-12);
    EXPECT_NEAR(b.intercept, std::log(2.0), 1e-12);
    EXPECT_NEAR(b.theoretical_slope, -6.0 / 7.0, 1e-15);
}

TEST(FitRate, TwoPointsAndErrors) {
    const std::vector<long long> two{10, 40};
    const std::vector<double> r{1.0, 0.5};
    const auto f = htl::fit_rate(two, r, 2.0, 1);
    EXPECT_NEAR(f.slope, std::log(0.5) / std::log(4.0), 1e-15);
    EXPECT_EQ(f.r_squared, 1.0);
    const std::vector<double> bad{1.0, 0.0};
    EXPECT_THROW(htl::fit_rate(two, bad, 2.0, 1), htl::InputError);
    const std::vector<long long> same{10, 10};
    EXPECT_THROW(htl::fit_rate(same, r, 2.0, 1), htl::InputError);
}

TEST(PhaseTransition, SymmetryAndMonotonicity) {
    EXPECT_NEAR(htl::phase_transition_xi(200, 200, 2.0, 2.0, 1), 1.0, 1e-15);
    double prev = htl::phase_transition_xi(200, 100, 3.0, 1.0, 1);
    for (double n_P = 200; n_P <= 3000; n_P += 100) {
        const double v = htl::phase_transition_xi(200, n_P, 3.0, 1.0, 1);
        EXPECT_LT(v, prev);
        prev = v;
    }
}

TEST(CompensatedMean, MatchesArithmeticMean) {
    const std::vector<double> v(10, 0.1);
    EXPECT_DOUBLE_EQ(htl::compensated_mean(v), 0.1);
    const std::vector<double> w{1e16, 1.0, -1e16, 3.0};
    EXPECT_NEAR(htl::compensated_mean(w), 1.0, 0.5);
    EXPECT_EQ(htl::compensated_mean(std::vector<double>{}), 0.0);
}

TEST(ParallelFor, RunsEachIndexOnceAndRethrowsLowestFailure) {
    std::vector<int> hits(100, 0);
    htl::parallel_for(100, 4, [&](std::size_t i) { ++hits[i]; });
    EXPECT_EQ(std::set<int>(hits.begin(), hits.end()), std::set<int>{1});
    try {
        htl::parallel_for(50, 4, [](std::size_t i) {
            if (i == 7 || i == 31) throw std::runtime_error(std::to_string(i));
        });
        FAIL() << "expected an exception";
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "7");
    }
}

TEST(RateStudy, DegenerateSingleSizeHasNoSlope) {
    htl::RateStudyConfig cfg;
    cfg.ns = {100};
    cfg.repeats = 1;
    cfg.C_grid = {1.0};
    cfg.sim = fast_settings();
    const auto r = htl::run_rate_study(cfg);
    ASSERT_EQ(r.curves.size(), 1u);
    EXPECT_FALSE(r.curves[0].fit.has_value());
    ASSERT_EQ(r.rows.size(), 1u);
    EXPECT_FALSE(r.rows[0].slope.has_value());
    EXPECT_GT(*r.rows[0].mean_risk, 0.0);
}

TEST(RateStudy, DeterministicAcrossRunsAndThreadCounts) {
    htl::RateStudyConfig cfg;
    cfg.ns = {20, 40, 60};
    cfg.repeats = 3;
    cfg.filters = {htl::FilterKind::KRR, htl::FilterKind::KPCR};
    cfg.sim = fast_settings();
    const std::string a = csv_of(htl::run_rate_study(cfg).rows);
    EXPECT_EQ(a, csv_of(htl::run_rate_study(cfg).rows));
    cfg.sim.threads = 8;
    EXPECT_EQ(a, csv_of(htl::run_rate_study(cfg).rows));
    cfg.adaptive = true;
    cfg.sim.threads = 1;
    const std::string b = csv_of(htl::run_rate_study(cfg).rows);
    cfg.sim.threads = 8;
    EXPECT_EQ(b, csv_of(htl::run_rate_study(cfg).rows));
}

TEST(RateStudy, BestCurveMinimisesSlopeGap) {
    htl::RateStudyConfig cfg;
    cfg.ns = {30, 60, 90};
    cfg.repeats = 2;
    cfg.sim = fast_settings();
    const auto r = htl::run_rate_study(cfg);
    ASSERT_TRUE(r.best_curve[0].has_value());
    const double best = std::abs(r.curves[*r.best_curve[0]].fit->slope + 0.8);
    for (const auto& c : r.curves) EXPECT_LE(best, std::abs(c.fit->slope + 0.8));
}

TEST(TransferStudy, RowsAndDeterminism) {
    htl::TransferStudyConfig cfg;
    cfg.m_delta = {2.0};
    cfg.xi = {0.5};
    cfg.n_Q = {12, 16};
    cfg.repeats = 2;
    cfg.sim = fast_settings();
    const auto r = htl::run_transfer_study(cfg);
    ASSERT_EQ(r.curves.size(), 1u);
    EXPECT_EQ(r.curves[0].n_Q, cfg.n_Q);
    std::set<std::string> labels;
    for (const auto& row : r.rows) {
        labels.insert(row.filter);
        if (row.n_Q && row.mean_risk) {
            EXPECT_EQ(*row.n_P, htl::source_size_for(*row.n_Q, 1.5));
        }
    }
    EXPECT_EQ(labels, (std::set<std::string>{htl::kTransferLabel, htl::kTargetOnlyLabel}));
    const std::string a = csv_of(r.rows);
    cfg.sim.threads = 8;
    EXPECT_EQ(a, csv_of(htl::run_transfer_study(cfg).rows));
}

TEST(PhaseStudy, EmitsPhaseTransitionPoint) {
    htl::PhaseStudyConfig cfg;
    cfg.m_delta = {3.0};
    cfg.xi = {4.0};
    cfg.n_Q = 20;
    cfg.n_P = {20, 40};
    cfg.repeats = 2;
    cfg.sim = fast_settings();
    const auto r = htl::run_phase_study(cfg);
    ASSERT_EQ(r.rows.size(), 2u);
    for (const auto& row : r.rows) {
        EXPECT_DOUBLE_EQ(*row.xi_star, htl::phase_transition_xi(20, static_cast<double>(*row.n_P), 3.0, 1.0, 1));
    }
    const std::string a = csv_of(r.rows);
    cfg.sim.threads = 8;
    EXPECT_EQ(a, csv_of(htl::run_phase_study(cfg).rows));
}

TEST(Validation, RejectsBadStudies) {
    htl::TransferStudyConfig t;
    t.xi = {-1.0};
    EXPECT_THROW(htl::validate(t), htl::ConfigError);
    htl::RateStudyConfig r;
    r.sim.n_test = 5000;
    EXPECT_THROW(htl::validate(r), htl::ConfigError);
    htl::PhaseStudyConfig p;
    p.n_P = {};
    EXPECT_THROW(htl::validate(p), htl::ConfigError);
}

TEST(Csv, HeaderAndEmptyFields) {
    htl::ResultRow row;
    row.study = "rates";
    row.filter = "KRR";
    row.n = 100;
    row.repeat_count = 1;
    row.mean_risk = 0.25;
    const std::string out = csv_of({row});
    EXPECT_EQ(out.substr(0, out.find('\n')), htl::kCsvHeader);
    EXPECT_EQ(out.substr(out.find('\n') + 1), "rates,KRR,,,,,,100,,,1,0.25,,,,0,,hash\n");
}
