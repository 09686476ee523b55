#include <cmath>

#include <gtest/gtest.h>

#include "htl/checks.hpp"
#include "htl/simulate.hpp"
#include "htl/transfer.hpp"

using htl::KernelSpec;
using htl::TransformPair;

TEST(Transform, ForwardValues) {
    EXPECT_EQ(htl::transform_g(TransformPair::offset(), 3.0, 1.0), 2.0);
    EXPECT_EQ(htl::transform_g(TransformPair::affine(0.0, 1.0), 3.0, 1.0), 3.0);
    EXPECT_DOUBLE_EQ(htl::transform_g(TransformPair::affine(0.5, 0.5), 3.0, 1.0), 5.0);
}

TEST(Transform, InverseValues) {
    EXPECT_EQ(htl::transform_G(TransformPair::offset(), 0.0, 1.25), 1.25);
    EXPECT_EQ(htl::transform_G(TransformPair::affine(0.3, 1.0), 4.0, 1.25), 4.0);
    EXPECT_EQ(htl::transform_G(TransformPair::affine(0.3, 0.0), 4.0, 1.25), 1.25);
}

TEST(Transform, RoundTripIdentity) {
    EXPECT_LE(htl::checks::round_trip_error(TransformPair::offset(), 10000, 1), 1e-12);
    for (const double tau : {0.0, 0.2, 0.5, 0.9}) {
        EXPECT_LE(htl::checks::round_trip_error(TransformPair::affine(tau, 1.0 - tau), 10000, 2), 1e-12) << tau;
    }
}

TEST(Transform, LipschitzWitness) {
    EXPECT_LE(htl::checks::lipschitz_ratio(TransformPair::offset(), 10000, 3), 1.0 + 1e-12);
    for (const double rho : {-0.5, 0.0, 0.3, 0.5, 1.0, 2.5}) {
        EXPECT_LE(htl::checks::lipschitz_ratio(TransformPair::affine(0.4, rho), 10000, 4), 1.0 + 1e-12) << rho;
    }
}

TEST(Transform, DeclaredConstants) {
    EXPECT_DOUBLE_EQ(TransformPair::offset().lipschitz_G, std::sqrt(2.0));
    EXPECT_EQ(TransformPair::offset().lipschitz_g, 1.0);
    const auto a = TransformPair::affine(0.75, -1.0);
    EXPECT_DOUBLE_EQ(a.lipschitz_G, 2.0 * std::sqrt(2.0));
    EXPECT_DOUBLE_EQ(a.lipschitz_g, 4.0);
}

TEST(Transform, AffineRequiresTauBelowOne) {
    EXPECT_THROW(TransformPair::affine(1.0, 0.5), htl::ConfigError);
    EXPECT_THROW(TransformPair::affine(-0.1, 0.5), htl::ConfigError);
}

namespace {

struct Fixture {
    htl::ShiftScenario scenario;
    htl::TransferDatasets data;
};

Fixture small_instance(Eigen::Index n_P, Eigen::Index n_Q) {
    htl::ScenarioOptions opt;
    opt.n_grid = 257;
    Fixture f;
    f.scenario = htl::make_shift_scenario(1.0, 2.0, 0.5, n_P, n_Q, {11, 12}, opt);
    f.data = htl::make_transfer_datasets(f.scenario, TransformPair::offset(), 13);
    return f;
}

}  // namespace

TEST(Rahtl, StepTwoLabelsMatchRecomputation) {
    const Fixture f = small_instance(50, 20);
    const auto r = htl::rahtl_fit(f.data.source, f.data.target, KernelSpec::gaussian(0.2), TransformPair::offset(),
                                  htl::AdaptiveConfig{}, htl::AdaptiveConfig{}, 5);
    const htl::Vector pretrained = htl::predict(r.source_model, f.data.target.points);
    ASSERT_EQ(r.intermediate_labels.size(), 20);
    for (Eigen::Index i = 0; i < 20; ++i) {
        EXPECT_EQ(r.intermediate_labels[i], f.data.target.labels[i] - pretrained[i]);
    }
}

TEST(Rahtl, PredictionComposesBothModels) {
    const Fixture f = small_instance(60, 25);
    const auto r = htl::rahtl_fit(f.data.source, f.data.target, KernelSpec::gaussian(0.2), TransformPair::offset(),
                                  htl::AdaptiveConfig{}, htl::AdaptiveConfig{}, 5);
    const htl::PointMatrix grid = htl::points_1d(htl::equispaced(0, 1, 101));
    const htl::Vector composed = htl::predict(r.source_model, grid) + htl::predict(r.shift_model, grid);
    EXPECT_LT((htl::htl_predict(r, grid) - composed).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_TRUE(htl::htl_predict(r, grid).allFinite());

    htl::HtlResult affine = r;
    affine.transform = TransformPair::affine(0.2, 0.0);
    EXPECT_EQ(htl::htl_predict(affine, grid), htl::predict(r.source_model, grid));

    htl::HtlResult no_shift = r;
    no_shift.shift_model.dual_coeffs.setZero();
    EXPECT_EQ(htl::htl_predict(no_shift, grid), htl::predict(r.source_model, grid));
}

TEST(Rahtl, NoShiftNoNoiseCollapsesToSource) {
    // Smooth source function, zero noise, target labels from the same function.
    auto f = [](double x) { return std::sin(2.0 * M_PI * x) + 0.5 * std::cos(3.0 * x); };
    htl::Engine engine = htl::make_engine(8);
    htl::Dataset source;
    source.points = htl::checks::uniform_points(400, 1, engine);
    source.labels = source.points.col(0).unaryExpr(f);
    htl::Dataset target;
    target.points = htl::checks::uniform_points(40, 1, engine);
    target.labels = target.points.col(0).unaryExpr(f);

    const auto r = htl::rahtl_fit(source, target, KernelSpec::gaussian(0.2), TransformPair::offset(),
                                  htl::AdaptiveConfig{}, htl::AdaptiveConfig{}, 1);
    const htl::PointMatrix grid = htl::points_1d(htl::equispaced(0, 1, 501));
    const htl::Vector gap = htl::htl_predict(r, grid) - htl::predict(r.source_model, grid);
    EXPECT_LE(gap.squaredNorm() / 501.0, 1e-10);
}

TEST(Rahtl, Deterministic) {
    const Fixture f = small_instance(60, 25);
    const auto a = htl::rahtl_fit(f.data.source, f.data.target, KernelSpec::gaussian(0.2), TransformPair::offset(),
                                  htl::AdaptiveConfig{}, htl::AdaptiveConfig{}, 21);
    const auto b = htl::rahtl_fit(f.data.source, f.data.target, KernelSpec::gaussian(0.2), TransformPair::offset(),
                                  htl::AdaptiveConfig{}, htl::AdaptiveConfig{}, 21);
    EXPECT_EQ(a.source_model.dual_coeffs, b.source_model.dual_coeffs);
    EXPECT_EQ(a.shift_model.dual_coeffs, b.shift_model.dual_coeffs);
    EXPECT_EQ(a.chosen_m_P, b.chosen_m_P);
    EXPECT_EQ(a.chosen_lambda_delta, b.chosen_lambda_delta);
}

TEST(Rahtl, RejectsTinyTarget) {
    const Fixture f = small_instance(30, 1);
    EXPECT_THROW(htl::rahtl_fit(f.data.source, f.data.target, KernelSpec::gaussian(0.2), TransformPair::offset(),
                                htl::AdaptiveConfig{}, htl::AdaptiveConfig{}, 1),
                 htl::InputError);
}
