#pragma once

// Numerical invariant checks shared by the CLI selfcheck, the unit tests and
// the acceptance run. Each returns the measured worst case so callers choose
// how to report it.

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "htl/adaptive.hpp"
#include "htl/bessel.hpp"
#include "htl/kernels.hpp"
#include "htl/quadrature.hpp"
#include "htl/random.hpp"
#include "htl/spectral.hpp"
#include "htl/transfer.hpp"

namespace htl::checks {

inline std::vector<double> decade_grid(int lo_exp, int hi_exp) {
    std::vector<double> g;
    for (int e = lo_exp; e <= hi_exp; ++e) g.push_back(std::pow(10.0, e));
    return g;
}

inline std::vector<double> unit_grid(int count, bool include_zero) {
    std::vector<double> g;
    const int start = include_zero ? 0 : 1;
    const int last = include_zero ? count - 1 : count;
    for (int i = start; i <= last; ++i) g.push_back(static_cast<double>(i) / last);
    return g;
}

/// sup |u^b phi(u)| lambda^{1-b} over b in {0, 0.1, ..., 1}, lambda in
/// {1e-6, ..., 1e-1}, u on 1000 points of [0, 1]. Bounded by E = 1.
inline double filter_e_sup(FilterKind kind) {
    const auto betas = unit_grid(11, true);
    const auto us = unit_grid(1000, true);
    double sup = 0.0;
    for (const double lambda : decade_grid(-6, -1)) {
        for (const double b : betas) {
            for (const double u : us) {
                const double v = std::abs(std::pow(u, b) * filter_apply(kind, lambda, u)) * std::pow(lambda, 1.0 - b);
                sup = std::max(sup, v);
            }
        }
    }
    return sup;
}

/// sup |1 - phi(u) u| u^b lambda^{-b} over the same grids with b in [0, 1].
/// Bounded by F_tau = 1 for KRR (tau = 1) and for GF and KPCR at b <= 1.
inline double filter_f_sup(FilterKind kind) {
    const auto betas = unit_grid(11, true);
    const auto us = unit_grid(1000, true);
    double sup = 0.0;
    for (const double lambda : decade_grid(-6, -1)) {
        for (const double b : betas) {
            for (const double u : us) {
                const double residual = std::abs(1.0 - filter_apply(kind, lambda, u) * u);
                sup = std::max(sup, residual * std::pow(u, b) * std::pow(lambda, -b));
            }
        }
    }
    return sup;
}

/// min eigenvalue / max eigenvalue of the Gram matrix.
inline double gram_psd_ratio(const PointMatrix& points, const KernelSpec& kernel) {
    const Eigen::MatrixXd g = gram(points, kernel);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff() / solver.eigenvalues().maxCoeff();
}

inline PointMatrix uniform_points(Eigen::Index n, Eigen::Index d, Engine& engine) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    PointMatrix p(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) p(i, j) = unif(engine);
    }
    return p;
}

/// Max abs prediction gap between the spectral KRR fit and the direct solve.
inline double krr_equivalence_gap(const Dataset& data, const KernelSpec& kernel, double lambda,
                                  const PointMatrix& test) {
    const Vector a = predict(spectral_fit(data, kernel, {FilterKind::KRR, lambda}), test);
    const Vector b = predict(krr_direct_solve(data, kernel, lambda), test);
    return (a - b).cwiseAbs().maxCoeff();
}

/// Worst relative gap between the general-order path and the half-integer
/// closed form over nu = n + 1/2, n in [0, orders), x log-spaced on [x_lo, x_hi].
inline double bessel_closed_form_error(int orders, int points, double x_lo, double x_hi) {
    double worst = 0.0;
    for (int n = 0; n < orders; ++n) {
        for (int i = 0; i < points; ++i) {
            const double x = x_lo * std::pow(x_hi / x_lo, static_cast<double>(i) / (points - 1));
            const double exact = detail::bessel_k_half_integer(n, x);
            const double general = detail::bessel_k_general(n + 0.5, x);
            worst = std::max(worst, std::abs(general - exact) / exact);
        }
    }
    return worst;
}

/// Worst relative residual of K_{nu+1} = K_{nu-1} + (2 nu / x) K_nu.
inline double bessel_recurrence_error(const std::vector<double>& nus, const std::vector<double>& xs) {
    double worst = 0.0;
    for (const double nu : nus) {
        for (const double x : xs) {
            const double lhs = bessel_k(nu + 1.0, x);
            const double rhs = bessel_k(nu - 1.0, x) + 2.0 * nu / x * bessel_k(nu, x);
            worst = std::max(worst, std::abs(lhs - rhs) / std::abs(lhs));
        }
    }
    return worst;
}

/// Worst |G(g(y, p), p) - y| over random (y, p) in [-10, 10]^2.
inline double round_trip_error(const TransformPair& pair, int samples, std::uint64_t seed) {
    Engine engine = make_engine(seed);
    std::uniform_real_distribution<double> unif(-10.0, 10.0);
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double y = unif(engine);
        const double p = unif(engine);
        worst = std::max(worst, std::abs(transform_G(pair, transform_g(pair, y, p), p) - y));
    }
    return worst;
}

/// Largest |G(a,b) - G(a',b')| / |(a,b) - (a',b')| / L1 over random pairs; <= 1 when L1 is valid.
inline double lipschitz_ratio(const TransformPair& pair, int samples, std::uint64_t seed) {
    Engine engine = make_engine(seed);
    std::uniform_real_distribution<double> unif(-10.0, 10.0);
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double a = unif(engine), b = unif(engine), a2 = unif(engine), b2 = unif(engine);
        const double dist = std::hypot(a - a2, b - b2);
        if (dist == 0.0) continue;
        const double gap = std::abs(transform_G(pair, a, b) - transform_G(pair, a2, b2));
        worst = std::max(worst, gap / (pair.lipschitz_G * dist));
    }
    return worst;
}

/// Worst Simpson error on random cubics over [0, 1] with 5 nodes.
inline double simpson_cubic_error(int samples, std::uint64_t seed) {
    Engine engine = make_engine(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
        const double c0 = unif(engine), c1 = unif(engine), c2 = unif(engine), c3 = unif(engine);
        std::vector<double> v(5);
        for (int k = 0; k < 5; ++k) {
            const double x = k / 4.0;
            v[static_cast<std::size_t>(k)] = c0 + x * (c1 + x * (c2 + x * c3));
        }
        const double exact = c0 + c1 / 2.0 + c2 / 3.0 + c3 / 4.0;
        worst = std::max(worst, std::abs(simpson_integral(v, 0.0, 1.0) - exact));
    }
    return worst;
}

struct CheckOutcome {
    std::string name;
    bool passed = false;
    double measured = 0.0;
    double bound = 0.0;
};

inline CheckOutcome at_most(std::string name, double measured, double bound) {
    return {std::move(name), measured <= bound, measured, bound};
}

/// Fast invariant suite over kernels, spectral filters, adaptive selection and
/// transforms.
inline std::vector<CheckOutcome> invariant_suite() {
    std::vector<CheckOutcome> out;
    Engine engine = make_engine(20240611);

    double psd = 0.0;
    for (const auto& kernel : {KernelSpec::gaussian(0.2), KernelSpec::matern(2.01, 0.2), KernelSpec::matern(0.5, 0.3)}) {
        for (const Eigen::Index d : {1, 2, 3}) {
            psd = std::max(psd, -gram_psd_ratio(uniform_points(120, d, engine), kernel));
        }
    }
    out.push_back(at_most("gram psd: -min/max eigenvalue", psd, 1e-8));

    out.push_back(at_most("bessel half-integer closed form (rel)", bessel_closed_form_error(10, 20, 0.05, 50.0), 1e-10));
    out.push_back(at_most("bessel three-term recurrence (rel)",
                          bessel_recurrence_error({0.3, 1.01, 2.01, 2.7, 3.01, 4.49}, {0.1, 0.7, 1.9, 2.1, 5.0, 20.0}),
                          1e-8));

    for (const FilterKind kind : {FilterKind::KRR, FilterKind::GradientFlow, FilterKind::KPCR}) {
        out.push_back(at_most("filter condition E=1: " + std::string(to_string(kind)), filter_e_sup(kind), 1.0 + 1e-9));
        out.push_back(at_most("filter condition F=1: " + std::string(to_string(kind)), filter_f_sup(kind), 1.0 + 1e-9));
    }

    std::normal_distribution<double> normal(0.0, 1.0);
    double gap = 0.0;
    for (const double lambda : {1e-1, 1e-3, 1e-6}) {
        Dataset data;
        data.points = uniform_points(60, 1, engine);
        data.labels = Vector(60);
        for (Eigen::Index i = 0; i < 60; ++i) data.labels[i] = std::sin(6.0 * data.points(i, 0)) + 0.3 * normal(engine);
        gap = std::max(gap, krr_equivalence_gap(data, KernelSpec::gaussian(0.2), lambda, points_1d(equispaced(0, 1, 101))));
    }
    out.push_back(at_most("spectral KRR vs direct solve (max abs)", gap, 1e-8));

    {
        Dataset data;
        data.points = uniform_points(80, 1, engine);
        data.labels = Vector(80);
        for (Eigen::Index i = 0; i < 80; ++i) data.labels[i] = std::cos(4.0 * data.points(i, 0)) + 0.5 * normal(engine);
        const AdaptiveResult r = adaptive_fit(data, KernelSpec::gaussian(0.2), AdaptiveConfig{}, 7);
        const double best = *std::min_element(r.validation_errors.begin(), r.validation_errors.end());
        out.push_back(at_most("adaptive selection is validation argmin", r.validation_errors[r.chosen_index] - best, 0.0));
        const auto total = r.split.train.size() + r.split.validation.size();
        std::vector<Eigen::Index> all(r.split.train);
        all.insert(all.end(), r.split.validation.begin(), r.split.validation.end());
        std::sort(all.begin(), all.end());
        const bool partition = total == 80 && std::adjacent_find(all.begin(), all.end()) == all.end();
        out.push_back({"adaptive split is a partition", partition, partition ? 0.0 : 1.0, 0.0});
    }

    out.push_back(at_most("offset round trip", round_trip_error(TransformPair::offset(), 10000, 1), 1e-12));
    out.push_back(at_most("affine round trip (rho = 1 - tau)", round_trip_error(TransformPair::affine(0.3, 0.7), 10000, 2), 1e-12));
    out.push_back(at_most("offset Lipschitz witness", lipschitz_ratio(TransformPair::offset(), 10000, 3), 1.0 + 1e-12));
    out.push_back(at_most("affine Lipschitz witness", lipschitz_ratio(TransformPair::affine(0.4, 1.7), 10000, 4), 1.0 + 1e-12));
    out.push_back(at_most("simpson cubic exactness", simpson_cubic_error(200, 5), 1e-14));
    return out;
}

inline bool report(std::ostream& os, const std::vector<CheckOutcome>& outcomes) {
    bool all = true;
    for (const auto& c : outcomes) {
        os << (c.passed ? "PASS " : "FAIL ") << c.name << " (measured " << c.measured << ", bound " << c.bound << ")\n";
        all = all && c.passed;
    }
    return all;
}

}  // namespace htl::checks
