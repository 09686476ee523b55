#pragma once

// Spectral-algorithm estimators. With G the Gram matrix on n training points
// and (U, L) the eigendecomposition of G/n, the operator estimator
// phi(T_n) g_n reduces to dual coefficients alpha = (1/n) U phi(L) U^T y and
// prediction f(x) = sum_i alpha_i k(x, x_i).

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "htl/dataset.hpp"
#include "htl/errors.hpp"
#include "htl/kernels.hpp"

namespace htl {

enum class FilterKind { KRR, GradientFlow, KPCR };

inline std::string_view to_string(FilterKind kind) {
    switch (kind) {
        case FilterKind::KRR: return "KRR";
        case FilterKind::GradientFlow: return "GF";
        case FilterKind::KPCR: return "KPCR";
    }
    return "?";
}

inline FilterKind parse_filter_kind(std::string_view name) {
    if (name == "KRR") return FilterKind::KRR;
    if (name == "GF") return FilterKind::GradientFlow;
    if (name == "KPCR") return FilterKind::KPCR;
    throw InputError("unknown filter kind '" + std::string(name) + "' (expected KRR, GF or KPCR)");
}

/// Qualification metadata of a filter family.
struct FilterQualification {
    double tau;          // +inf when any positive qualification works
    double E;
    double F_at_tau_1;   // F_tau evaluated at tau = 1
};

inline FilterQualification qualification(FilterKind kind) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    switch (kind) {
        case FilterKind::KRR: return {1.0, 1.0, 1.0};
        case FilterKind::GradientFlow: return {inf, 1.0, std::exp(-1.0)};  // (tau/e)^tau
        case FilterKind::KPCR: return {inf, 1.0, 1.0};
    }
    return {0.0, 0.0, 0.0};
}

struct FilterSpec {
    FilterKind kind = FilterKind::KRR;
    double lambda = 1e-3;

    void validate() const {
        if (!(lambda > 0.0) || !std::isfinite(lambda)) {
            throw InputError("filter: lambda must be positive");
        }
    }
};

/// phi_lambda(z) for z >= 0.
inline double filter_apply(FilterKind kind, double lambda, double z) {
    switch (kind) {
        case FilterKind::KRR:
            return 1.0 / (z + lambda);
        case FilterKind::GradientFlow: {
            const double t = z / lambda;
            if (t < 1e-8) {
                return (1.0 - 0.5 * t) / lambda;
            }
            return -std::expm1(-t) / z;
        }
        case FilterKind::KPCR:
            return z >= lambda ? 1.0 / z : 0.0;
    }
    return 0.0;
}

inline double filter_apply(const FilterSpec& f, double z) { return filter_apply(f.kind, f.lambda, z); }

/// Training inputs, dual coefficients and kernel. Immutable after construction.
struct FittedModel {
    PointMatrix train_points;
    Vector dual_coeffs;
    KernelSpec kernel;

    [[nodiscard]] Eigen::Index size() const { return dual_coeffs.size(); }
};

/// Eigendecomposition of G/n on a fixed training design, reusable across
/// filters and regularization levels.
struct SpectralBasis {
    PointMatrix points;
    KernelSpec kernel;
    Eigen::MatrixXd eigenvectors;
    Vector eigenvalues;  // of G/n, clamped to [0, inf)
};

inline SpectralBasis spectral_basis(const PointMatrix& points, const KernelSpec& kernel) {
    const Eigen::Index n = points.rows();
    if (n < 1) {
        throw InputError("spectral_fit: need at least one training point");
    }
    Eigen::MatrixXd scaled = gram(points, kernel);
    scaled /= static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(scaled);
    if (solver.info() != Eigen::Success) {
        std::ostringstream msg;
        msg << "spectral_fit: eigensolver did not converge (n=" << n << ", trace=" << scaled.trace()
            << ", frobenius=" << scaled.norm() << ", bandwidth=" << kernel.bandwidth << ")";
        throw NumericalError(msg.str());
    }
    return SpectralBasis{points, kernel, solver.eigenvectors(), solver.eigenvalues().cwiseMax(0.0)};
}

/// Dual coefficients (1/n) U phi(L) U^T y on a precomputed basis.
inline FittedModel fit_on_basis(const SpectralBasis& basis, const Vector& labels, const FilterSpec& filter) {
    filter.validate();
    const Eigen::Index n = basis.eigenvalues.size();
    if (labels.size() != n) {
        throw InputError("spectral_fit: label count does not match basis size");
    }
    if (!labels.allFinite()) {
        throw InputError("spectral_fit: labels must be finite");
    }
    Vector projected = basis.eigenvectors.transpose() * labels;
    for (Eigen::Index i = 0; i < n; ++i) {
        projected[i] *= filter_apply(filter, basis.eigenvalues[i]);
    }
    Vector alpha = basis.eigenvectors * projected;
    alpha /= static_cast<double>(n);
    return FittedModel{basis.points, std::move(alpha), basis.kernel};
}

inline FittedModel spectral_fit(const Dataset& data, const KernelSpec& kernel, const FilterSpec& filter) {
    data.validate();
    filter.validate();
    return fit_on_basis(spectral_basis(data.points, kernel), data.labels, filter);
}

/// Tikhonov oracle: solves (G + n lambda I) alpha = y by Cholesky, no eigendecomposition.
inline FittedModel krr_direct_solve(const Dataset& data, const KernelSpec& kernel, double lambda) {
    data.validate();
    if (!(lambda > 0.0)) {
        throw InputError("krr_direct_solve: lambda must be positive");
    }
    const Eigen::Index n = data.size();
    if (n < 1) {
        throw InputError("krr_direct_solve: need at least one training point");
    }
    Eigen::MatrixXd system = gram(data.points, kernel);
    system.diagonal().array() += static_cast<double>(n) * lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(system);
    if (llt.info() != Eigen::Success) {
        throw NumericalError("krr_direct_solve: system matrix is not positive definite");
    }
    Vector alpha = llt.solve(data.labels);
    return FittedModel{data.points, std::move(alpha), kernel};
}

inline Vector predict(const FittedModel& model, const PointMatrix& points) {
    if (points.cols() != model.train_points.cols()) {
        throw InputError("predict: dimension mismatch");
    }
    return cross_gram(points, model.train_points, model.kernel) * model.dual_coeffs;
}

/// lambda = exp(-C n^{2/(2m+d)}), clamped below at 1e-300.
inline double lambda_schedule(long long n, double m, int d, double C) {
    if (n < 1 || !(C > 0.0) || d < 1 || !(m > 0.5 * d)) {
        throw InputError("lambda_schedule: need n >= 1, C > 0 and m > d/2");
    }
    const double exponent = 2.0 / (2.0 * m + d);
    const double lambda = std::exp(-C * std::pow(static_cast<double>(n), exponent));
    return std::max(lambda, 1e-300);
}

}  // namespace htl
