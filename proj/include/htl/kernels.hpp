#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>

#include "htl/bessel.hpp"
#include "htl/dataset.hpp"
#include "htl/errors.hpp"

namespace htl {

enum class KernelFamily { Gaussian, Matern };

/// Stationary kernel with unit variance: k(x, x) = 1.
struct KernelSpec {
    KernelFamily family = KernelFamily::Gaussian;
    double bandwidth = 0.2;
    double nu = 2.5;  // Matern smoothness; ignored for Gaussian

    static KernelSpec gaussian(double h) { return checked({KernelFamily::Gaussian, h, 0.0}); }
    static KernelSpec matern(double nu, double h) { return checked({KernelFamily::Matern, h, nu}); }

    void validate() const {
        if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
            throw InputError("kernel: bandwidth must be positive");
        }
        if (family == KernelFamily::Matern && (!(nu > 0.0) || !std::isfinite(nu))) {
            throw InputError("kernel: Matern nu must be positive");
        }
    }

private:
    static KernelSpec checked(KernelSpec k) {
        k.validate();
        return k;
    }
};

inline double squared_distance(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw InputError("kernel: dimension mismatch");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double diff = x[i] - y[i];
        acc += diff * diff;
    }
    return acc;
}

/// exp(-r^2 / (2 h^2)) from the squared distance r^2.
inline double gaussian_from_sqdist(double sqdist, double h) {
    return std::exp(-sqdist / (2.0 * h * h));
}

/// Matern correlation at distance r:
/// 2^{1-nu}/Gamma(nu) s^nu K_nu(s), s = sqrt(2 nu) r / h; exactly 1 for r < 1e-14 h.
inline double matern_from_distance(double r, double nu, double h) {
    if (r < 1e-14 * h) {
        return 1.0;
    }
    const double s = std::sqrt(2.0 * nu) * r / h;
    const double log_prefactor = (1.0 - nu) * std::numbers::ln2 - std::lgamma(nu) + nu * std::log(s);
    const double value = std::exp(log_prefactor) * bessel_k(nu, s);
    return std::min(1.0, value);
}

inline double gaussian_eval(std::span<const double> x, std::span<const double> y, double h) {
    if (!(h > 0.0)) {
        throw InputError("gaussian_eval: bandwidth must be positive");
    }
    return gaussian_from_sqdist(squared_distance(x, y), h);
}

inline double matern_eval(std::span<const double> x, std::span<const double> y, double nu, double h) {
    if (!(h > 0.0) || !(nu > 0.0)) {
        throw InputError("matern_eval: nu and bandwidth must be positive");
    }
    return matern_from_distance(std::sqrt(squared_distance(x, y)), nu, h);
}

inline double kernel_from_sqdist(const KernelSpec& k, double sqdist) {
    if (k.family == KernelFamily::Gaussian) {
        return gaussian_from_sqdist(sqdist, k.bandwidth);
    }
    return matern_from_distance(std::sqrt(sqdist), k.nu, k.bandwidth);
}

inline double kernel_eval(const KernelSpec& k, std::span<const double> x, std::span<const double> y) {
    return kernel_from_sqdist(k, squared_distance(x, y));
}

/// Gram matrix G_ij = k(x_i, x_j). The upper triangle is computed once and
/// mirrored; the diagonal is set to 1.
inline Eigen::MatrixXd gram(const PointMatrix& points, const KernelSpec& kernel) {
    kernel.validate();
    const Eigen::Index n = points.rows();
    if (n < 1) {
        throw InputError("gram: need at least one point");
    }
    Eigen::MatrixXd g(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        g(j, j) = 1.0;
        const auto xj = row_span(points, j);
        for (Eigen::Index i = 0; i < j; ++i) {
            const double v = kernel_from_sqdist(kernel, squared_distance(row_span(points, i), xj));
            g(i, j) = v;
            g(j, i) = v;
        }
    }
    return g;
}

/// Cross-kernel matrix C_ij = k(a_i, b_j), shape a.rows() x b.rows().
inline Eigen::MatrixXd cross_gram(const PointMatrix& a, const PointMatrix& b, const KernelSpec& kernel) {
    if (a.cols() != b.cols()) {
        throw InputError("cross_gram: dimension mismatch");
    }
    Eigen::MatrixXd c(a.rows(), b.rows());
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
        const auto bj = row_span(b, j);
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            c(i, j) = kernel_from_sqdist(kernel, squared_distance(row_span(a, i), bj));
        }
    }
    return c;
}

}  // namespace htl
