#pragma once

// Training/validation selection of the smoothness level that drives the
// exponential regularization schedule.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "htl/dataset.hpp"
#include "htl/errors.hpp"
#include "htl/kernels.hpp"
#include "htl/random.hpp"
#include "htl/spectral.hpp"

namespace htl {

struct AdaptiveConfig {
    std::vector<double> candidate_smoothness{1.0, 2.0, 3.0, 4.0, 5.0};
    double C = 1.0;
    double split_fraction = 0.5;
    FilterKind filter = FilterKind::KRR;

    /// Candidates must be > d/2 and non-decreasing. Duplicates are tolerated so the
    /// tie-break toward the earliest candidate is observable.
    void validate(int d) const {
        if (candidate_smoothness.empty()) {
            throw InputError("adaptive: candidate list is empty");
        }
        for (std::size_t i = 0; i < candidate_smoothness.size(); ++i) {
            if (!(candidate_smoothness[i] > 0.5 * d)) {
                throw InputError("adaptive: candidates must exceed d/2");
            }
            if (i > 0 && candidate_smoothness[i] < candidate_smoothness[i - 1]) {
                throw InputError("adaptive: candidates must be sorted");
            }
        }
        if (!(C > 0.0)) {
            throw InputError("adaptive: C must be positive");
        }
        if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
            throw InputError("adaptive: split_fraction must lie in (0, 1)");
        }
    }
};

/// Arithmetic grid from m_min to m_max (inclusive) with spacing max(1/ln n, 0.25).
inline std::vector<double> candidate_grid(long long n, int d, double m_min, double m_max) {
    if (n < 3 || !(m_min > 0.5 * d) || !(m_max >= m_min)) {
        throw InputError("candidate_grid: need n >= 3, m_min > d/2 and m_max >= m_min");
    }
    const double spacing = std::max(1.0 / std::log(static_cast<double>(n)), 0.25);
    std::vector<double> grid;
    for (long long k = 0;; ++k) {
        const double m = m_min + static_cast<double>(k) * spacing;
        if (m >= m_max - 1e-12) {
            break;
        }
        grid.push_back(m);
    }
    grid.push_back(m_max);
    return grid;
}

struct SplitIndices {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> validation;
};

/// Seeded shuffle, then prefix split: |train| = floor(n * fraction) + 1.
inline SplitIndices train_validation_split(Eigen::Index n, double fraction, std::uint64_t seed) {
    const auto n_train = static_cast<Eigen::Index>(std::floor(static_cast<double>(n) * fraction)) + 1;
    if (n_train < 1 || n_train >= n) {
        throw InputError("adaptive: split leaves an empty training or validation part");
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Engine engine = make_engine(seed);
    std::shuffle(order.begin(), order.end(), engine);
    SplitIndices s;
    s.train.assign(order.begin(), order.begin() + n_train);
    s.validation.assign(order.begin() + n_train, order.end());
    return s;
}

struct AdaptiveResult {
    FittedModel model;
    double chosen_m = 0.0;
    double chosen_lambda = 0.0;
    std::size_t chosen_index = 0;
    std::vector<double> validation_errors;  // per candidate, in candidate order
    SplitIndices split;
};

inline double mean_squared_error(const Vector& predicted, const Vector& observed) {
    return (predicted - observed).squaredNorm() / static_cast<double>(observed.size());
}

/// Fits one spectral estimator per candidate on the training part with
/// lambda_m = lambda_schedule(|D1|, m, d, C) and keeps the one with the
/// smallest validation MSE (earliest candidate on ties).
inline AdaptiveResult adaptive_fit(const Dataset& data, const KernelSpec& kernel, const AdaptiveConfig& config,
                                   std::uint64_t seed) {
    data.validate();
    const int d = static_cast<int>(data.dim());
    config.validate(d);
    if (data.size() < 4) {
        throw InputError("adaptive_fit: need at least 4 samples");
    }

    AdaptiveResult result;
    result.split = train_validation_split(data.size(), config.split_fraction, seed);
    const Dataset train = subset(data, result.split.train);
    const Dataset valid = subset(data, result.split.validation);

    const SpectralBasis basis = spectral_basis(train.points, kernel);
    const Eigen::MatrixXd cross = cross_gram(valid.points, train.points, kernel);
    const auto n_train = static_cast<long long>(train.size());

    double best_error = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < config.candidate_smoothness.size(); ++i) {
        const double m = config.candidate_smoothness[i];
        const double lambda = lambda_schedule(n_train, m, d, config.C);
        FittedModel model = fit_on_basis(basis, train.labels, FilterSpec{config.filter, lambda});
        const double err = mean_squared_error(cross * model.dual_coeffs, valid.labels);
        result.validation_errors.push_back(err);
        if (err < best_error) {
            best_error = err;
            result.model = std::move(model);
            result.chosen_m = m;
            result.chosen_lambda = lambda;
            result.chosen_index = i;
        }
    }
    if (!std::isfinite(best_error)) {
        throw NumericalError("adaptive_fit: no candidate produced a finite validation error");
    }
    return result;
}

}  // namespace htl
