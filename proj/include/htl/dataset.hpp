#pragma once

#include <cstddef>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "htl/errors.hpp"

namespace htl {

/// One point per row; row storage keeps each point contiguous.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

inline std::span<const double> row_span(const PointMatrix& points, Eigen::Index i) {
    return {points.data() + i * points.cols(), static_cast<std::size_t>(points.cols())};
}

enum class Domain { Generic, Source, Target, Intermediate };

/// Paired inputs in [0,1]^d and scalar labels.
struct Dataset {
    PointMatrix points;
    Vector labels;
    Domain domain = Domain::Generic;

    [[nodiscard]] Eigen::Index size() const { return labels.size(); }
    [[nodiscard]] Eigen::Index dim() const { return points.cols(); }

    void validate() const {
        if (points.rows() != labels.size()) {
            throw InputError("dataset: point count does not match label count");
        }
        if (!labels.allFinite()) {
            throw InputError("dataset: labels must be finite");
        }
    }
};

/// Column vector of 1-D inputs as an n x 1 point matrix.
inline PointMatrix points_1d(const Vector& xs) {
    PointMatrix p(xs.size(), 1);
    p.col(0) = xs;
    return p;
}

/// Equispaced nodes a = t_0 < ... < t_{n-1} = b.
inline Vector equispaced(double a, double b, Eigen::Index n) {
    Vector t(n);
    if (n == 1) {
        t[0] = a;
        return t;
    }
    const double step = (b - a) / static_cast<double>(n - 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        t[i] = a + step * static_cast<double>(i);
    }
    t[n - 1] = b;
    return t;
}

inline Dataset subset(const Dataset& data, std::span<const Eigen::Index> rows) {
    Dataset out;
    out.domain = data.domain;
    out.points.resize(static_cast<Eigen::Index>(rows.size()), data.dim());
    out.labels.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto i = static_cast<Eigen::Index>(k);
        out.points.row(i) = data.points.row(rows[k]);
        out.labels[i] = data.labels[rows[k]];
    }
    return out;
}

}  // namespace htl
