#pragma once

// Synthetic regression truths drawn as Matern Gaussian-process sample paths,
// and the regression / concept-shift datasets built from them.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "htl/dataset.hpp"
#include "htl/errors.hpp"
#include "htl/kernels.hpp"
#include "htl/quadrature.hpp"
#include "htl/random.hpp"

namespace htl {

/// Natural cubic spline through values on an equispaced grid of [0, 1],
/// multiplied by `scale` on evaluation.
class TruthFunction {
public:
    TruthFunction() = default;

    TruthFunction(Vector anchor_values, double nominal_m, double scale = 1.0)
        : grid_(equispaced(0.0, 1.0, anchor_values.size())),
          values_(std::move(anchor_values)),
          nominal_m_(nominal_m),
          scale_(scale) {
        if (values_.size() < 4) {
            throw InputError("truth: need at least 4 anchors");
        }
        step_ = 1.0 / static_cast<double>(values_.size() - 1);
        build_second_derivatives();
    }

    [[nodiscard]] double operator()(double x) const {
        const Eigen::Index last = values_.size() - 1;
        auto i = static_cast<Eigen::Index>(std::floor(x / step_));
        i = std::clamp<Eigen::Index>(i, 0, last - 1);
        if (x == grid_[i]) {
            return scale_ * values_[i];
        }
        if (x == grid_[i + 1]) {
            return scale_ * values_[i + 1];
        }
        const double a = (grid_[i + 1] - x) / step_;
        const double b = 1.0 - a;
        const double s = a * values_[i] + b * values_[i + 1] +
                         ((a * a * a - a) * second_[i] + (b * b * b - b) * second_[i + 1]) * step_ * step_ / 6.0;
        return scale_ * s;
    }

    [[nodiscard]] Vector evaluate(const Vector& xs) const {
        Vector out(xs.size());
        for (Eigen::Index i = 0; i < xs.size(); ++i) {
            out[i] = (*this)(xs[i]);
        }
        return out;
    }

    [[nodiscard]] TruthFunction scaled(double factor) const {
        TruthFunction copy = *this;
        copy.scale_ *= factor;
        return copy;
    }

    /// Simpson estimate of the squared L2 norm over [0, 1] on the anchor grid.
    [[nodiscard]] double squared_norm() const {
        Vector sq = (scale_ * values_).array().square();
        return simpson_integral(std::span<const double>(sq.data(), sq.size()), 0.0, 1.0);
    }

    [[nodiscard]] const Vector& anchor_grid() const { return grid_; }
    [[nodiscard]] const Vector& anchor_values() const { return values_; }
    [[nodiscard]] double nominal_m() const { return nominal_m_; }
    [[nodiscard]] double scale() const { return scale_; }

private:
    // Natural end conditions; tridiagonal system [1 4 1] M = 6/h^2 second differences.
    void build_second_derivatives() {
        const Eigen::Index n = values_.size();
        second_ = Vector::Zero(n);
        const Eigen::Index interior = n - 2;
        Vector rhs(interior);
        const double inv_h2 = 6.0 / (step_ * step_);
        for (Eigen::Index i = 0; i < interior; ++i) {
            rhs[i] = inv_h2 * (values_[i + 2] - 2.0 * values_[i + 1] + values_[i]);
        }
        Vector diag = Vector::Constant(interior, 4.0);
        for (Eigen::Index i = 1; i < interior; ++i) {
            const double w = 1.0 / diag[i - 1];
            diag[i] -= w;
            rhs[i] -= w * rhs[i - 1];
        }
        for (Eigen::Index i = interior; i-- > 0;) {
            const double upper = i + 1 < interior ? second_[i + 2] : 0.0;
            second_[i + 1] = (rhs[i] - upper) / diag[i];
        }
    }

    Vector grid_;
    Vector values_;
    Vector second_;
    double step_ = 0.0;
    double nominal_m_ = 0.0;
    double scale_ = 1.0;
};

namespace detail {

struct CholeskyFactor {
    Eigen::MatrixXd lower;
    double jitter;
};

/// Lower Cholesky factor of the Matern Gram on the equispaced grid plus jitter,
/// escalating jitter x10 from 1e-10 up to 1e-6. Cached per (nu, h, n_grid).
inline std::shared_ptr<const CholeskyFactor> matern_grid_factor(double nu, double h, Eigen::Index n_grid) {
    using Key = std::tuple<double, double, Eigen::Index>;
    static std::mutex mutex;
    static std::map<Key, std::shared_ptr<const CholeskyFactor>> cache;

    const Key key{nu, h, n_grid};
    {
        std::scoped_lock lock(mutex);
        if (auto it = cache.find(key); it != cache.end()) {
            return it->second;
        }
    }

    // Equispaced grid: the Gram is Toeplitz, one kernel value per lag.
    const double step = 1.0 / static_cast<double>(n_grid - 1);
    Vector by_lag(n_grid);
    for (Eigen::Index lag = 0; lag < n_grid; ++lag) {
        by_lag[lag] = matern_from_distance(step * static_cast<double>(lag), nu, h);
    }
    Eigen::MatrixXd base(n_grid, n_grid);
    for (Eigen::Index j = 0; j < n_grid; ++j) {
        for (Eigen::Index i = 0; i < n_grid; ++i) {
            base(i, j) = by_lag[std::abs(i - j)];
        }
    }

    std::shared_ptr<const CholeskyFactor> factor;
    for (double jitter = 1e-10; jitter <= 1e-6 * (1.0 + 1e-9); jitter *= 10.0) {
        Eigen::MatrixXd m = base;
        m.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(m);
        if (llt.info() == Eigen::Success) {
            factor = std::make_shared<const CholeskyFactor>(CholeskyFactor{llt.matrixL(), jitter});
            break;
        }
    }
    if (!factor) {
        std::ostringstream msg;
        msg << "gp_sample_path: Cholesky failed up to jitter 1e-6 (nu=" << nu << ", h=" << h
            << ", n_grid=" << n_grid << ")";
        throw NumericalError(msg.str());
    }

    std::scoped_lock lock(mutex);
    auto [it, inserted] = cache.emplace(key, std::move(factor));
    return it->second;
}

inline Vector standard_normals(Engine& engine, Eigen::Index n) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        z[i] = normal(engine);
    }
    return z;
}

inline Vector uniforms(Engine& engine, Eigen::Index n) {
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    Vector u(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        u[i] = uniform(engine);
    }
    return u;
}

}  // namespace detail

inline constexpr Eigen::Index kDefaultGridSize = 2001;

/// Sample path of a zero-mean GP with Matern(nu, h) covariance on an
/// equispaced grid, interpolated by a natural cubic spline.
inline TruthFunction gp_sample_path(double nu, double h, Eigen::Index n_grid, std::uint64_t seed) {
    if (n_grid < 16) {
        throw InputError("gp_sample_path: n_grid must be >= 16");
    }
    KernelSpec::matern(nu, h);  // validates
    const auto factor = detail::matern_grid_factor(nu, h, n_grid);
    Engine engine = make_engine(seed);
    const Vector z = detail::standard_normals(engine, n_grid);
    Vector values = factor->lower.triangularView<Eigen::Lower>() * z;
    return TruthFunction(std::move(values), nu);
}

/// Raw random draws behind a regression dataset.
struct RegressionDraws {
    Vector x;
    Vector eps;
};

inline RegressionDraws regression_draws(Eigen::Index n, std::uint64_t seed) {
    Engine x_engine = make_engine(derive_seed(seed, {1}));
    Engine eps_engine = make_engine(derive_seed(seed, {2}));
    RegressionDraws d;
    d.x = detail::uniforms(x_engine, n);
    d.eps = detail::standard_normals(eps_engine, n);
    return d;
}

/// x_i ~ U[0,1], y_i = truth(x_i) + noise_sd * eps_i.
inline Dataset make_regression_data(const TruthFunction& truth, Eigen::Index n, double noise_sd,
                                    std::uint64_t seed, Domain domain = Domain::Generic) {
    if (n < 1) {
        throw InputError("make_regression_data: n must be >= 1");
    }
    if (!(noise_sd >= 0.0)) {
        throw InputError("make_regression_data: noise_sd must be nonnegative");
    }
    const RegressionDraws d = regression_draws(n, seed);
    Dataset data;
    data.domain = domain;
    data.points = points_1d(d.x);
    data.labels = truth.evaluate(d.x) + noise_sd * d.eps;
    return data;
}

struct ShiftScenario {
    TruthFunction f_P;
    TruthFunction f_delta;
    double xi_target = 1.0;
    double noise_sd = 0.5;
    Eigen::Index n_P = 0;
    Eigen::Index n_Q = 0;

    /// ||f_delta||^2 / ||f_P||^2 with Simpson norms on the anchor grid.
    [[nodiscard]] double realized_xi() const { return f_delta.squared_norm() / f_P.squared_norm(); }
};

struct ScenarioOptions {
    double gp_bandwidth = 0.2;
    Eigen::Index n_grid = kDefaultGridSize;
    double noise_sd = 0.5;
};

/// Matern order that yields sample paths in H^m.
inline double matern_nu_for_order(double m) { return m + 0.01; }

namespace detail {

inline TruthFunction nondegenerate_path(double m, const ScenarioOptions& opt, std::uint64_t seed) {
    for (std::uint64_t attempt = 0;; ++attempt) {
        TruthFunction f = gp_sample_path(matern_nu_for_order(m), opt.gp_bandwidth, opt.n_grid, seed + attempt);
        if (f.squared_norm() > 0.0) {
            return f;
        }
    }
}

}  // namespace detail

/// Draws f_P ~ GP(Matern m_P + 0.01) and f_delta ~ GP(Matern m_delta + 0.01),
/// then rescales f_delta so that ||f_delta||^2 / ||f_P||^2 = xi_target.
inline ShiftScenario make_shift_scenario(double m_P, double m_delta, double xi_target, Eigen::Index n_P,
                                         Eigen::Index n_Q, std::pair<std::uint64_t, std::uint64_t> seeds,
                                         const ScenarioOptions& opt = {}) {
    if (!(xi_target > 0.0) || !std::isfinite(xi_target)) {
        throw InputError("make_shift_scenario: xi_target must be positive");
    }
    ShiftScenario s;
    s.f_P = detail::nondegenerate_path(m_P, opt, seeds.first);
    TruthFunction raw_delta = detail::nondegenerate_path(m_delta, opt, seeds.second);
    const double factor = std::sqrt(xi_target * s.f_P.squared_norm() / raw_delta.squared_norm());
    s.f_delta = raw_delta.scaled(factor);
    s.xi_target = xi_target;
    s.noise_sd = opt.noise_sd;
    s.n_P = n_P;
    s.n_Q = n_Q;
    return s;
}


struct TransferDatasets {
    Dataset source;
    Dataset target;
};

/// Offset concept shift: x^P, x^Q ~ U[0,1] independently,
/// y^P = f_P(x^P) + sd eps^P, y^Q = f_P(x^Q) + f_delta(x^Q) + sd eps^Q.
inline TransferDatasets make_offset_transfer_datasets(const ShiftScenario& s, std::uint64_t seed) {
    if (s.n_P < 1 || s.n_Q < 1) {
        throw InputError("make_transfer_datasets: sample counts must be positive");
    }
    TransferDatasets out;
    out.source = make_regression_data(s.f_P, s.n_P, s.noise_sd, derive_seed(seed, {11}), Domain::Source);

    const RegressionDraws d = regression_draws(s.n_Q, derive_seed(seed, {12}));
    out.target.domain = Domain::Target;
    out.target.points = points_1d(d.x);
    out.target.labels = s.f_P.evaluate(d.x) + s.f_delta.evaluate(d.x) + s.noise_sd * d.eps;
    return out;
}

// Line-oriented text format: one record "x_1,...,x_d,y" per line, 17 significant digits.

inline void write_records(std::ostream& os, const Dataset& data) {
    std::ostringstream buf;
    buf << std::setprecision(17);
    for (Eigen::Index i = 0; i < data.size(); ++i) {
        for (Eigen::Index j = 0; j < data.dim(); ++j) {
            buf << data.points(i, j) << ',';
        }
        buf << data.labels[i] << '\n';
    }
    os << buf.str();
}

namespace detail {

inline bool parse_double(std::string_view token, double& out) {
    while (!token.empty() && (token.front() == ' ' || token.front() == '\t')) token.remove_prefix(1);
    while (!token.empty() && (token.back() == ' ' || token.back() == '\t' || token.back() == '\r')) {
        token.remove_suffix(1);
    }
    if (token.empty()) return false;
    const auto* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(token.data(), end, out);
    return ec == std::errc() && ptr == end;
}

}  // namespace detail

/// Reads comma-separated records; the last column is the label. A first line
/// that does not parse as numbers is treated as a header.
inline Dataset read_records(std::istream& is) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        std::vector<double> fields;
        bool ok = true;
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            double v = 0.0;
            if (!detail::parse_double(rest.substr(0, comma), v)) {
                ok = false;
                break;
            }
            fields.push_back(v);
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (!ok) {
            if (rows.empty() && line_no == 1) continue;  // header
            throw InputError("records: malformed number on line " + std::to_string(line_no));
        }
        if (fields.size() < 2) {
            throw InputError("records: need at least two columns on line " + std::to_string(line_no));
        }
        if (width == 0) width = fields.size();
        if (fields.size() != width) {
            throw InputError("records: inconsistent column count on line " + std::to_string(line_no));
        }
        rows.push_back(std::move(fields));
    }
    Dataset data;
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto d = static_cast<Eigen::Index>(width == 0 ? 1 : width - 1);
    data.points.resize(n, d);
    data.labels.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) data.points(i, j) = rows[i][j];
        data.labels[i] = rows[i][d];
    }
    return data;
}

/// Truth functions serialize as their (scaled) anchor records.
inline void write_truth(std::ostream& os, const TruthFunction& f) {
    Dataset anchors;
    anchors.points = points_1d(f.anchor_grid());
    anchors.labels = f.scale() * f.anchor_values();
    write_records(os, anchors);
}

inline TruthFunction read_truth(std::istream& is, double nominal_m) {
    const Dataset anchors = read_records(is);
    return TruthFunction(anchors.labels, nominal_m);
}

}  // namespace htl
