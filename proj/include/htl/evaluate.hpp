#pragma once

// Excess-risk quadrature, log-log rate fits and the simulation studies:
// non-adaptive / adaptive convergence rates, transfer optimality, and the
// transfer-efficiency plateau as the source sample grows.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "htl/adaptive.hpp"
#include "htl/dataset.hpp"
#include "htl/errors.hpp"
#include "htl/kernels.hpp"
#include "htl/parallel.hpp"
#include "htl/quadrature.hpp"
#include "htl/random.hpp"
#include "htl/simulate.hpp"
#include "htl/spectral.hpp"
#include "htl/transfer.hpp"

namespace htl {

// ---------------------------------------------------------------------------
// Risk and rates

struct RiskEstimate {
    double value = 0.0;
    Eigen::Index n_test = 0;
    int repeats = 1;
};

/// Kahan-compensated arithmetic mean, summed in index order.
inline double compensated_mean(std::span<const double> values) {
    double sum = 0.0;
    double carry = 0.0;
    for (const double v : values) {
        const double y = v - carry;
        const double t = sum + y;
        carry = (t - sum) - y;
        sum = t;
    }
    return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

inline RiskEstimate average_risk(std::span<const RiskEstimate> per_repeat) {
    std::vector<double> values;
    values.reserve(per_repeat.size());
    for (const auto& r : per_repeat) values.push_back(r.value);
    RiskEstimate out;
    out.value = compensated_mean(values);
    out.n_test = per_repeat.empty() ? 0 : per_repeat.front().n_test;
    out.repeats = static_cast<int>(per_repeat.size());
    return out;
}

/// Simpson estimate of int_0^1 (f_hat - f0)^2 on equispaced predictions/truth values.
inline RiskEstimate risk_from_values(const Vector& predicted, const Vector& truth) {
    if (predicted.size() != truth.size()) {
        throw InputError("excess_risk: size mismatch");
    }
    const Vector sq = (predicted - truth).array().square();
    RiskEstimate r;
    r.value = std::max(0.0, simpson_integral(std::span<const double>(sq.data(), sq.size()), 0.0, 1.0));
    r.n_test = predicted.size();
    return r;
}

inline constexpr Eigen::Index kDefaultTestNodes = 5001;

/// Excess risk of `predictor` against `truth` on [0, 1].
/// Predictor: callable PointMatrix (m x 1) -> Vector; Truth: callable double -> double.
template <class Predictor, class Truth>
RiskEstimate excess_risk(const Predictor& predictor, const Truth& truth, Eigen::Index n_test = kDefaultTestNodes) {
    if (n_test < 3 || n_test % 2 == 0) {
        throw InputError("excess_risk: n_test must be odd and >= 3");
    }
    const Vector nodes = equispaced(0.0, 1.0, n_test);
    const Vector predicted = predictor(points_1d(nodes));
    Vector target(n_test);
    for (Eigen::Index i = 0; i < n_test; ++i) target[i] = truth(nodes[i]);
    return risk_from_values(predicted, target);
}

template <class Truth>
RiskEstimate excess_risk(const FittedModel& model, const Truth& truth, Eigen::Index n_test = kDefaultTestNodes) {
    return excess_risk([&](const PointMatrix& p) { return predict(model, p); }, truth, n_test);
}

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    double theoretical_slope = 0.0;
};

inline double theoretical_rate(double m, int d) { return -2.0 * m / (2.0 * m + d); }

/// OLS of ln(risk) on ln(n); theoretical slope -2m/(2m+d).
inline RateFit fit_rate(std::span<const long long> ns, std::span<const double> risks, double m, int d) {
    if (ns.size() != risks.size()) {
        throw InputError("fit_rate: ns and risks differ in length");
    }
    std::vector<double> x;
    std::vector<double> y;
    for (std::size_t i = 0; i < ns.size(); ++i) {
        if (!(risks[i] > 0.0) || !std::isfinite(risks[i])) {
            throw InputError("fit_rate: risks must be positive and finite");
        }
        if (ns[i] < 1) {
            throw InputError("fit_rate: sample sizes must be positive");
        }
        x.push_back(std::log(static_cast<double>(ns[i])));
        y.push_back(std::log(risks[i]));
    }
    const double xm = compensated_mean(x);
    const double ym = compensated_mean(y);
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - xm) * (x[i] - xm);
        sxy += (x[i] - xm) * (y[i] - ym);
        syy += (y[i] - ym) * (y[i] - ym);
    }
    if (!(sxx > 0.0)) {
        throw InputError("fit_rate: need at least two distinct sample sizes");
    }
    RateFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = ym - fit.slope * xm;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        ss_res += r * r;
    }
    fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
    fit.theoretical_slope = theoretical_rate(m, d);
    return fit;
}

inline bool has_distinct(std::span<const long long> ns) {
    for (const long long n : ns) {
        if (n != ns.front()) return true;
    }
    return false;
}

/// (n_Q/ln n_Q)^{2m_delta/(2m_delta+d)} / (n_P/ln n_P)^{2m_P/(2m_P+d)}
inline double phase_transition_xi(double n_Q, double n_P, double m_delta, double m_P, int d) {
    const double target = std::pow(n_Q / std::log(n_Q), 2.0 * m_delta / (2.0 * m_delta + d));
    const double source = std::pow(n_P / std::log(n_P), 2.0 * m_P / (2.0 * m_P + d));
    return target / source;
}

// ---------------------------------------------------------------------------
// Result tables

/// One CSV record. Unset optionals serialize as empty fields.
struct ResultRow {
    std::string study;
    std::string filter;
    std::optional<double> m;
    std::optional<double> m_P;
    std::optional<double> m_delta;
    std::optional<double> xi;
    std::optional<double> C;
    std::optional<long long> n;
    std::optional<long long> n_P;
    std::optional<long long> n_Q;
    int repeat_count = 0;
    std::optional<double> mean_risk;
    std::optional<double> slope;
    std::optional<double> theoretical_slope;
    std::optional<double> r_squared;
    std::uint64_t seed_base = 0;
    std::optional<double> xi_star;
};

inline constexpr const char* kCsvHeader =
    "study,filter,m,m_P,m_delta,xi,C,n,n_P,n_Q,repeat_count,mean_risk,slope,theoretical_slope,r_squared,"
    "seed_base,xi_star,config_hash";

namespace detail {

inline std::string format_real(std::optional<double> v) {
    if (!v) return {};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    return buf;
}

inline std::string format_int(std::optional<long long> v) { return v ? std::to_string(*v) : std::string{}; }

}  // namespace detail

inline void write_csv(std::ostream& os, std::span<const ResultRow> rows, const std::string& config_hash) {
    std::string out = kCsvHeader;
    out += '\n';
    for (const auto& r : rows) {
        using detail::format_int;
        using detail::format_real;
        out += r.study + ',' + r.filter + ',' + format_real(r.m) + ',' + format_real(r.m_P) + ',' +
               format_real(r.m_delta) + ',' + format_real(r.xi) + ',' + format_real(r.C) + ',' + format_int(r.n) +
               ',' + format_int(r.n_P) + ',' + format_int(r.n_Q) + ',' + std::to_string(r.repeat_count) + ',' +
               format_real(r.mean_risk) + ',' + format_real(r.slope) + ',' + format_real(r.theoretical_slope) +
               ',' + format_real(r.r_squared) + ',' + std::to_string(r.seed_base) + ',' + format_real(r.xi_star) +
               ',' + config_hash + '\n';
    }
    os << out;
}

// ---------------------------------------------------------------------------
// Shared simulation settings

struct SimulationSettings {
    double bandwidth = 0.2;      // estimator (Gaussian) bandwidth
    double gp_bandwidth = 0.2;   // Matern bandwidth of the truth-generating GP
    double noise_sd = 0.5;
    Eigen::Index n_test = kDefaultTestNodes;
    Eigen::Index n_grid = kDefaultGridSize;
    std::vector<double> candidates{1.0, 2.0, 3.0, 4.0, 5.0};
    double split_fraction = 0.5;
    bool fixed_truth = false;
    std::uint64_t seed_base = 0;
    int threads = 1;

    bool operator==(const SimulationSettings&) const = default;
};

namespace detail {

// Stream tags for derive_seed.
enum : std::uint64_t { kTruthStream = 1, kDataStream = 2, kSplitStream = 3, kShiftStream = 4, kFitStream = 5 };

inline std::uint64_t truth_seed(const SimulationSettings& s, std::uint64_t repeat, std::uint64_t salt = 0) {
    return s.fixed_truth ? derive_seed(s.seed_base, {kTruthStream, salt})
                         : derive_seed(s.seed_base, {kTruthStream, salt, repeat + 1});
}

inline std::uint64_t encode(double v) {
    return std::bit_cast<std::uint64_t>(v);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Convergence-rate study

struct RateStudyConfig {
    double m = 2.0;
    int d = 1;
    std::vector<FilterKind> filters{FilterKind::KRR};
    std::vector<long long> ns{100, 200, 300, 400, 500, 600, 700, 800, 900, 1000};
    int repeats = 20;
    std::vector<double> C_grid{0.25, 0.5, 1.0, 2.0};
    bool adaptive = false;
    SimulationSettings sim;

    bool operator==(const RateStudyConfig&) const = default;
};

struct RateCurve {
    FilterKind filter = FilterKind::KRR;
    double C = 0.0;
    std::vector<long long> ns;
    std::vector<double> mean_risks;
    std::optional<RateFit> fit;
};

struct RateStudyResult {
    std::vector<RateCurve> curves;  // filter-major, then C
    std::vector<ResultRow> rows;
    /// Per filter: index into `curves` of the C whose slope is closest to theory.
    std::vector<std::optional<std::size_t>> best_curve;
};

inline void validate_common(const SimulationSettings& sim) {
    if (!(sim.bandwidth > 0.0)) throw ConfigError("bandwidth", "must be positive");
    if (!(sim.gp_bandwidth > 0.0)) throw ConfigError("gp_bandwidth", "must be positive");
    if (!(sim.noise_sd >= 0.0)) throw ConfigError("noise_sd", "must be nonnegative");
    if (sim.n_test < 3 || sim.n_test % 2 == 0) throw ConfigError("n_test", "must be odd and >= 3");
    if (sim.n_grid < 17 || sim.n_grid % 2 == 0) throw ConfigError("n_grid", "must be odd and >= 17");
    if (sim.threads < 1) throw ConfigError("threads", "must be >= 1");
    if (!(sim.split_fraction > 0.0 && sim.split_fraction < 1.0)) {
        throw ConfigError("split_fraction", "must lie in (0, 1)");
    }
    if (sim.candidates.empty()) throw ConfigError("candidates", "must not be empty");
    for (std::size_t i = 0; i < sim.candidates.size(); ++i) {
        if (!(sim.candidates[i] > 0.5)) throw ConfigError("candidates", "entries must exceed d/2");
        if (i > 0 && !(sim.candidates[i] > sim.candidates[i - 1])) {
            throw ConfigError("candidates", "must be strictly increasing");
        }
    }
}

inline void validate(const RateStudyConfig& cfg) {
    validate_common(cfg.sim);
    if (cfg.d != 1) throw ConfigError("d", "only d = 1 is simulated");
    if (!(cfg.m > 0.5 * cfg.d)) throw ConfigError("m", "must exceed d/2");
    if (cfg.filters.empty()) throw ConfigError("filters", "must not be empty");
    if (cfg.ns.empty()) throw ConfigError("ns", "must not be empty");
    for (const long long n : cfg.ns) {
        if (n < (cfg.adaptive ? 4 : 1)) throw ConfigError("ns", cfg.adaptive ? "entries must be >= 4" : "entries must be >= 1");
    }
    if (cfg.repeats < 1) throw ConfigError("repeats", "must be >= 1");
    if (cfg.C_grid.empty()) throw ConfigError("C_grid", "must not be empty");
    for (const double c : cfg.C_grid) {
        if (!(c > 0.0)) throw ConfigError("C_grid", "entries must be positive");
    }
}

inline RateStudyResult run_rate_study(const RateStudyConfig& cfg) {
    validate(cfg);
    const SimulationSettings& sim = cfg.sim;
    const KernelSpec kernel = KernelSpec::gaussian(sim.bandwidth);
    const Vector nodes = equispaced(0.0, 1.0, sim.n_test);
    const PointMatrix node_points = points_1d(nodes);

    const std::size_t n_combos = cfg.filters.size() * cfg.C_grid.size();
    const std::size_t n_tasks = cfg.ns.size() * static_cast<std::size_t>(cfg.repeats);
    // risk[task][combo]
    std::vector<std::vector<double>> risk(n_tasks, std::vector<double>(n_combos, 0.0));

    parallel_for(n_tasks, sim.threads, [&](std::size_t task) {
        const std::size_t n_index = task / static_cast<std::size_t>(cfg.repeats);
        const auto repeat = static_cast<std::uint64_t>(task % static_cast<std::size_t>(cfg.repeats));
        const long long n = cfg.ns[n_index];
        const auto un = static_cast<std::uint64_t>(n);

        const TruthFunction truth =
            gp_sample_path(matern_nu_for_order(cfg.m), sim.gp_bandwidth, sim.n_grid, detail::truth_seed(sim, repeat));
        const Dataset data =
            make_regression_data(truth, n, sim.noise_sd, derive_seed(sim.seed_base, {detail::kDataStream, un, repeat}));
        const Vector truth_values = truth.evaluate(nodes);

        if (!cfg.adaptive) {
            const SpectralBasis basis = spectral_basis(data.points, kernel);
            const Eigen::MatrixXd cross = cross_gram(node_points, data.points, kernel);
            for (std::size_t f = 0; f < cfg.filters.size(); ++f) {
                for (std::size_t c = 0; c < cfg.C_grid.size(); ++c) {
                    const double lambda = lambda_schedule(n, cfg.m, cfg.d, cfg.C_grid[c]);
                    const FittedModel model = fit_on_basis(basis, data.labels, {cfg.filters[f], lambda});
                    risk[task][f * cfg.C_grid.size() + c] =
                        risk_from_values(cross * model.dual_coeffs, truth_values).value;
                }
            }
            return;
        }

        const std::uint64_t split_seed = derive_seed(sim.seed_base, {detail::kSplitStream, un, repeat});
        std::optional<Eigen::MatrixXd> cross;  // the split does not depend on C or filter
        for (std::size_t f = 0; f < cfg.filters.size(); ++f) {
            for (std::size_t c = 0; c < cfg.C_grid.size(); ++c) {
                AdaptiveConfig acfg;
                acfg.candidate_smoothness = sim.candidates;
                acfg.C = cfg.C_grid[c];
                acfg.split_fraction = sim.split_fraction;
                acfg.filter = cfg.filters[f];
                const AdaptiveResult fit = adaptive_fit(data, kernel, acfg, split_seed);
                if (!cross) cross = cross_gram(node_points, fit.model.train_points, kernel);
                risk[task][f * cfg.C_grid.size() + c] =
                    risk_from_values(*cross * fit.model.dual_coeffs, truth_values).value;
            }
        }
    });

    RateStudyResult result;
    const std::string study = cfg.adaptive ? "adaptive-rates" : "rates";
    const double theory = theoretical_rate(cfg.m, cfg.d);
    for (std::size_t f = 0; f < cfg.filters.size(); ++f) {
        std::optional<std::size_t> best;
        double best_gap = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < cfg.C_grid.size(); ++c) {
            const std::size_t combo = f * cfg.C_grid.size() + c;
            RateCurve curve;
            curve.filter = cfg.filters[f];
            curve.C = cfg.C_grid[c];
            for (std::size_t ni = 0; ni < cfg.ns.size(); ++ni) {
                std::vector<double> values;
                for (int r = 0; r < cfg.repeats; ++r) {
                    values.push_back(risk[ni * static_cast<std::size_t>(cfg.repeats) + static_cast<std::size_t>(r)][combo]);
                }
                curve.ns.push_back(cfg.ns[ni]);
                curve.mean_risks.push_back(compensated_mean(values));

                ResultRow row;
                row.study = study;
                row.filter = std::string(to_string(curve.filter));
                row.m = cfg.m;
                row.C = curve.C;
                row.n = cfg.ns[ni];
                row.repeat_count = cfg.repeats;
                row.mean_risk = curve.mean_risks.back();
                row.theoretical_slope = theory;
                row.seed_base = sim.seed_base;
                result.rows.push_back(row);
            }
            bool positive = true;
            for (const double v : curve.mean_risks) positive = positive && v > 0.0;
            if (has_distinct(curve.ns) && positive) {
                curve.fit = fit_rate(curve.ns, curve.mean_risks, cfg.m, cfg.d);
                ResultRow row;
                row.study = study;
                row.filter = std::string(to_string(curve.filter));
                row.m = cfg.m;
                row.C = curve.C;
                row.repeat_count = cfg.repeats;
                row.slope = curve.fit->slope;
                row.theoretical_slope = theory;
                row.r_squared = curve.fit->r_squared;
                row.seed_base = sim.seed_base;
                result.rows.push_back(row);
                const double gap = std::abs(curve.fit->slope - theory);
                if (gap < best_gap) {
                    best_gap = gap;
                    best = result.curves.size();
                }
            }
            result.curves.push_back(std::move(curve));
        }
        result.best_curve.push_back(best);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Transfer studies

struct TransferMethodSettings {
    double C_source = 2.0;  // pre-training schedule constant
    double C_shift = 1.0;   // fine-tuning schedule constant
    double C_target = 1.0;  // target-only baseline schedule constant
    FilterKind source_filter = FilterKind::GradientFlow;
    FilterKind shift_filter = FilterKind::KRR;
    FilterKind target_filter = FilterKind::KRR;

    bool operator==(const TransferMethodSettings&) const = default;
};

struct TransferStudyConfig {
    double m_P = 1.0;
    std::vector<double> m_delta{2.0, 3.0};
    std::vector<double> xi{0.25, 0.5, 0.75, 1.0};
    std::vector<long long> n_Q{40, 50, 60, 70, 80, 90, 100, 110, 120, 130, 140, 150};
    double n_P_exponent = 1.5;
    int repeats = 30;
    TransferMethodSettings methods;
    SimulationSettings sim;

    bool operator==(const TransferStudyConfig&) const = default;
};

struct PhaseStudyConfig {
    double m_P = 1.0;
    std::vector<double> m_delta{2.0, 3.0};
    std::vector<double> xi{0.25, 0.5, 1.0, 4.0};
    long long n_Q = 200;
    std::vector<long long> n_P{200, 600, 1000, 1500};
    int repeats = 30;
    TransferMethodSettings methods;
    SimulationSettings sim;

    bool operator==(const PhaseStudyConfig&) const = default;
};

/// Risks of one transfer replicate.
struct TransferReplicate {
    double transfer_risk = 0.0;
    std::optional<double> target_only_risk;
};

/// One replicate: scenario, datasets, RAHTL fit, optional target-only baseline.
/// Truths depend on (m_delta, repeat) only, so curves across xi and sample
/// sizes share the same underlying functions.
inline TransferReplicate run_transfer_replicate(double m_P, double m_delta, double xi, long long n_P, long long n_Q,
                                                std::uint64_t repeat, const TransferMethodSettings& methods,
                                                const SimulationSettings& sim, bool with_baseline) {
    const KernelSpec kernel = KernelSpec::gaussian(sim.bandwidth);
    const std::uint64_t md = detail::encode(m_delta);
    ScenarioOptions opt;
    opt.gp_bandwidth = sim.gp_bandwidth;
    opt.n_grid = sim.n_grid;
    opt.noise_sd = sim.noise_sd;
    const ShiftScenario scenario = make_shift_scenario(
        m_P, m_delta, xi, n_P, n_Q,
        {detail::truth_seed(sim, repeat, detail::kTruthStream), detail::truth_seed(sim, repeat, detail::kShiftStream + md)},
        opt);
    const std::uint64_t data_seed = derive_seed(
        sim.seed_base, {detail::kDataStream, md, static_cast<std::uint64_t>(n_P), static_cast<std::uint64_t>(n_Q), repeat});
    const TransferDatasets data = make_transfer_datasets(scenario, TransformPair::offset(), data_seed);

    AdaptiveConfig cfg_P;
    cfg_P.candidate_smoothness = sim.candidates;
    cfg_P.C = methods.C_source;
    cfg_P.split_fraction = sim.split_fraction;
    cfg_P.filter = methods.source_filter;
    AdaptiveConfig cfg_delta = cfg_P;
    cfg_delta.C = methods.C_shift;
    cfg_delta.filter = methods.shift_filter;

    const HtlResult htl = rahtl_fit(data.source, data.target, kernel, TransformPair::offset(), cfg_P, cfg_delta,
                                    derive_seed(data_seed, {detail::kFitStream}));
    const auto target_truth = [&](double x) { return scenario.f_P(x) + scenario.f_delta(x); };

    TransferReplicate out;
    out.transfer_risk =
        excess_risk([&](const PointMatrix& p) { return htl_predict(htl, p); }, target_truth, sim.n_test).value;
    if (with_baseline) {
        AdaptiveConfig cfg_Q = cfg_P;
        cfg_Q.C = methods.C_target;
        cfg_Q.filter = methods.target_filter;
        const AdaptiveResult base =
            adaptive_fit(data.target, kernel, cfg_Q, derive_seed(data_seed, {detail::kFitStream, 2}));
        out.target_only_risk = excess_risk(base.model, target_truth, sim.n_test).value;
    }
    return out;
}

inline long long source_size_for(long long n_Q, double exponent) {
    return std::llround(std::pow(static_cast<double>(n_Q), exponent));
}

inline void validate_methods(const TransferMethodSettings& m) {
    if (!(m.C_source > 0.0)) throw ConfigError("C_source", "must be positive");
    if (!(m.C_shift > 0.0)) throw ConfigError("C_shift", "must be positive");
    if (!(m.C_target > 0.0)) throw ConfigError("C_target", "must be positive");
}

inline void validate_xi(const std::vector<double>& xi) {
    if (xi.empty()) throw ConfigError("xi", "must not be empty");
    for (const double v : xi) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("xi", "entries must be positive");
    }
}

inline void validate_orders(double m_P, const std::vector<double>& m_delta) {
    if (!(m_P > 0.5)) throw ConfigError("m_P", "must exceed d/2");
    if (m_delta.empty()) throw ConfigError("m_delta", "must not be empty");
    for (const double v : m_delta) {
        if (!(v > 0.5)) throw ConfigError("m_delta", "entries must exceed d/2");
    }
}

inline void validate(const TransferStudyConfig& cfg) {
    validate_common(cfg.sim);
    validate_methods(cfg.methods);
    validate_orders(cfg.m_P, cfg.m_delta);
    validate_xi(cfg.xi);
    if (cfg.n_Q.empty()) throw ConfigError("n_Q", "must not be empty");
    for (const long long n : cfg.n_Q) {
        if (n < 4) throw ConfigError("n_Q", "entries must be >= 4");
    }
    if (!(cfg.n_P_exponent > 0.0)) throw ConfigError("n_P_exponent", "must be positive");
    for (const long long n : cfg.n_Q) {
        if (source_size_for(n, cfg.n_P_exponent) < 4) throw ConfigError("n_P_exponent", "source size must be >= 4");
    }
    if (cfg.repeats < 1) throw ConfigError("repeats", "must be >= 1");
}

inline void validate(const PhaseStudyConfig& cfg) {
    validate_common(cfg.sim);
    validate_methods(cfg.methods);
    validate_orders(cfg.m_P, cfg.m_delta);
    validate_xi(cfg.xi);
    if (cfg.n_Q < 4) throw ConfigError("n_Q", "must be >= 4");
    if (cfg.n_P.empty()) throw ConfigError("n_P", "must not be empty");
    for (const long long n : cfg.n_P) {
        if (n < 4) throw ConfigError("n_P", "entries must be >= 4");
    }
    if (cfg.repeats < 1) throw ConfigError("repeats", "must be >= 1");
}

struct TransferCurve {
    double xi = 0.0;
    double m_delta = 0.0;
    std::vector<long long> n_Q;
    std::vector<double> transfer_risk;
    std::vector<double> target_only_risk;
    std::optional<RateFit> transfer_fit;
    std::optional<RateFit> target_only_fit;
};

struct TransferStudyResult {
    std::vector<TransferCurve> curves;  // xi-major, then m_delta
    std::vector<ResultRow> rows;
};

inline constexpr const char* kTransferLabel = "rahtl";
inline constexpr const char* kTargetOnlyLabel = "target-only";

inline TransferStudyResult run_transfer_study(const TransferStudyConfig& cfg) {
    validate(cfg);
    const std::size_t reps = static_cast<std::size_t>(cfg.repeats);
    const std::size_t per_curve = cfg.n_Q.size() * reps;
    const std::size_t n_curves = cfg.xi.size() * cfg.m_delta.size();
    std::vector<TransferReplicate> out(n_curves * per_curve);

    parallel_for(out.size(), cfg.sim.threads, [&](std::size_t task) {
        const std::size_t curve = task / per_curve;
        const std::size_t within = task % per_curve;
        const double xi = cfg.xi[curve / cfg.m_delta.size()];
        const double md = cfg.m_delta[curve % cfg.m_delta.size()];
        const long long n_Q = cfg.n_Q[within / reps];
        const auto repeat = static_cast<std::uint64_t>(within % reps);
        out[task] = run_transfer_replicate(cfg.m_P, md, xi, source_size_for(n_Q, cfg.n_P_exponent), n_Q, repeat,
                                           cfg.methods, cfg.sim, true);
    });

    TransferStudyResult result;
    for (std::size_t c = 0; c < n_curves; ++c) {
        TransferCurve curve;
        curve.xi = cfg.xi[c / cfg.m_delta.size()];
        curve.m_delta = cfg.m_delta[c % cfg.m_delta.size()];
        const double theory = theoretical_rate(curve.m_delta, 1);
        for (std::size_t qi = 0; qi < cfg.n_Q.size(); ++qi) {
            std::vector<double> tr;
            std::vector<double> to;
            for (std::size_t r = 0; r < reps; ++r) {
                const auto& rep = out[c * per_curve + qi * reps + r];
                tr.push_back(rep.transfer_risk);
                to.push_back(rep.target_only_risk.value_or(0.0));
            }
            curve.n_Q.push_back(cfg.n_Q[qi]);
            curve.transfer_risk.push_back(compensated_mean(tr));
            curve.target_only_risk.push_back(compensated_mean(to));
            for (int method = 0; method < 2; ++method) {
                ResultRow row;
                row.study = "transfer";
                row.filter = method == 0 ? kTransferLabel : kTargetOnlyLabel;
                row.m_P = cfg.m_P;
                row.m_delta = curve.m_delta;
                row.xi = curve.xi;
                row.n_P = source_size_for(cfg.n_Q[qi], cfg.n_P_exponent);
                row.n_Q = cfg.n_Q[qi];
                row.repeat_count = cfg.repeats;
                row.mean_risk = method == 0 ? curve.transfer_risk.back() : curve.target_only_risk.back();
                row.theoretical_slope = theory;
                row.seed_base = cfg.sim.seed_base;
                result.rows.push_back(row);
            }
        }
        if (has_distinct(curve.n_Q)) {
            curve.transfer_fit = fit_rate(curve.n_Q, curve.transfer_risk, curve.m_delta, 1);
            curve.target_only_fit = fit_rate(curve.n_Q, curve.target_only_risk, curve.m_delta, 1);
            for (int method = 0; method < 2; ++method) {
                const RateFit& fit = method == 0 ? *curve.transfer_fit : *curve.target_only_fit;
                ResultRow row;
                row.study = "transfer";
                row.filter = method == 0 ? kTransferLabel : kTargetOnlyLabel;
                row.m_P = cfg.m_P;
                row.m_delta = curve.m_delta;
                row.xi = curve.xi;
                row.repeat_count = cfg.repeats;
                row.slope = fit.slope;
                row.theoretical_slope = fit.theoretical_slope;
                row.r_squared = fit.r_squared;
                row.seed_base = cfg.sim.seed_base;
                result.rows.push_back(row);
            }
        }
        result.curves.push_back(std::move(curve));
    }
    return result;
}

struct PhaseCurve {
    double xi = 0.0;
    double m_delta = 0.0;
    std::vector<long long> n_P;
    std::vector<double> transfer_risk;
    std::vector<double> xi_star;
};

struct PhaseStudyResult {
    std::vector<PhaseCurve> curves;  // xi-major, then m_delta
    std::vector<ResultRow> rows;
};

inline PhaseStudyResult run_phase_study(const PhaseStudyConfig& cfg) {
    validate(cfg);
    const std::size_t reps = static_cast<std::size_t>(cfg.repeats);
    const std::size_t per_curve = cfg.n_P.size() * reps;
    const std::size_t n_curves = cfg.xi.size() * cfg.m_delta.size();
    std::vector<double> risk(n_curves * per_curve);

    parallel_for(risk.size(), cfg.sim.threads, [&](std::size_t task) {
        const std::size_t curve = task / per_curve;
        const std::size_t within = task % per_curve;
        const double xi = cfg.xi[curve / cfg.m_delta.size()];
        const double md = cfg.m_delta[curve % cfg.m_delta.size()];
        const long long n_P = cfg.n_P[within / reps];
        const auto repeat = static_cast<std::uint64_t>(within % reps);
        risk[task] =
            run_transfer_replicate(cfg.m_P, md, xi, n_P, cfg.n_Q, repeat, cfg.methods, cfg.sim, false).transfer_risk;
    });

    PhaseStudyResult result;
    for (std::size_t c = 0; c < n_curves; ++c) {
        PhaseCurve curve;
        curve.xi = cfg.xi[c / cfg.m_delta.size()];
        curve.m_delta = cfg.m_delta[c % cfg.m_delta.size()];
        for (std::size_t pi = 0; pi < cfg.n_P.size(); ++pi) {
            const std::span<const double> cell(risk.data() + c * per_curve + pi * reps, reps);
            curve.n_P.push_back(cfg.n_P[pi]);
            curve.transfer_risk.push_back(compensated_mean(cell));
            curve.xi_star.push_back(phase_transition_xi(static_cast<double>(cfg.n_Q),
                                                        static_cast<double>(cfg.n_P[pi]), curve.m_delta, cfg.m_P, 1));
            ResultRow row;
            row.study = "phase";
            row.filter = kTransferLabel;
            row.m_P = cfg.m_P;
            row.m_delta = curve.m_delta;
            row.xi = curve.xi;
            row.n_P = cfg.n_P[pi];
            row.n_Q = cfg.n_Q;
            row.repeat_count = cfg.repeats;
            row.mean_risk = curve.transfer_risk.back();
            row.seed_base = cfg.sim.seed_base;
            row.xi_star = curve.xi_star.back();
            result.rows.push_back(row);
        }
        result.curves.push_back(std::move(curve));
    }
    return result;
}

}  // namespace htl
