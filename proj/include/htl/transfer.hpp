#pragma once

// Hypothesis transfer under concept shift: pre-train on the source sample,
// map target labels through g, fit the shift, and compose through G.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "htl/adaptive.hpp"
#include "htl/dataset.hpp"
#include "htl/errors.hpp"
#include "htl/kernels.hpp"
#include "htl/random.hpp"
#include "htl/simulate.hpp"
#include "htl/spectral.hpp"

namespace htl {

enum class TransformKind { Offset, Affine };

/// Data transformation g(y, p) and model transformation G(delta, p).
///   Offset: g = y - p,               G = p + delta
///   Affine: g = (y - tau p)/(1-tau), G = (1-rho) p + rho delta
struct TransformPair {
    TransformKind kind = TransformKind::Offset;
    double tau = 0.0;
    double rho = 1.0;
    double lipschitz_G = std::numbers::sqrt2;  // L1, jointly in (delta, p)
    double lipschitz_g = 1.0;                  // L2, in p

    static TransformPair offset() { return {}; }

    static TransformPair affine(double tau, double rho) {
        if (!(tau >= 0.0 && tau < 1.0)) {
            throw ConfigError("tau", "affine transform needs tau in [0, 1)");
        }
        if (!std::isfinite(rho)) {
            throw ConfigError("rho", "must be finite");
        }
        TransformPair p;
        p.kind = TransformKind::Affine;
        p.tau = tau;
        p.rho = rho;
        p.lipschitz_G = std::numbers::sqrt2 * std::max(std::abs(1.0 - rho), std::abs(rho));
        p.lipschitz_g = 1.0 / (1.0 - tau);
        return p;
    }
};

inline double transform_g(const TransformPair& pair, double y, double p) {
    if (pair.kind == TransformKind::Offset) {
        return y - p;
    }
    if (pair.tau == 1.0) {
        throw ConfigError("tau", "affine data transform is undefined at tau = 1");
    }
    return (y - pair.tau * p) / (1.0 - pair.tau);
}

inline double transform_G(const TransformPair& pair, double delta, double p) {
    if (pair.kind == TransformKind::Offset) {
        return p + delta;
    }
    return (1.0 - pair.rho) * p + pair.rho * delta;
}

struct HtlResult {
    FittedModel source_model;
    FittedModel shift_model;
    TransformPair transform;
    double chosen_m_P = 0.0;
    double chosen_m_delta = 0.0;
    double chosen_lambda_P = 0.0;
    double chosen_lambda_delta = 0.0;
    Vector intermediate_labels;  // y^delta at the target inputs
};

inline Vector htl_predict(const HtlResult& result, const PointMatrix& points) {
    const Vector delta = predict(result.shift_model, points);
    const Vector source = predict(result.source_model, points);
    Vector out(points.rows());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        out[i] = transform_G(result.transform, delta[i], source[i]);
    }
    return out;
}

/// Target-side labels y_i^delta = g(y_i^Q, f^P(x_i^Q)).
inline Vector intermediate_labels(const TransformPair& pair, const FittedModel& source_model, const Dataset& target) {
    const Vector pretrained = predict(source_model, target.points);
    Vector y(target.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        y[i] = transform_g(pair, target.labels[i], pretrained[i]);
    }
    return y;
}

/// Robust adaptive hypothesis transfer: adaptive spectral fit on the source,
/// transformed target labels, adaptive spectral fit of the shift.
inline HtlResult rahtl_fit(const Dataset& source, const Dataset& target, const KernelSpec& kernel,
                           const TransformPair& pair, const AdaptiveConfig& cfg_P, const AdaptiveConfig& cfg_delta,
                           std::uint64_t seed) {
    if (source.size() < 4 || target.size() < 4) {
        throw InputError("rahtl_fit: source and target need at least 4 samples each");
    }
    if (source.dim() != target.dim()) {
        throw InputError("rahtl_fit: source and target dimensions differ");
    }

    HtlResult r;
    r.transform = pair;

    AdaptiveResult pre = adaptive_fit(source, kernel, cfg_P, derive_seed(seed, {1}));
    r.chosen_m_P = pre.chosen_m;
    r.chosen_lambda_P = pre.chosen_lambda;
    r.source_model = std::move(pre.model);

    Dataset shifted;
    shifted.domain = Domain::Intermediate;
    shifted.points = target.points;
    shifted.labels = intermediate_labels(pair, r.source_model, target);
    r.intermediate_labels = shifted.labels;

    AdaptiveResult fine = adaptive_fit(shifted, kernel, cfg_delta, derive_seed(seed, {2}));
    r.chosen_m_delta = fine.chosen_m;
    r.chosen_lambda_delta = fine.chosen_lambda;
    r.shift_model = std::move(fine.model);
    return r;
}

/// Source and target samples for a shift scenario. Only offset shifts are generated.
inline TransferDatasets make_transfer_datasets(const ShiftScenario& scenario, const TransformPair& pair,
                                               std::uint64_t seed) {
    if (pair.kind != TransformKind::Offset) {
        throw ConfigError("transform", "transfer datasets are generated for offset shifts only");
    }
    return make_offset_transfer_datasets(scenario, seed);
}

}  // namespace htl
