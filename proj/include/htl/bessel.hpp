#pragma once

// Modified Bessel function of the second kind K_nu(x) for real order.
//
// Half-integer orders use the terminating closed form. Other orders reduce to
// mu = nu - round(nu) in [-1/2, 1/2): Temme's series gives K_mu and K_{mu+1}
// for x < 2, Steed's evaluation of the second continued fraction gives them
// for x >= 2, and forward recurrence (stable for K) climbs to nu.

#include <array>
#include <cmath>
#include <numbers>
#include <utility>

#include "htl/errors.hpp"

namespace htl {

namespace detail {

// Taylor coefficients of 1/Gamma(1+z) about z = 0.
inline constexpr std::array<double, 27> kRecipGammaTaylor = {
    1.0,
    5.7721566490153286061e-1,
    -6.5587807152025388108e-1,
    -4.2002635034095235529e-2,
    1.665386113822914895e-1,
    -4.2197734555544336748e-2,
    -9.6219715278769735621e-3,
    7.2189432466630995424e-3,
    -1.1651675918590651121e-3,
    -2.1524167411495097282e-4,
    1.2805028238811618615e-4,
    -2.0134854780788238656e-5,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
    1.1866922547516003326e-18,
};

struct TemmeGammas {
    double gam1;   // (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)
    double gam2;   // (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2
    double gampl;  // 1/Gamma(1+mu)
    double gammi;  // 1/Gamma(1-mu)
};

// |mu| <= 1/2. Both gam1 and gam2 are even in mu, summed in mu^2 without cancellation.
inline TemmeGammas temme_gammas(double mu) {
    const double mu2 = mu * mu;
    double even = 0.0;
    double odd = 0.0;
    for (std::size_t k = kRecipGammaTaylor.size(); k-- > 0;) {
        if (k % 2 == 0) {
            even = even * mu2 + kRecipGammaTaylor[k];
        } else {
            odd = odd * mu2 + kRecipGammaTaylor[k];
        }
    }
    TemmeGammas g{};
    g.gam1 = -odd;
    g.gam2 = even;
    g.gampl = g.gam2 - mu * g.gam1;
    g.gammi = g.gam2 + mu * g.gam1;
    return g;
}

inline constexpr double kBesselEps = 1e-16;
inline constexpr int kBesselMaxIter = 100000;

/// Returns (K_mu(x), K_{mu+1}(x)) for |mu| <= 1/2.
inline std::pair<double, double> bessel_k_fractional(double mu, double x) {
    const double mu2 = mu * mu;
    if (x < 2.0) {
        const double half_x = 0.5 * x;
        const double pimu = std::numbers::pi * mu;
        const double fact = std::abs(pimu) < kBesselEps ? 1.0 : pimu / std::sin(pimu);
        const double log_term = -std::log(half_x);
        const double sigma = mu * log_term;
        const double fact2 = std::abs(sigma) < kBesselEps ? 1.0 : std::sinh(sigma) / sigma;
        const TemmeGammas g = temme_gammas(mu);

        double ff = fact * (g.gam1 * std::cosh(sigma) + g.gam2 * fact2 * log_term);
        double sum = ff;
        const double e = std::exp(sigma);
        double p = 0.5 * e / g.gampl;
        double q = 0.5 / (e * g.gammi);
        double c = 1.0;
        const double quarter_x2 = half_x * half_x;
        double sum1 = p;
        for (int i = 1; i <= kBesselMaxIter; ++i) {
            const double di = i;
            ff = (di * ff + p + q) / (di * di - mu2);
            c *= quarter_x2 / di;
            p /= di - mu;
            q /= di + mu;
            const double del = c * ff;
            sum += del;
            sum1 += c * (p - di * ff);
            if (std::abs(del) < std::abs(sum) * kBesselEps) {
                break;
            }
        }
        return {sum, sum1 * 2.0 / x};
    }

    // Steed's algorithm for CF2 with the Thompson-Barnett normalisation sum.
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d;
    double delh = d;
    double q1 = 0.0;
    double q2 = 1.0;
    const double a1 = 0.25 - mu2;
    double q = a1;
    double c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    for (int i = 2; i <= kBesselMaxIter; ++i) {
        a -= 2.0 * (i - 1);
        c = -a * c / i;
        const double qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        const double dels = q * delh;
        s += dels;
        if (std::abs(dels / s) < kBesselEps) {
            break;
        }
    }
    h *= a1;
    const double k_mu = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) / s;
    const double k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
    return {k_mu, k_mu1};
}

/// General-order path (no half-integer shortcut). Exposed so tests can check it
/// against the closed forms.
inline double bessel_k_general(double nu, double x) {
    nu = std::abs(nu);
    const int steps = static_cast<int>(nu + 0.5);
    const double mu = nu - steps;
    auto [k_lo, k_hi] = bessel_k_fractional(mu, x);
    for (int i = 1; i <= steps; ++i) {
        const double next = (mu + i) * (2.0 / x) * k_hi + k_lo;
        k_lo = k_hi;
        k_hi = next;
    }
    return k_lo;
}

/// K_{n+1/2}(x) = sqrt(pi/2x) e^{-x} sum_{k=0}^{n} (n+k)! / (k! (n-k)!) (2x)^{-k}
inline double bessel_k_half_integer(int n, double x) {
    double coeff = 1.0;
    double term_scale = 1.0;
    double sum = 1.0;
    const double inv_2x = 1.0 / (2.0 * x);
    for (int k = 0; k < n; ++k) {
        coeff *= static_cast<double>(n + k + 1) * static_cast<double>(n - k) / (k + 1);
        term_scale *= inv_2x;
        sum += coeff * term_scale;
    }
    return std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) * sum;
}

inline constexpr int kMaxClosedFormOrder = 40;

}  // namespace detail

/// K_nu(x) for x > 0. K_{-nu} = K_nu, so negative orders are accepted.
/// Throws InputError for x <= 0 (K_nu diverges at the origin) or non-finite input.
inline double bessel_k(double nu, double x) {
    if (!(x > 0.0) || !std::isfinite(x) || !std::isfinite(nu)) {
        throw InputError("bessel_k: argument must be a positive finite real");
    }
    nu = std::abs(nu);
    const double whole = std::floor(nu);
    if (nu - whole == 0.5 && whole <= detail::kMaxClosedFormOrder) {
        return detail::bessel_k_half_integer(static_cast<int>(whole), x);
    }
    return detail::bessel_k_general(nu, x);
}

}  // namespace htl
