#pragma once

#include <span>

#include "htl/errors.hpp"

namespace htl {

/// Composite Simpson rule on N equispaced samples of [a, b]; N must be odd and >= 3.
inline double simpson_integral(std::span<const double> values, double a, double b) {
    const std::size_t n = values.size();
    if (n < 3 || n % 2 == 0) {
        throw InputError("simpson_integral: need an odd node count >= 3");
    }
    if (!(b > a)) {
        throw InputError("simpson_integral: need b > a");
    }
    double odd = 0.0;
    double even = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        (i % 2 == 1 ? odd : even) += values[i];
    }
    const double h = (b - a) / static_cast<double>(n - 1);
    return h / 3.0 * (values.front() + 4.0 * odd + 2.0 * even + values.back());
}

}  // namespace htl
