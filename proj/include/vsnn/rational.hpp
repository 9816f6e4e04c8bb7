#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "vsnn/errors.hpp"

namespace vsnn {

// Exact ratio of two sampling periods, used so that sample-index arithmetic
// (zero-order-hold boundaries, bin edges) is integer and never drifts with
// accumulated floating-point error.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    // floor(k * num / den) for k >= 0.
    std::int64_t floor_mul(std::int64_t k) const { return (k * num) / den; }

    // ceil(k * num / den) for k >= 0.
    std::int64_t ceil_mul(std::int64_t k) const { return (k * num + den - 1) / den; }
};

// Continued-fraction rational approximation of a positive real. Throws
// ConfigError when no fraction with denominator <= max_den reproduces x to
// 1e-9 relative: sampling rates that are not commensurate to that accuracy
// would make hold/bin boundaries ambiguous.
inline Rational approximate_ratio(double x, const std::string& what,
                                  std::int64_t max_den = 1000000) {
    if (!(x > 0.0) || !std::isfinite(x))
        throw ConfigError(what + ": ratio must be positive and finite, got " + std::to_string(x));
    std::int64_t p0 = 0, q0 = 1, p1 = 1, q1 = 0;
    double frac = x;
    for (int it = 0; it < 64; ++it) {
        const double a_f = std::floor(frac);
        const std::int64_t a = static_cast<std::int64_t>(a_f);
        const std::int64_t p2 = a * p1 + p0;
        const std::int64_t q2 = a * q1 + q0;
        if (q2 > max_den) break;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        const double r = static_cast<double>(p1) / static_cast<double>(q1);
        if (std::abs(r - x) <= 1e-12 * x) return {p1, q1};
        const double rem = frac - a_f;
        if (rem < 1e-15) break;
        frac = 1.0 / rem;
    }
    const double r = static_cast<double>(p1) / static_cast<double>(q1);
    if (q1 > 0 && std::abs(r - x) <= 1e-9 * x) return {p1, q1};
    throw ConfigError(what + ": periods are not commensurate (ratio " + std::to_string(x) + ")");
}

}  // namespace vsnn
