#pragma once

#include <cmath>

namespace utvi {

inline constexpr double kSqrt2 = 1.4142135623730951;
inline constexpr double kSqrt2Pi = 2.5066282746310002;
inline constexpr double kInvSqrt2Pi = 0.3989422804014327;
inline constexpr double kLog2Pi = 1.8378770664093453;

/// Standard normal density.
inline double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

/// Standard normal CDF via erfc; absolute error well below 1e-12.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

/// Inverse standard normal CDF for p strictly inside (0, 1).
/// Rational approximation refined with one Halley step against normal_cdf;
/// round-trips normal_cdf(z) back to z within 1e-9 for |z| <= 6.
double normal_inv_cdf(double p);

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double softplus(double x) {
    return std::fmax(x, 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

/// Inverse of softplus; defined for y > 0.
inline double softplus_inv(double y) {
    // log(exp(y) - 1), stable for both small and large y.
    if (y > 30.0) return y;
    return std::log(std::expm1(y));
}

inline double leaky_relu(double x, double alpha) { return x > 0.0 ? x : alpha * x; }

}  // namespace utvi
