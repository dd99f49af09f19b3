#pragma once

#include <cmath>

namespace hamlearn {

// Scalar kernels behind the SE(3) exponential map. With u = |xi|^2 the
// Rodrigues rotation and the translation factor V read
//
//   R(xi) = I + c1(u) hat(xi) + c2(u) hat(xi)^2
//   V(xi) = I + c2(u) hat(xi) + c3(u) hat(xi)^2
//
//   c1(u) = sin(s)/s, c2(u) = (1-cos(s))/s^2, c3(u) = (s-sin(s))/s^3,  s = sqrt(u).
//
// All three are analytic in u, which keeps the whole exponential polynomial
// apart from these kernels; the derivative-tape treats them as primitives.
// Below the threshold the closed forms lose digits to cancellation, so a
// truncated even series is used; at the switch point the series tail is far
// below machine precision.

inline constexpr double kRotSeriesThreshold = 1e-4; // on u = |xi|^2

inline double rotc1(double u) {
    if (u < kRotSeriesThreshold)
        return 1.0 + u * (-1.0 / 6.0 + u * (1.0 / 120.0 + u * (-1.0 / 5040.0 + u / 362880.0)));
    double s = std::sqrt(u);
    return std::sin(s) / s;
}

inline double rotc2(double u) {
    if (u < kRotSeriesThreshold)
        return 0.5 + u * (-1.0 / 24.0 + u * (1.0 / 720.0 + u * (-1.0 / 40320.0 + u / 3628800.0)));
    double s = std::sqrt(u);
    return (1.0 - std::cos(s)) / u;
}

inline double rotc3(double u) {
    if (u < kRotSeriesThreshold)
        return 1.0 / 6.0 +
               u * (-1.0 / 120.0 + u * (1.0 / 5040.0 + u * (-1.0 / 362880.0 + u / 39916800.0)));
    double s = std::sqrt(u);
    return (s - std::sin(s)) / (u * s);
}

inline double rotc1_deriv(double u) {
    if (u < kRotSeriesThreshold)
        return -1.0 / 6.0 + u * (1.0 / 60.0 + u * (-1.0 / 1680.0 + u / 90720.0));
    double s = std::sqrt(u);
    return (s * std::cos(s) - std::sin(s)) / (2.0 * u * s);
}

inline double rotc2_deriv(double u) {
    if (u < kRotSeriesThreshold)
        return -1.0 / 24.0 + u * (1.0 / 360.0 + u * (-1.0 / 13440.0 + u / 907200.0));
    double s = std::sqrt(u);
    return std::sin(s) / (2.0 * u * s) - (1.0 - std::cos(s)) / (u * u);
}

inline double rotc3_deriv(double u) {
    if (u < kRotSeriesThreshold)
        return -1.0 / 120.0 + u * (1.0 / 2520.0 + u * (-1.0 / 120960.0 + u / 9979200.0));
    double s = std::sqrt(u);
    return (1.0 - std::cos(s)) / (2.0 * u * u) - 3.0 * (s - std::sin(s)) / (2.0 * u * u * s);
}

} // namespace hamlearn
