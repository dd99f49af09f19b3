#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <vector>

namespace hamlearn {

/// Compares an analytic gradient against central finite differences of f at x.
/// Returns the max over coordinates of |fd_i - analytic_i| / max(1, |analytic_i|).
/// Non-finite values surface as +inf rather than a crash.
inline double finite_difference_check(const std::function<double(std::span<const double>)>& f,
                                      std::span<const double> x,
                                      std::span<const double> analytic, double step) {
    std::vector<double> xp(x.begin(), x.end());
    double worst = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double xi = xp[i];
        xp[i] = xi + step;
        const double fp = f(xp);
        xp[i] = xi - step;
        const double fm = f(xp);
        xp[i] = xi;
        const double fd = (fp - fm) / (2.0 * step);
        const double err = std::abs(fd - analytic[i]) / std::max(1.0, std::abs(analytic[i]));
        if (!std::isfinite(err)) return std::numeric_limits<double>::infinity();
        worst = std::max(worst, err);
    }
    return worst;
}

} // namespace hamlearn
