#pragma once

// Shared measurement utilities for the unit and acceptance suites.

#include <cmath>
#include <span>
#include <vector>

#include "hamlearn/integrators.hpp"

namespace testsupport {

inline double l2_error(std::span<const double> a, std::span<const double> b) {
    double acc = 0;
    for (size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(acc);
}

/// Global-error convergence slope over a step-halving ladder: integrate to
/// t_end with fixed steps h, compare against a tight reference solution,
/// geometric-mean the errors over the initial conditions and average the
/// log2 ratios of consecutive ladder rungs.
inline double convergence_slope(const hamlearn::integrators::Step& step,
                                const hamlearn::integrators::Field& field,
                                const std::vector<std::vector<double>>& ics,
                                std::span<const double> hs, double t_end) {
    using namespace hamlearn::integrators;
    std::vector<double> times = {0.0, t_end};
    std::vector<std::vector<double>> refs;
    refs.reserve(ics.size());
    for (const auto& x0 : ics)
        refs.push_back(integrate_reference(field, x0, times, 1e-12, 1e-14).states.back());

    std::vector<double> gm_err;
    for (double h : hs) {
        const int n = static_cast<int>(std::llround(t_end / h));
        double acc = 0;
        for (size_t i = 0; i < ics.size(); ++i) {
            std::vector<double> x = ics[i];
            for (int s = 0; s < n; ++s) x = step(x, h);
            acc += std::log(l2_error(x, refs[i]));
        }
        gm_err.push_back(std::exp(acc / static_cast<double>(ics.size())));
    }
    double slope = 0;
    for (size_t j = 0; j + 1 < gm_err.size(); ++j)
        slope += std::log2(gm_err[j] / gm_err[j + 1]);
    return slope / static_cast<double>(gm_err.size() - 1);
}

} // namespace testsupport
