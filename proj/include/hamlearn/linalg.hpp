#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hamlearn/errors.hpp"

namespace hamlearn {

// double counterparts of the tape's fused primitives, so templated math code
// runs unchanged on plain numbers.

inline double scalar_like(double /*ref*/, double v) { return v; }

inline double max0(double x) { return x > 0.0 ? x : 0.0; }

inline double dot_product(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline std::vector<double> solve_square(std::span<const double> m_rowmajor,
                                        std::span<const double> rhs) {
    const int d = static_cast<int>(rhs.size());
    Eigen::MatrixXd M(d, d);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) M(r, c) = m_rowmajor[static_cast<size_t>(r) * d + c];
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(M);
    const auto& u = lu.matrixLU();
    const double scale = M.cwiseAbs().maxCoeff();
    for (int i = 0; i < d; ++i)
        if (std::abs(u(i, i)) <= 1e-13 * std::max(1.0, scale))
            throw SolveError("linear solve: negligible pivot at index " + std::to_string(i), i);
    Eigen::VectorXd b(d);
    for (int i = 0; i < d; ++i) b[i] = rhs[i];
    const Eigen::VectorXd y = lu.solve(b);
    return std::vector<double>(y.data(), y.data() + d);
}

} // namespace hamlearn
