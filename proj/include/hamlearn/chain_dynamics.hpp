#pragma once

#include <span>
#include <vector>

#include "hamlearn/linalg.hpp"

namespace hamlearn {

// Kinetic energy K = 1/2 p^T M(q)^-1 p on (T*S^2)^k with the block mass
// matrix M_ii = m_ii I3, M_ij = m_ij (I3 - q_i q_i^T). The ambient matrix is
// not symmetric, so the exact ambient partials need both solves:
//
//   y = M^-1 p,  z = M^-T p
//   dK/dp       = (y + z) / 2
//   dK/dq_i     = 1/2 sum_{j != i} m_ij [ (q_i . y_j) z_i + (z_i . q_i) y_j ]
//
// Restricted to the manifold this extension reproduces the physical kinetic
// energy (y stays tangent there). One template serves both the reference
// systems (S = double) and the learned model on the derivative tape.

template <class S> struct ChainKinetic {
    S value;
    std::vector<S> dq, dp; // length 3k each
};

/// Assemble the 6k-state block mass matrix entries (row-major, dim 3k).
template <class S>
std::vector<S> chain_mass_entries(int k, std::span<const S> m, std::span<const S> x) {
    const int d = 3 * k;
    const S zero = scalar_like(m[0], 0.0);
    std::vector<S> M(static_cast<size_t>(d) * d, zero);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            const S mij = m[static_cast<size_t>(i) * k + j];
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) {
                    S& e = M[static_cast<size_t>(3 * i + a) * d + (3 * j + b)];
                    if (i == j) {
                        if (a == b) e = mij;
                    } else {
                        const S t = mij * (x[3 * i + a] * x[3 * i + b]);
                        e = (a == b) ? mij - t : zero - t;
                    }
                }
            }
        }
    }
    return M;
}

template <class S>
ChainKinetic<S> chain_kinetic_partials(int k, std::span<const S> m, std::span<const S> x) {
    const int d = 3 * k;
    const std::vector<S> M = chain_mass_entries(k, m, x);
    std::vector<S> MT(M.size(), M[0]);
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
            MT[static_cast<size_t>(c) * d + r] = M[static_cast<size_t>(r) * d + c];

    const std::span<const S> p = x.subspan(static_cast<size_t>(d), static_cast<size_t>(d));
    const std::vector<S> y = solve_square(std::span<const S>(M), p);
    const std::vector<S> z = solve_square(std::span<const S>(MT), p);

    ChainKinetic<S> out{0.5 * dot_product(p, std::span<const S>(y)), {}, {}};
    out.dp.reserve(static_cast<size_t>(d));
    for (int i = 0; i < d; ++i) out.dp.push_back(0.5 * (y[i] + z[i]));

    const S zero = scalar_like(m[0], 0.0);
    out.dq.assign(static_cast<size_t>(d), zero);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            if (j == i) continue;
            const S mij = m[static_cast<size_t>(i) * k + j];
            // q_i . y_j and z_i . q_i
            S qyj = x[3 * i] * y[3 * j] + x[3 * i + 1] * y[3 * j + 1] + x[3 * i + 2] * y[3 * j + 2];
            S zqi = z[3 * i] * x[3 * i] + z[3 * i + 1] * x[3 * i + 1] + z[3 * i + 2] * x[3 * i + 2];
            for (int a = 0; a < 3; ++a) {
                const S term = mij * (qyj * z[3 * i + a] + zqi * y[3 * j + a]);
                out.dq[3 * i + a] = out.dq[3 * i + a] + 0.5 * term;
            }
        }
    }
    return out;
}

} // namespace hamlearn
