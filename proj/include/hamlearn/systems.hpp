#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hamlearn/errors.hpp"
#include "hamlearn/geometry.hpp"
#include "hamlearn/rng.hpp"

namespace hamlearn::systems {

// ---------------------------------------------------------------------------
// Reference systems used to generate data and to score learned Hamiltonians.
// ---------------------------------------------------------------------------

/// Separable H(q,p) = 1/2 p^T Minv p + V(q) on R^{2n}.
struct UnconstrainedSystem {
    std::string id;
    int n = 0;
    Eigen::MatrixXd Minv; // symmetric positive definite
    std::function<double(const Eigen::VectorXd&)> potential;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> potential_grad;
};

/// Chain of k spherical pendula on (T*S^2)^k with constant scalar mass matrix
/// m_ij and linear potential V(q) = sum_i c_i . q_i.
struct PendulumChainSystem {
    std::string id;
    int k = 0;
    Eigen::MatrixXd scalar_mass; // k x k symmetric positive definite
    std::vector<Eigen::Vector3d> potential_coeffs;
};

UnconstrainedSystem quartic_system();
UnconstrainedSystem decoupled_system();
/// n-dimensional oscillator with unit mass, V = |q|^2 / 2 (test workhorse).
UnconstrainedSystem harmonic_system(int n);

PendulumChainSystem pendulum_k1();
PendulumChainSystem pendulum_k2();

double hamiltonian(const UnconstrainedSystem& sys, std::span<const double> x);
/// Full gradient (dH/dq, dH/dp).
std::vector<double> gradient(const UnconstrainedSystem& sys, std::span<const double> x);
/// Canonical field J grad H = (Minv p, -grad V).
std::vector<double> field(const UnconstrainedSystem& sys, std::span<const double> x);

/// The decoupled system's extra first integral G = h1 = (q1^2 + p1^2)/2.
double decoupled_g(std::span<const double> x);

Eigen::MatrixXd pendulum_mass_matrix(const PendulumChainSystem& sys,
                                     std::span<const Eigen::Vector3d> q);
double pendulum_hamiltonian(const PendulumChainSystem& sys, std::span<const double> x);
/// Ambient partials (dH/dq, dH/dp) of the block-matrix extension.
void pendulum_partials(const PendulumChainSystem& sys, std::span<const double> x,
                       std::span<double> dq_out, std::span<double> dp_out);
/// Projected Hamilton equations on (T*S^2)^k.
std::vector<double> pendulum_field(const PendulumChainSystem& sys, std::span<const double> x);
std::vector<geom::AlgebraElement<double>> pendulum_lift(const PendulumChainSystem& sys,
                                                        std::span<const double> x);

// Initial-condition samplers (documented defaults; seeds always explicit).
std::vector<double> sample_unconstrained_ic(int n, Rng& rng);
std::vector<double> sample_chain_ic(int k, Rng& rng);

// ---------------------------------------------------------------------------
// Registry facade keyed by the CLI system ids.
// ---------------------------------------------------------------------------

struct System {
    enum class Kind { Unconstrained, Chain } kind = Kind::Unconstrained;
    UnconstrainedSystem un;
    PendulumChainSystem ch;

    const std::string& id() const { return kind == Kind::Unconstrained ? un.id : ch.id; }
    int qdim() const { return kind == Kind::Unconstrained ? un.n : 3 * ch.k; }
    int state_dim() const { return 2 * qdim(); }
    int chain_k() const { return kind == Kind::Chain ? ch.k : 0; }
};

/// ids: quartic | decoupled | pendulum-k1 | pendulum-k2
System make_system(const std::string& id);
double true_hamiltonian(const System& sys, std::span<const double> x);
std::vector<double> true_field(const System& sys, std::span<const double> x);
std::vector<double> sample_ic(const System& sys, Rng& rng);

/// Known closed-form first integrals usable as training regularizers.
/// ids: "h1" (decoupled system's first oscillator energy).
double first_integral(const std::string& gid, std::span<const double> x);

/// Generic form usable on the derivative tape.
template <class S> S first_integral_t(const std::string& gid, std::span<const S> x) {
    if (gid == "h1") return 0.5 * (x[0] * x[0] + x[2] * x[2]);
    throw ConfigError("unknown first integral id '" + gid + "'");
}

} // namespace hamlearn::systems
