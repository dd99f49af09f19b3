#include "hamlearn/systems.hpp"

#include <cmath>
#include <stdexcept>

#include "hamlearn/chain_dynamics.hpp"
#include "hamlearn/errors.hpp"

namespace hamlearn::systems {

namespace {

void check_spd(const Eigen::MatrixXd& m, const std::string& what) {
    if (!m.isApprox(m.transpose(), 1e-14))
        throw std::invalid_argument(what + ": matrix is not symmetric");
    Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
        throw std::invalid_argument(what + ": matrix is not positive definite");
}

} // namespace

UnconstrainedSystem quartic_system() {
    UnconstrainedSystem sys;
    sys.id = "quartic";
    sys.n = 2;
    sys.Minv.resize(2, 2);
    sys.Minv << 5, -1, -1, 5;
    sys.potential = [](const Eigen::VectorXd& q) {
        return 0.25 * (std::pow(q[0], 4) + std::pow(q[1], 4)) +
               0.5 * (q[0] * q[0] + q[1] * q[1]);
    };
    sys.potential_grad = [](const Eigen::VectorXd& q) {
        Eigen::VectorXd g(2);
        g[0] = q[0] * q[0] * q[0] + q[0];
        g[1] = q[1] * q[1] * q[1] + q[1];
        return g;
    };
    check_spd(sys.Minv, sys.id);
    return sys;
}

UnconstrainedSystem decoupled_system() {
    UnconstrainedSystem sys;
    sys.id = "decoupled";
    sys.n = 2;
    sys.Minv = Eigen::MatrixXd::Identity(2, 2);
    sys.potential = [](const Eigen::VectorXd& q) {
        return 0.5 * q[0] * q[0] + 0.5 * q[1] * q[1] + 0.25 * std::pow(q[1], 4);
    };
    sys.potential_grad = [](const Eigen::VectorXd& q) {
        Eigen::VectorXd g(2);
        g[0] = q[0];
        g[1] = q[1] + q[1] * q[1] * q[1];
        return g;
    };
    return sys;
}

UnconstrainedSystem harmonic_system(int n) {
    UnconstrainedSystem sys;
    sys.id = "harmonic";
    sys.n = n;
    sys.Minv = Eigen::MatrixXd::Identity(n, n);
    sys.potential = [](const Eigen::VectorXd& q) { return 0.5 * q.squaredNorm(); };
    sys.potential_grad = [](const Eigen::VectorXd& q) { return q; };
    return sys;
}

PendulumChainSystem pendulum_k1() {
    PendulumChainSystem sys;
    sys.id = "pendulum-k1";
    sys.k = 1;
    sys.scalar_mass = Eigen::MatrixXd::Identity(1, 1);
    sys.potential_coeffs = {Eigen::Vector3d(0, 0, 9.81)};
    return sys;
}

PendulumChainSystem pendulum_k2() {
    PendulumChainSystem sys;
    sys.id = "pendulum-k2";
    sys.k = 2;
    sys.scalar_mass.resize(2, 2);
    sys.scalar_mass << 3, 1, 1, 1;
    sys.potential_coeffs = {Eigen::Vector3d(0, 0, 2 * 9.81), Eigen::Vector3d(0, 0, 9.81)};
    check_spd(sys.scalar_mass, sys.id);
    return sys;
}

double hamiltonian(const UnconstrainedSystem& sys, std::span<const double> x) {
    const Eigen::Map<const Eigen::VectorXd> q(x.data(), sys.n);
    const Eigen::Map<const Eigen::VectorXd> p(x.data() + sys.n, sys.n);
    return 0.5 * p.dot(sys.Minv * p) + sys.potential(q);
}

std::vector<double> gradient(const UnconstrainedSystem& sys, std::span<const double> x) {
    const Eigen::Map<const Eigen::VectorXd> q(x.data(), sys.n);
    const Eigen::Map<const Eigen::VectorXd> p(x.data() + sys.n, sys.n);
    const Eigen::VectorXd gq = sys.potential_grad(q);
    const Eigen::VectorXd gp = sys.Minv * p;
    std::vector<double> g(static_cast<size_t>(2 * sys.n));
    for (int i = 0; i < sys.n; ++i) {
        g[i] = gq[i];
        g[sys.n + i] = gp[i];
    }
    return g;
}

std::vector<double> field(const UnconstrainedSystem& sys, std::span<const double> x) {
    std::vector<double> g = gradient(sys, x);
    std::vector<double> f(g.size());
    for (int i = 0; i < sys.n; ++i) {
        f[i] = g[sys.n + i];
        f[sys.n + i] = -g[i];
    }
    return f;
}

double decoupled_g(std::span<const double> x) {
    return 0.5 * (x[0] * x[0] + x[2] * x[2]);
}

Eigen::MatrixXd pendulum_mass_matrix(const PendulumChainSystem& sys,
                                     std::span<const Eigen::Vector3d> q) {
    const int k = sys.k;
    for (const auto& qi : q)
        if (std::abs(qi.norm() - 1.0) > geom::kUnitTol)
            throw std::invalid_argument("pendulum_mass_matrix: q is not on the sphere");
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(3 * k, 3 * k);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            if (i == j)
                M.block<3, 3>(3 * i, 3 * j) = sys.scalar_mass(i, i) * Eigen::Matrix3d::Identity();
            else
                M.block<3, 3>(3 * i, 3 * j) =
                    sys.scalar_mass(i, j) *
                    (Eigen::Matrix3d::Identity() - q[i] * q[i].transpose());
        }
    }
    return M;
}

double pendulum_hamiltonian(const PendulumChainSystem& sys, std::span<const double> x) {
    const int k = sys.k;
    std::vector<double> m(sys.scalar_mass.data(), sys.scalar_mass.data() + k * k);
    // Eigen stores column-major; the scalar mass is symmetric so the row-major
    // view is identical.
    const ChainKinetic<double> kin = chain_kinetic_partials<double>(k, m, x);
    double v = 0.0;
    for (int i = 0; i < k; ++i)
        for (int a = 0; a < 3; ++a) v += sys.potential_coeffs[i][a] * x[3 * i + a];
    return kin.value + v;
}

void pendulum_partials(const PendulumChainSystem& sys, std::span<const double> x,
                       std::span<double> dq_out, std::span<double> dp_out) {
    const int k = sys.k;
    std::vector<double> m(sys.scalar_mass.data(), sys.scalar_mass.data() + k * k);
    const ChainKinetic<double> kin = chain_kinetic_partials<double>(k, m, x);
    for (int i = 0; i < 3 * k; ++i) {
        dq_out[i] = kin.dq[i] + sys.potential_coeffs[i / 3][i % 3];
        dp_out[i] = kin.dp[i];
    }
}

std::vector<double> pendulum_field(const PendulumChainSystem& sys, std::span<const double> x) {
    const int k = sys.k;
    std::vector<double> dq(static_cast<size_t>(3 * k)), dp(static_cast<size_t>(3 * k));
    pendulum_partials(sys, x, dq, dp);
    return geom::projected_sphere_field<double>(k, x, dq, dp);
}

std::vector<geom::AlgebraElement<double>> pendulum_lift(const PendulumChainSystem& sys,
                                                        std::span<const double> x) {
    const int k = sys.k;
    std::vector<double> dq(static_cast<size_t>(3 * k)), dp(static_cast<size_t>(3 * k));
    pendulum_partials(sys, x, dq, dp);
    return geom::lift_from_partials<double>(k, x, dq, dp);
}

std::vector<double> sample_unconstrained_ic(int n, Rng& rng) {
    std::vector<double> x(static_cast<size_t>(2 * n));
    for (double& v : x) v = rng.uniform(-1.0, 1.0);
    return x;
}

std::vector<double> sample_chain_ic(int k, Rng& rng) {
    std::vector<double> x(static_cast<size_t>(6 * k));
    for (int i = 0; i < k; ++i) {
        double q[3];
        rng.unit_sphere(q);
        double v[3] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        const double qv = q[0] * v[0] + q[1] * v[1] + q[2] * v[2];
        for (int a = 0; a < 3; ++a) {
            x[3 * i + a] = q[a];
            x[3 * (k + i) + a] = v[a] - q[a] * qv;
        }
    }
    return x;
}

System make_system(const std::string& id) {
    System sys;
    if (id == "quartic") {
        sys.kind = System::Kind::Unconstrained;
        sys.un = quartic_system();
    } else if (id == "decoupled") {
        sys.kind = System::Kind::Unconstrained;
        sys.un = decoupled_system();
    } else if (id == "pendulum-k1") {
        sys.kind = System::Kind::Chain;
        sys.ch = pendulum_k1();
    } else if (id == "pendulum-k2") {
        sys.kind = System::Kind::Chain;
        sys.ch = pendulum_k2();
    } else {
        throw ConfigError("unknown system id '" + id +
                          "' (expected quartic|decoupled|pendulum-k1|pendulum-k2)");
    }
    return sys;
}

double true_hamiltonian(const System& sys, std::span<const double> x) {
    return sys.kind == System::Kind::Unconstrained ? hamiltonian(sys.un, x)
                                                   : pendulum_hamiltonian(sys.ch, x);
}

std::vector<double> true_field(const System& sys, std::span<const double> x) {
    return sys.kind == System::Kind::Unconstrained ? field(sys.un, x)
                                                   : pendulum_field(sys.ch, x);
}

std::vector<double> sample_ic(const System& sys, Rng& rng) {
    return sys.kind == System::Kind::Unconstrained ? sample_unconstrained_ic(sys.un.n, rng)
                                                   : sample_chain_ic(sys.ch.k, rng);
}

double first_integral(const std::string& gid, std::span<const double> x) {
    if (gid == "h1") return decoupled_g(x);
    throw ConfigError("unknown first integral id '" + gid + "'");
}

} // namespace hamlearn::systems
