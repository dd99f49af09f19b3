#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hamlearn/fdcheck.hpp"
#include "hamlearn/rng.hpp"
#include "hamlearn/systems.hpp"

using namespace hamlearn;
using namespace hamlearn::systems;

TEST_CASE("quartic system values and gradient") {
    const UnconstrainedSystem sys = quartic_system();
    CHECK(hamiltonian(sys, std::vector<double>{0, 0, 0, 0}) == doctest::Approx(0.0));
    CHECK(hamiltonian(sys, std::vector<double>{0, 0, 1, 0}) == doctest::Approx(2.5));
    CHECK(hamiltonian(sys, std::vector<double>{1, 1, 0, 0}) == doctest::Approx(1.5));

    Rng rng(1);
    for (int i = 0; i < 10; ++i) {
        std::vector<double> x(4);
        for (double& v : x) v = rng.uniform(-1, 1);
        const auto g = gradient(sys, x);
        CHECK(finite_difference_check(
                  [&sys](std::span<const double> xx) { return hamiltonian(sys, xx); }, x, g,
                  1e-5) <= 1e-8);
        // energy conservation along the canonical field
        const auto f = field(sys, x);
        double dH = 0;
        for (int c = 0; c < 4; ++c) dH += g[c] * f[c];
        CHECK(std::abs(dH) <= 1e-12);
    }
}

TEST_CASE("decoupled system and its extra first integral") {
    const UnconstrainedSystem sys = decoupled_system();
    CHECK(hamiltonian(sys, std::vector<double>{0, 0, 0, 0}) == doctest::Approx(0.0));
    CHECK(decoupled_g(std::vector<double>{0, 0, 0, 0}) == doctest::Approx(0.0));
    CHECK(hamiltonian(sys, std::vector<double>{1, 0, 0, 0}) == doctest::Approx(0.5));
    CHECK(decoupled_g(std::vector<double>{1, 0, 0, 0}) == doctest::Approx(0.5));
    CHECK(hamiltonian(sys, std::vector<double>{0, 1, 0, 0}) == doctest::Approx(0.75));
    CHECK(decoupled_g(std::vector<double>{0, 1, 0, 0}) == doctest::Approx(0.0));

    SUBCASE("Poisson commutation {H, G} = 0") {
        Rng rng(2);
        for (int i = 0; i < 50; ++i) {
            std::vector<double> x(4);
            for (double& v : x) v = rng.uniform(-1.5, 1.5);
            const auto gh = gradient(sys, x);
            // grad G = (q1, 0, p1, 0)
            const double gg[4] = {x[0], 0.0, x[2], 0.0};
            // {H,G} = dG/dq . dH/dp - dG/dp . dH/dq
            const double pb = gg[0] * gh[2] + gg[1] * gh[3] - gg[2] * gh[0] - gg[3] * gh[1];
            CHECK(std::abs(pb) <= 1e-12);
        }
    }
}

TEST_CASE("pendulum mass matrix blocks") {
    SUBCASE("k=1 identity") {
        const PendulumChainSystem sys = pendulum_k1();
        const Eigen::Vector3d q(0, 0, 1);
        const Eigen::MatrixXd M = pendulum_mass_matrix(sys, std::vector<Eigen::Vector3d>{q});
        CHECK((M - Eigen::Matrix3d::Identity()).norm() <= 1e-15);
    }
    SUBCASE("k=2 block structure at q1=q2=e3") {
        const PendulumChainSystem sys = pendulum_k2();
        const Eigen::Vector3d e3(0, 0, 1);
        const Eigen::MatrixXd M =
            pendulum_mass_matrix(sys, std::vector<Eigen::Vector3d>{e3, e3});
        CHECK((M.block<3, 3>(0, 0) - 3 * Eigen::Matrix3d::Identity()).norm() <= 1e-15);
        CHECK((M.block<3, 3>(3, 3) - Eigen::Matrix3d::Identity()).norm() <= 1e-15);
        Eigen::Matrix3d off = Eigen::Matrix3d::Identity();
        off(2, 2) = 0.0;
        CHECK((M.block<3, 3>(0, 3) - off).norm() <= 1e-15);
        CHECK((M.block<3, 3>(3, 0) - off).norm() <= 1e-15);
    }
    SUBCASE("k=1 tangent kinetic energy is |p|^2 / (2 m11)") {
        const PendulumChainSystem sys = pendulum_k1();
        Rng rng(7);
        for (int i = 0; i < 10; ++i) {
            const auto x = sample_chain_ic(1, rng);
            const double pn = x[3] * x[3] + x[4] * x[4] + x[5] * x[5];
            const double v = 9.81 * x[2];
            CHECK(pendulum_hamiltonian(sys, x) == doctest::Approx(0.5 * pn + v).epsilon(1e-13));
        }
    }
    SUBCASE("non-unit configuration rejected") {
        const PendulumChainSystem sys = pendulum_k1();
        CHECK_THROWS_AS(
            pendulum_mass_matrix(sys, std::vector<Eigen::Vector3d>{Eigen::Vector3d(0, 0, 2)}),
            std::invalid_argument);
    }
}

TEST_CASE("true pendulum field") {
    SUBCASE("hanging release from the horizontal") {
        const PendulumChainSystem sys = pendulum_k1();
        const std::vector<double> x = {1, 0, 0, 0, 0, 0}; // q = e1, p = 0
        const auto f = pendulum_field(sys, x);
        for (int c = 0; c < 3; ++c) CHECK(f[c] == doctest::Approx(0.0));
        CHECK(f[3] == doctest::Approx(0.0));
        CHECK(f[4] == doctest::Approx(0.0));
        CHECK(f[5] == doctest::Approx(-9.81));
    }
    SUBCASE("equilibrium at the stable pole") {
        const PendulumChainSystem sys = pendulum_k1();
        const std::vector<double> x = {0, 0, -1, 0, 0, 0};
        const auto f = pendulum_field(sys, x);
        for (int c = 0; c < 6; ++c) CHECK(std::abs(f[c]) <= 1e-15);
    }
    SUBCASE("energy conservation and tangency for k=1 and k=2") {
        Rng rng(11);
        for (const int k : {1, 2}) {
            const PendulumChainSystem sys = k == 1 ? pendulum_k1() : pendulum_k2();
            for (int i = 0; i < 50; ++i) {
                const auto x = sample_chain_ic(k, rng);
                const auto f = pendulum_field(sys, x);
                std::vector<double> dq(3 * k), dp(3 * k);
                pendulum_partials(sys, x, dq, dp);
                double dH = 0;
                for (int c = 0; c < 3 * k; ++c)
                    dH += dq[c] * f[c] + dp[c] * f[3 * k + c];
                CHECK(std::abs(dH) <= 1e-12);
                for (int c = 0; c < k; ++c) {
                    // q_i . qdot_i = 0 and d/dt (q_i . p_i) = 0
                    double qdq = 0, qdp = 0;
                    for (int a = 0; a < 3; ++a) {
                        qdq += x[3 * c + a] * f[3 * c + a];
                        qdp += x[3 * c + a] * f[3 * (k + c) + a] +
                               f[3 * c + a] * x[3 * (k + c) + a];
                    }
                    CHECK(std::abs(qdq) <= 1e-12);
                    CHECK(std::abs(qdp) <= 1e-12);
                }
            }
        }
    }
    SUBCASE("ambient partials match finite differences (k=2)") {
        const PendulumChainSystem sys = pendulum_k2();
        Rng rng(13);
        const auto x = sample_chain_ic(2, rng);
        std::vector<double> dq(6), dp(6), g(12);
        pendulum_partials(sys, x, dq, dp);
        for (int c = 0; c < 6; ++c) {
            g[c] = dq[c];
            g[6 + c] = dp[c];
        }
        CHECK(finite_difference_check(
                  [&sys](std::span<const double> xx) { return pendulum_hamiltonian(sys, xx); },
                  x, g, 1e-6) <= 1e-7);
    }
}

TEST_CASE("samplers respect their domains and are deterministic") {
    Rng a(99), b(99);
    const auto x1 = sample_chain_ic(2, a);
    const auto x2 = sample_chain_ic(2, b);
    CHECK(x1 == x2);
    CHECK(geom::constraint_violation(x1, 2) <= 1e-14);

    Rng c(5);
    const auto u = sample_unconstrained_ic(3, c);
    REQUIRE(u.size() == 6);
    for (double v : u) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("system registry") {
    for (const std::string id : {"quartic", "decoupled", "pendulum-k1", "pendulum-k2"}) {
        const System sys = make_system(id);
        CHECK(sys.id() == id);
        Rng rng(1);
        const auto x = sample_ic(sys, rng);
        CHECK(static_cast<int>(x.size()) == sys.state_dim());
        CHECK(std::isfinite(true_hamiltonian(sys, x)));
        CHECK(static_cast<int>(true_field(sys, x).size()) == sys.state_dim());
    }
    CHECK_THROWS_AS(make_system("nope"), ConfigError);
    CHECK(first_integral("h1", std::vector<double>{1, 0, 0, 0}) == doctest::Approx(0.5));
    CHECK_THROWS_AS(first_integral("nope", std::vector<double>{1, 0, 0, 0}), ConfigError);
}
