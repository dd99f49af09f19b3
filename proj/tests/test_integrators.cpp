#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "hamlearn/geometry.hpp"
#include "hamlearn/integrators.hpp"
#include "hamlearn/rng.hpp"
#include "hamlearn/systems.hpp"
#include "support.hpp"

using namespace hamlearn;
using namespace hamlearn::integrators;

namespace {

Field zero_field() {
    return [](std::span<const double> x) { return std::vector<double>(x.size(), 0.0); };
}

Field scalar_growth() {
    return [](std::span<const double> x) { return std::vector<double>{x[0]}; };
}

std::vector<std::vector<double>> pendulum_ics(int count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> ics;
    for (int i = 0; i < count; ++i) ics.push_back(systems::sample_chain_ic(1, rng));
    return ics;
}

} // namespace

TEST_CASE("stepper registry") {
    CHECK(parse_stepper("cf4") == StepperId::CF4);
    CHECK(to_string(parse_stepper("sv")) == "sv");
    CHECK_THROWS_AS(parse_stepper("rk5"), ConfigError);
    CHECK(stepper_info(StepperId::EE).order == 1);
    CHECK(stepper_info(StepperId::RK4).order == 4);
    CHECK(stepper_info(StepperId::SV).order == 2);
    CHECK(stepper_info(StepperId::LE).lie_group);
    CHECK(stepper_info(StepperId::CF4).lie_group);
    CHECK(!stepper_info(StepperId::RK4).lie_group);
}

TEST_CASE("explicit Euler") {
    const std::vector<double> x = {1.0};
    const auto f0 = zero_field();
    CHECK(step_explicit_euler<double>(f0, x, 0.1)[0] == 1.0);
    const auto fg = scalar_growth();
    CHECK(step_explicit_euler<double>(fg, x, 0.1)[0] == doctest::Approx(1.1).epsilon(1e-15));
}

TEST_CASE("classical RK4") {
    const std::vector<double> x = {1.0};
    const auto f0 = zero_field();
    CHECK(step_rk4<double>(f0, x, 0.1)[0] == 1.0);
    const auto fg = scalar_growth();
    // Taylor expansion of e^h through h^4
    const double expect = 1.0 + 0.1 + 0.005 + 0.1 * 0.1 * 0.1 / 6.0 + 0.0001 / 24.0;
    CHECK(step_rk4<double>(fg, x, 0.1)[0] == doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("Stormer-Verlet") {
    SUBCASE("free flight when grad V = 0") {
        const auto gv = [](std::span<const double> q) {
            return std::vector<double>(q.size(), 0.0);
        };
        const auto mi = [](std::span<const double> p) {
            return std::vector<double>(p.begin(), p.end());
        };
        const std::vector<double> x = {0.0, 2.0};
        const auto out = step_stormer_verlet<double>(gv, mi, x, 0.5);
        CHECK(out[0] == doctest::Approx(1.0));
        CHECK(out[1] == doctest::Approx(2.0));
    }
    SUBCASE("one harmonic step by hand") {
        const auto gv = [](std::span<const double> q) {
            return std::vector<double>{q[0]};
        };
        const auto mi = [](std::span<const double> p) {
            return std::vector<double>(p.begin(), p.end());
        };
        const std::vector<double> x = {1.0, 0.0};
        const auto out = step_stormer_verlet<double>(gv, mi, x, 0.1);
        CHECK(out[0] == doctest::Approx(0.995).epsilon(1e-15));
        CHECK(out[1] == doctest::Approx(-0.09975).epsilon(1e-15));
    }
    SUBCASE("bounded energy error over 1e5 quartic steps") {
        const systems::UnconstrainedSystem sys = systems::quartic_system();
        const auto gv = [&sys](std::span<const double> q) {
            const Eigen::VectorXd g = sys.potential_grad(
                Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<long>(q.size())));
            return std::vector<double>(g.data(), g.data() + g.size());
        };
        const auto mi = [&sys](std::span<const double> p) {
            const Eigen::VectorXd v =
                sys.Minv * Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<long>(p.size()));
            return std::vector<double>(v.data(), v.data() + v.size());
        };
        std::vector<double> x = {0.4, -0.3, 0.2, 0.5};
        const double h0 = systems::hamiltonian(sys, x);
        double worst_early = 0, worst_late = 0;
        for (int s = 0; s < 100000; ++s) {
            x = step_stormer_verlet<double>(gv, mi, x, 0.01);
            const double d = std::abs(systems::hamiltonian(sys, x) - h0);
            if (s < 10000) worst_early = std::max(worst_early, d);
            if (s >= 90000) worst_late = std::max(worst_late, d);
        }
        CHECK(worst_late <= 1e-3);               // O(h^2) oscillation, no drift
        CHECK(worst_late <= 3.0 * worst_early + 1e-12);
    }
}

TEST_CASE("Lie Euler and CF4 stay on the manifold exactly") {
    const systems::PendulumChainSystem sys = systems::pendulum_k1();
    const auto lift = [&sys](std::span<const double> x) {
        return systems::pendulum_lift(sys, x);
    };
    SUBCASE("zero lift is the identity") {
        const auto zl = [](std::span<const double>) {
            return std::vector<geom::AlgebraElement<double>>(1);
        };
        const std::vector<double> y = {1, 0, 0, 0, 0.3, 0};
        const auto le = step_lie_euler<double>(zl, y, 0.3);
        const auto cf = step_cf4<double>(zl, y, 0.3);
        for (int c = 0; c < 6; ++c) {
            CHECK(le[c] == doctest::Approx(y[c]));
            CHECK(cf[c] == doctest::Approx(y[c]));
        }
    }
    SUBCASE("unit sphere preserved for large steps") {
        for (const double h : {0.1, 0.5, 1.0}) {
            std::vector<double> y = {1, 0, 0, 0, 0.4, -0.2};
            for (int s = 0; s < 50; ++s) {
                y = step_lie_euler<double>(lift, y, h);
                const double qn = std::sqrt(y[0] * y[0] + y[1] * y[1] + y[2] * y[2]);
                CHECK(std::abs(qn - 1.0) <= 1e-13);
            }
        }
    }
    SUBCASE("no drift over 1e4 CF4 steps") {
        std::vector<double> y = pendulum_ics(1, 5)[0];
        double worst = 0;
        for (int s = 0; s < 10000; ++s) {
            y = step_cf4<double>(lift, y, 0.1);
            worst = std::max(worst, geom::constraint_violation(y, 1));
        }
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("ambient integrators drift off the manifold, at their order") {
    const systems::PendulumChainSystem sys = systems::pendulum_k1();
    const Field field = [&sys](std::span<const double> x) {
        return systems::pendulum_field(sys, x);
    };
    const auto drift_after = [&](double h, int steps) {
        std::vector<double> y = pendulum_ics(1, 42)[0];
        double worst = 0;
        for (int s = 0; s < steps; ++s) {
            y = step_rk4<double>(field, y, h);
            worst = std::max(worst, geom::constraint_violation(y, 1));
        }
        return worst;
    };
    const double d1 = drift_after(0.05, 1000);
    const double d2 = drift_after(0.025, 2000); // same final time
    CHECK(d1 > 1e-12);
    const double ratio = d1 / d2;
    CHECK(ratio >= 8.0);
    CHECK(ratio <= 32.0);
}

TEST_CASE("reference integrator") {
    SUBCASE("scalar exponential growth") {
        const auto fg = scalar_growth();
        const std::vector<double> times = {0.0, 1.0};
        const auto tr = integrate_reference(fg, std::vector<double>{1.0}, times);
        CHECK(std::abs(tr.states[1][0] - std::exp(1.0)) <= 1e-9);
    }
    SUBCASE("harmonic oscillator returns after one period") {
        const Field f = [](std::span<const double> x) {
            return std::vector<double>{x[1], -x[0]};
        };
        const std::vector<double> times = {0.0, 2.0 * M_PI};
        const auto tr = integrate_reference(f, std::vector<double>{1.0, 0.0}, times);
        CHECK(testsupport::l2_error(tr.states[1], std::vector<double>{1.0, 0.0}) <= 1e-8);
    }
    SUBCASE("pendulum energy conserved and dense output stays on grid") {
        const systems::PendulumChainSystem sys = systems::pendulum_k1();
        const Field f = [&sys](std::span<const double> x) {
            return systems::pendulum_field(sys, x);
        };
        const auto ic = pendulum_ics(1, 7)[0];
        std::vector<double> times(21);
        for (int j = 0; j <= 20; ++j) times[j] = j * 0.05;
        const auto tr = integrate_reference(f, ic, times);
        const double h0 = systems::pendulum_hamiltonian(sys, ic);
        for (const auto& s : tr.states) {
            CHECK(std::abs(systems::pendulum_hamiltonian(sys, s) - h0) <= 1e-8);
            CHECK(geom::constraint_violation(s, 1) <= 1e-8);
        }
    }
    SUBCASE("empty or bad grids rejected") {
        CHECK_THROWS_AS(
            integrate_reference(zero_field(), std::vector<double>{1.0}, std::vector<double>{}),
            ConfigError);
        CHECK_THROWS_AS(integrate_reference(zero_field(), std::vector<double>{1.0},
                                            std::vector<double>{0.5, 1.0}),
                        ConfigError);
    }
}

TEST_CASE("rollout") {
    const Step euler_growth = [](std::span<const double> x, double h) {
        return std::vector<double>{x[0] * (1.0 + h)};
    };
    SUBCASE("M=2 equals one stepper call") {
        const auto tr = rollout(euler_growth, std::vector<double>{1.0}, 0.1, 2);
        REQUIRE(tr.states.size() == 2);
        CHECK(tr.states[1][0] == doctest::Approx(1.1));
        CHECK(tr.times[1] == doctest::Approx(0.1));
    }
    SUBCASE("zero field gives a constant trajectory") {
        const Step still = [](std::span<const double> x, double) {
            return std::vector<double>(x.begin(), x.end());
        };
        const auto tr = rollout(still, std::vector<double>{2.0, 3.0}, 0.2, 5);
        for (const auto& s : tr.states) {
            CHECK(s[0] == 2.0);
            CHECK(s[1] == 3.0);
        }
    }
    SUBCASE("RK4 rollout tracks the reference flow to fourth order") {
        const systems::UnconstrainedSystem sys = systems::quartic_system();
        const Field f = [&sys](std::span<const double> x) { return systems::field(sys, x); };
        const Step s4 = [&f](std::span<const double> x, double h) {
            return step_rk4<double>(f, x, h);
        };
        const std::vector<double> x0 = {0.4, -0.2, 0.3, 0.1};
        const auto tr = rollout(s4, x0, 0.05, 7);
        const auto tr2 = rollout(s4, x0, 0.025, 13);
        const auto ref = integrate_reference(f, x0, tr.times);
        const double e1 = testsupport::l2_error(tr.states[6], ref.states[6]);
        const double e2 = testsupport::l2_error(tr2.states[12], ref.states[6]);
        CHECK(e1 <= 1e-5);
        CHECK(e1 / e2 >= 10.0); // halving the step cuts the error ~16x
        CHECK(e1 / e2 <= 24.0);
    }
    SUBCASE("M < 2 rejected; bad states surface with the step index") {
        CHECK_THROWS_AS(rollout(euler_growth, std::vector<double>{1.0}, 0.1, 1), ConfigError);
        const Step blowup = [](std::span<const double>, double) {
            return std::vector<double>{std::nan("")};
        };
        try {
            rollout(blowup, std::vector<double>{1.0}, 0.1, 3);
            CHECK(false);
        } catch (const IntegrationError& e) {
            CHECK(std::string(e.what()).find("step 1") != std::string::npos);
        }
    }
}

TEST_CASE("measured convergence orders") {
    const std::vector<double> hs = {0.1, 0.05, 0.025, 0.0125};
    SUBCASE("pendulum: EE/LE first order, RK4/CF4 fourth order") {
        const systems::PendulumChainSystem sys = systems::pendulum_k1();
        const Field field = [&sys](std::span<const double> x) {
            return systems::pendulum_field(sys, x);
        };
        const auto lift = [&sys](std::span<const double> x) {
            return systems::pendulum_lift(sys, x);
        };
        const auto ics = pendulum_ics(3, 1234);
        const double t_end = 0.2;

        const Step ee = [&](std::span<const double> x, double h) {
            return step_explicit_euler<double>(field, x, h);
        };
        const Step rk = [&](std::span<const double> x, double h) {
            return step_rk4<double>(field, x, h);
        };
        const Step le = [&](std::span<const double> x, double h) {
            return step_lie_euler<double>(lift, x, h);
        };
        const Step cf = [&](std::span<const double> x, double h) {
            return step_cf4<double>(lift, x, h);
        };
        CHECK(testsupport::convergence_slope(ee, field, ics, hs, t_end) ==
              doctest::Approx(1.0).epsilon(0.2));
        CHECK(testsupport::convergence_slope(le, field, ics, hs, t_end) ==
              doctest::Approx(1.0).epsilon(0.2));
        CHECK(testsupport::convergence_slope(rk, field, ics, hs, t_end) ==
              doctest::Approx(4.0).epsilon(0.075));
        CHECK(testsupport::convergence_slope(cf, field, ics, hs, t_end) ==
              doctest::Approx(4.0).epsilon(0.075));
    }
    SUBCASE("quartic: Stormer-Verlet second order") {
        const systems::UnconstrainedSystem sys = systems::quartic_system();
        const Field field = [&sys](std::span<const double> x) { return systems::field(sys, x); };
        const auto gv = [&sys](std::span<const double> q) {
            const Eigen::VectorXd g = sys.potential_grad(
                Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<long>(q.size())));
            return std::vector<double>(g.data(), g.data() + g.size());
        };
        const auto mi = [&sys](std::span<const double> p) {
            const Eigen::VectorXd v =
                sys.Minv * Eigen::Map<const Eigen::VectorXd>(p.data(), static_cast<long>(p.size()));
            return std::vector<double>(v.data(), v.data() + v.size());
        };
        const Step sv = [&](std::span<const double> x, double h) {
            return step_stormer_verlet<double>(gv, mi, x, h);
        };
        Rng rng(55);
        std::vector<std::vector<double>> ics;
        for (int i = 0; i < 3; ++i) ics.push_back(systems::sample_unconstrained_ic(2, rng));
        CHECK(testsupport::convergence_slope(sv, field, ics, hs, 0.2) ==
              doctest::Approx(2.0).epsilon(0.1));
    }
}

TEST_CASE("steppers are deterministic") {
    const systems::PendulumChainSystem sys = systems::pendulum_k1();
    const auto lift = [&sys](std::span<const double> x) {
        return systems::pendulum_lift(sys, x);
    };
    const auto y0 = pendulum_ics(1, 3)[0];
    const auto a = step_cf4<double>(lift, y0, 0.07);
    const auto b = step_cf4<double>(lift, y0, 0.07);
    CHECK(a == b);
}
