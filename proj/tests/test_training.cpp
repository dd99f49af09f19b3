#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "hamlearn/dataset.hpp"
#include "hamlearn/models.hpp"
#include "hamlearn/rng.hpp"
#include "hamlearn/systems.hpp"
#include "hamlearn/training.hpp"

using namespace hamlearn;
using namespace hamlearn::training;
using integrators::StepperId;
using models::ModelParams;

namespace {

TrajectoryDataset harmonic_dataset(int n_traj, int m_points, double dt, std::uint64_t seed) {
    systems::System sys;
    sys.kind = systems::System::Kind::Unconstrained;
    sys.un = systems::harmonic_system(1);
    return generate_dataset(sys, n_traj, m_points, dt, 1e-12, 1e-14, seed);
}

systems::System pendulum_sys() { return systems::make_system("pendulum-k1"); }
systems::System quartic_sys() { return systems::make_system("quartic"); }

double fd_param_gradient_error(const TrajectoryDataset& ds, const ModelParams& params,
                               const TrainConfig& cfg) {
    const std::vector<int> idx = {0};
    const auto [loss, grad] = rollout_loss_with_gradient(ds, idx, params, cfg);
    (void)loss;
    const int n = params.param_count();
    std::vector<double> theta(static_cast<size_t>(n));
    params.pack(theta);
    double worst = 0.0;
    const double step = 1e-5;
    ModelParams scratch = params;
    for (int i = 0; i < n; ++i) {
        const double orig = theta[i];
        theta[i] = orig + step;
        scratch.unpack(theta);
        const double fp = rollout_loss_value(ds, idx, scratch, cfg);
        theta[i] = orig - step;
        scratch.unpack(theta);
        const double fm = rollout_loss_value(ds, idx, scratch, cfg);
        theta[i] = orig;
        const double fd = (fp - fm) / (2 * step);
        worst = std::max(worst, std::abs(fd - grad[i]) / std::max(1.0, std::abs(grad[i])));
    }
    scratch.unpack(theta);
    return worst;
}

} // namespace

TEST_CASE("generate_dataset") {
    SUBCASE("harmonic oscillator half period") {
        systems::System sys;
        sys.kind = systems::System::Kind::Unconstrained;
        sys.un = systems::harmonic_system(1);
        const Sampler fixed = [](Rng&) { return std::vector<double>{1.0, 0.0}; };
        const TrajectoryDataset ds = generate_dataset(sys, fixed, 1, 2, M_PI, 1e-12, 1e-14, 1);
        REQUIRE(ds.N == 1);
        REQUIRE(ds.M == 2);
        const auto y = ds.state(0, 1);
        CHECK(std::abs(y[0] + 1.0) <= 1e-8);
        CHECK(std::abs(y[1]) <= 1e-8);
    }
    SUBCASE("same seed gives a bit-identical dataset") {
        const TrajectoryDataset a = harmonic_dataset(7, 4, 0.2, 99);
        const TrajectoryDataset b = harmonic_dataset(7, 4, 0.2, 99);
        CHECK(a.states == b.states);
        const TrajectoryDataset c = harmonic_dataset(7, 4, 0.2, 100);
        CHECK(a.states != c.states);
    }
    SUBCASE("pendulum targets stay on the manifold") {
        const TrajectoryDataset ds =
            generate_dataset(pendulum_sys(), 20, 5, 0.025, 1e-10, 1e-12, 3);
        CHECK(max_constraint_violation(ds) <= 1e-8);
    }
    SUBCASE("bad arguments rejected") {
        CHECK_THROWS_AS(generate_dataset(pendulum_sys(), 0, 5, 0.1, 1e-10, 1e-12, 1),
                        ConfigError);
        CHECK_THROWS_AS(generate_dataset(pendulum_sys(), 1, 1, 0.1, 1e-10, 1e-12, 1),
                        ConfigError);
    }
}

TEST_CASE("add_noise") {
    const TrajectoryDataset clean = harmonic_dataset(200, 6, 0.1, 4);
    SUBCASE("eps = 0 leaves the data untouched") {
        const TrajectoryDataset noisy = add_noise(clean, 0.0, 5);
        CHECK(noisy.states == clean.states);
        CHECK(noisy.prov.eps == 0.0);
    }
    SUBCASE("initial conditions never perturbed; variance matches eps^2") {
        const double eps = 0.1;
        const TrajectoryDataset noisy = add_noise(clean, eps, 5);
        double acc = 0.0;
        int count = 0;
        for (int i = 0; i < clean.N; ++i) {
            const auto x0c = clean.state(i, 0);
            const auto x0n = noisy.state(i, 0);
            for (int c = 0; c < clean.state_dim(); ++c) CHECK(x0c[c] == x0n[c]);
            for (int j = 1; j < clean.M; ++j) {
                const auto a = clean.state(i, j);
                const auto b = noisy.state(i, j);
                for (int c = 0; c < clean.state_dim(); ++c) {
                    const double d = b[c] - a[c];
                    acc += d * d;
                    ++count;
                }
            }
        }
        const double var = acc / count;
        CHECK(var >= 0.9 * eps * eps);
        CHECK(var <= 1.1 * eps * eps);
    }
    SUBCASE("optional re-projection restores chain invariants") {
        const TrajectoryDataset pend =
            generate_dataset(pendulum_sys(), 10, 4, 0.03, 1e-10, 1e-12, 6);
        const TrajectoryDataset raw = add_noise(pend, 0.05, 7, false);
        const TrajectoryDataset proj = add_noise(pend, 0.05, 7, true);
        CHECK(max_constraint_violation(raw) > 1e-4);
        CHECK(max_constraint_violation(proj) <= 1e-12);
    }
}

TEST_CASE("rollout loss") {
    SUBCASE("self-consistent targets give numerically zero loss") {
        // targets produced by the same integrator as the training rollout
        const ModelParams params = models::init_separable(2, {6}, 17);
        const auto field = models::make_model_field(params);
        const integrators::Step rk = [&field](std::span<const double> x, double h) {
            return integrators::step_rk4<double>(field, x, h);
        };
        Rng rng(5);
        TrajectoryDataset ds;
        ds.N = 2;
        ds.M = 4;
        ds.dt = 0.05;
        ds.qdim = 2;
        ds.k = 0;
        ds.states.resize(static_cast<size_t>(ds.N) * ds.M * 4);
        for (int i = 0; i < ds.N; ++i) {
            const auto x0 = systems::sample_unconstrained_ic(2, rng);
            const auto tr = integrators::rollout(rk, x0, ds.dt, ds.M);
            for (int j = 0; j < ds.M; ++j)
                std::copy(tr.states[j].begin(), tr.states[j].end(), ds.state(i, j).begin());
        }
        TrainConfig cfg;
        cfg.integrator = StepperId::RK4;
        const std::vector<int> idx = {0, 1};
        CHECK(rollout_loss_value(ds, idx, params, cfg) <= 1e-28);
    }
    SUBCASE("unit deviation in one coordinate of the only step") {
        const ModelParams params = models::init_separable(2, {4}, 3);
        const auto field = models::make_model_field(params);
        const integrators::Step rk = [&field](std::span<const double> x, double h) {
            return integrators::step_rk4<double>(field, x, h);
        };
        TrajectoryDataset ds;
        ds.N = 1;
        ds.M = 2;
        ds.dt = 0.1;
        ds.qdim = 2;
        ds.k = 0;
        ds.states.resize(8);
        const std::vector<double> x0 = {0.2, -0.4, 0.5, 0.3};
        const auto tr = integrators::rollout(rk, x0, ds.dt, ds.M);
        std::copy(x0.begin(), x0.end(), ds.state(0, 0).begin());
        auto tgt = ds.state(0, 1);
        std::copy(tr.states[1].begin(), tr.states[1].end(), tgt.begin());
        tgt[0] -= 1.0; // yhat - y = e1
        TrainConfig cfg;
        cfg.integrator = StepperId::RK4;
        const std::vector<int> idx = {0};
        // 1 / (2n * 1 * M) with 2n = 4, M = 2
        CHECK(rollout_loss_value(ds, idx, params, cfg) ==
              doctest::Approx(1.0 / 8.0).epsilon(1e-12));
    }
}

TEST_CASE("regularization term") {
    const systems::System dec = systems::make_system("decoupled");
    const TrajectoryDataset ds = generate_dataset(dec, 3, 5, 0.05, 1e-10, 1e-12, 11);
    const ModelParams params = models::init_separable(2, {6}, 23);
    TrainConfig plain;
    plain.integrator = StepperId::SV;
    TrainConfig reg = plain;
    reg.mu = 0.7;
    reg.first_integral = "h1";

    const std::vector<int> idx = {0, 1, 2};
    const double l0 = rollout_loss_value(ds, idx, params, plain);
    const double l1 = rollout_loss_value(ds, idx, params, reg);

    SUBCASE("difference equals the independently recomputed penalty") {
        // numeric re-rollout with the same integrator
        const auto field = models::make_model_field(params);
        const integrators::Step sv = [&params, &field](std::span<const double> x, double h) {
            const auto gv = [&params](std::span<const double> q) {
                auto gp = models::eval_with_input_grad(
                    params, std::vector<double>{q[0], q[1], 0.0, 0.0});
                return std::vector<double>{gp.grad[0], gp.grad[1]};
            };
            const auto mi = [&params](std::span<const double> ph) {
                auto gp = models::eval_with_input_grad(
                    params, std::vector<double>{0.0, 0.0, ph[0], ph[1]});
                return std::vector<double>{gp.grad[2], gp.grad[3]};
            };
            return integrators::step_stormer_verlet<double>(gv, mi, x, h);
        };
        double expect = 0.0;
        for (int i : idx) {
            const auto x0v = ds.state(i, 0);
            const auto tr = integrators::rollout(sv, x0v, ds.dt, ds.M);
            const double g0 = systems::decoupled_g(tr.states[0]);
            for (int j = 2; j <= ds.M; ++j) { // default index set {2..M}
                const double d = systems::decoupled_g(tr.states[j - 1]) - g0;
                expect += d * d;
            }
        }
        expect *= reg.mu / static_cast<double>(idx.size());
        CHECK(l1 - l0 == doctest::Approx(expect).epsilon(1e-9));
        CHECK(l1 > l0); // generic params do not conserve h1
    }
    SUBCASE("mu = 0 equals the plain loss exactly") {
        TrainConfig zero = reg;
        zero.mu = 0.0;
        CHECK(rollout_loss_value(ds, idx, params, zero) == l0);
    }
    SUBCASE("index set {1} contributes nothing") {
        TrainConfig only1 = reg;
        only1.reg_indices = {1};
        CHECK(rollout_loss_value(ds, idx, params, only1) == doctest::Approx(l0).epsilon(1e-15));
    }
    SUBCASE("unknown first integral id") {
        TrainConfig bad = reg;
        bad.first_integral = "nope";
        CHECK_THROWS_AS(rollout_loss_value(ds, idx, params, bad), ConfigError);
    }
}

TEST_CASE("adam_step") {
    AdamState st;
    std::vector<double> theta = {1.0, -2.0, 0.5};
    SUBCASE("zero gradient leaves parameters unchanged") {
        const std::vector<double> g = {0, 0, 0};
        adam_step(theta, g, st, 1e-3, 0.9, 0.999, 1e-8);
        CHECK(theta == std::vector<double>{1.0, -2.0, 0.5});
    }
    SUBCASE("first step is lr * g / (|g| + eps) elementwise") {
        const std::vector<double> g = {0.3, -4.0, 0.0};
        const double lr = 1e-3, eps = 1e-8;
        adam_step(theta, g, st, lr, 0.9, 0.999, eps);
        CHECK(theta[0] == doctest::Approx(1.0 - lr * 0.3 / (0.3 + eps)).epsilon(1e-12));
        CHECK(theta[1] == doctest::Approx(-2.0 + lr * 4.0 / (4.0 + eps)).epsilon(1e-12));
        CHECK(theta[2] == doctest::Approx(0.5));
    }
    SUBCASE("identical calls produce identical results") {
        AdamState s1, s2;
        std::vector<double> t1 = {0.1, 0.2}, t2 = {0.1, 0.2};
        const std::vector<double> g = {0.5, -0.25};
        for (int i = 0; i < 10; ++i) {
            adam_step(t1, g, s1, 1e-2, 0.9, 0.999, 1e-8);
            adam_step(t2, g, s2, 1e-2, 0.9, 0.999, 1e-8);
        }
        CHECK(t1 == t2);
    }
}

TEST_CASE("parameter gradients match finite differences for every training integrator") {
    SUBCASE("separable model on the quartic system") {
        const TrajectoryDataset ds = generate_dataset(quartic_sys(), 1, 2, 0.05, 1e-10, 1e-12, 31);
        const ModelParams params = models::init_separable(2, {5}, 7);
        for (const StepperId id : {StepperId::EE, StepperId::RK4, StepperId::SV}) {
            TrainConfig cfg;
            cfg.integrator = id;
            CHECK(fd_param_gradient_error(ds, params, cfg) <= 1e-5);
        }
    }
    SUBCASE("chain model on the single pendulum") {
        const TrajectoryDataset ds =
            generate_dataset(pendulum_sys(), 1, 2, 0.05, 1e-10, 1e-12, 37);
        ModelParams params = models::init_chain(1, {5}, 13);
        params.b = {0.25}; // keep max(0,b) away from its kink, where FD is invalid
        for (const StepperId id :
             {StepperId::EE, StepperId::RK4, StepperId::LE, StepperId::CF4}) {
            TrainConfig cfg;
            cfg.integrator = id;
            CHECK(fd_param_gradient_error(ds, params, cfg) <= 1e-5);
        }
    }
    SUBCASE("regularized loss gradients too") {
        const TrajectoryDataset ds =
            generate_dataset(systems::make_system("decoupled"), 1, 3, 0.05, 1e-10, 1e-12, 41);
        const ModelParams params = models::init_separable(2, {5}, 19);
        TrainConfig cfg;
        cfg.integrator = StepperId::SV;
        cfg.mu = 0.5;
        CHECK(fd_param_gradient_error(ds, params, cfg) <= 1e-5);
    }
}

TEST_CASE("train") {
    const TrajectoryDataset ds = generate_dataset(quartic_sys(), 16, 3, 0.05, 1e-10, 1e-12, 51);
    const ModelParams init = models::init_separable(2, {8}, 3);
    TrainConfig cfg;
    cfg.integrator = StepperId::SV;
    cfg.epochs = 30;
    cfg.batch_size = 8;
    cfg.lr = 2e-3;
    cfg.shuffle_seed = 9;

    SUBCASE("zero epochs returns the initial parameters") {
        TrainConfig z = cfg;
        z.epochs = 0;
        const TrainResult r = train(ds, z, init);
        CHECK(r.params.A == init.A);
        CHECK(r.params.layers[0].W == init.layers[0].W);
        CHECK(r.epoch_loss.empty());
        CHECK(std::isfinite(r.final_loss));
    }
    SUBCASE("loss trends downward") {
        const TrainResult r = train(ds, cfg, init);
        REQUIRE(static_cast<int>(r.epoch_loss.size()) == cfg.epochs);
        const double first =
            std::accumulate(r.epoch_loss.begin(), r.epoch_loss.begin() + 10, 0.0) / 10;
        const double last =
            std::accumulate(r.epoch_loss.end() - 10, r.epoch_loss.end(), 0.0) / 10;
        CHECK(last < first);
    }
    SUBCASE("training is bit-reproducible, with and without worker threads") {
        const TrainResult a = train(ds, cfg, init);
        const TrainResult b = train(ds, cfg, init);
        CHECK(a.params.A == b.params.A);
        CHECK(a.params.layers[0].W == b.params.layers[0].W);
        CHECK(a.epoch_loss == b.epoch_loss);
        TrainConfig threaded = cfg;
        threaded.jobs = 3;
        const TrainResult c = train(ds, threaded, init);
        CHECK(a.params.layers[0].W == c.params.layers[0].W);
        CHECK(a.epoch_loss == c.epoch_loss);
    }
    SUBCASE("Lie-group training evaluates only on-manifold stage points") {
        const TrajectoryDataset pend =
            generate_dataset(pendulum_sys(), 8, 3, 0.05, 1e-10, 1e-12, 53);
        const ModelParams cinit = models::init_chain(1, {6}, 5);
        TrainConfig ccfg;
        ccfg.integrator = StepperId::CF4;
        ccfg.epochs = 5;
        ccfg.batch_size = 4;
        const TrainResult r = train(pend, ccfg, cinit);
        CHECK(r.max_stage_violation <= 1e-12);
        TrainConfig acfg = ccfg;
        acfg.integrator = StepperId::RK4;
        const TrainResult ra = train(pend, acfg, cinit);
        CHECK(ra.max_stage_violation > 1e-12); // ambient stages leave the manifold
    }
    SUBCASE("incompatible integrator and variant rejected") {
        const TrajectoryDataset pend =
            generate_dataset(pendulum_sys(), 2, 3, 0.05, 1e-10, 1e-12, 57);
        const ModelParams cinit = models::init_chain(1, {4}, 5);
        TrainConfig bad;
        bad.integrator = StepperId::SV;
        bad.epochs = 1;
        bad.batch_size = 2;
        CHECK_THROWS_AS(train(pend, bad, cinit), ConfigError);
        TrainConfig lie;
        lie.integrator = StepperId::LE;
        lie.epochs = 1;
        lie.batch_size = 2;
        CHECK_THROWS_AS(train(ds, lie, init), ConfigError);
    }
}
