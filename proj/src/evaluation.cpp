#include "hamlearn/evaluation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "hamlearn/dataset.hpp"
#include "hamlearn/errors.hpp"
#include "hamlearn/geometry.hpp"
#include "hamlearn/parallel.hpp"
#include "hamlearn/rng.hpp"
#include "hamlearn/textio.hpp"

namespace hamlearn::evaluation {

using integrators::StepperId;

double geometric_mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    double acc = 0.0;
    for (double x : v) {
        if (x <= 0.0) return 0.0; // a zero annihilates the geometric mean
        acc += std::log(x);
    }
    return std::exp(acc / static_cast<double>(v.size()));
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double constraint_drift(const integrators::Trajectory& traj, int k) {
    double worst = 0.0;
    for (const auto& s : traj.states)
        worst = std::max(worst, geom::constraint_violation(s, k));
    return worst;
}

EvalReport evaluate_model(const systems::System& sys, const models::ModelParams& params,
                          const EvalOptions& opts, bool want_e1, bool want_e2) {
    if (opts.n_test < 1 || opts.m_test < 2)
        throw ConfigError("evaluate_model: need n_test >= 1 and m_test >= 2");
    EvalReport rep;
    rep.n_test = opts.n_test;
    rep.m_test = opts.m_test;
    rep.t_final = opts.t_final;
    rep.seed = opts.seed;

    const int dim = sys.state_dim();
    Rng rng(opts.seed);
    std::vector<std::vector<double>> ics;
    ics.reserve(static_cast<size_t>(opts.n_test));
    for (int i = 0; i < opts.n_test; ++i) ics.push_back(systems::sample_ic(sys, rng));

    if (want_e1) {
        std::vector<double> times(static_cast<size_t>(opts.m_test));
        const double h = opts.t_final / (opts.m_test - 1);
        for (int j = 0; j < opts.m_test; ++j) times[j] = j * h;
        const integrators::Field true_field = [&sys](std::span<const double> x) {
            return systems::true_field(sys, x);
        };
        const auto model_field = models::make_model_field(params);
        double acc = 0.0;
        double drift = 0.0;
        for (const auto& z : ics) {
            const auto u = integrators::integrate_reference(true_field, z, times, opts.rtol,
                                                            opts.atol);
            const auto v = integrators::integrate_reference(model_field, z, times, opts.rtol,
                                                            opts.atol);
            for (int j = 0; j < opts.m_test; ++j)
                for (int c = 0; c < dim; ++c) {
                    const double d = u.states[j][c] - v.states[j][c];
                    acc += d * d;
                }
            if (sys.chain_k() > 0) drift = std::max(drift, constraint_drift(v, sys.chain_k()));
        }
        rep.e1 = acc / (static_cast<double>(opts.n_test) * opts.m_test * dim);
        rep.max_drift = drift;
    }
    if (want_e2) {
        // fresh samples, same documented sampling law as training
        Rng rng2(mix_seed(opts.seed, "e2-samples"));
        std::vector<std::vector<double>> zs;
        zs.reserve(static_cast<size_t>(opts.n_test));
        for (int i = 0; i < opts.n_test; ++i) zs.push_back(systems::sample_ic(sys, rng2));
        rep.e2 = metric_e2([&sys](std::span<const double> x) { return true_hamiltonian(sys, x); },
                           [&params](std::span<const double> x) {
                               return models::eval_with_input_grad(params, x).value;
                           },
                           zs);
    }
    return rep;
}

double metric_e1(const systems::System& sys, const models::ModelParams& params,
                 const EvalOptions& opts) {
    return evaluate_model(sys, params, opts, true, false).e1;
}

double metric_e2(const std::function<double(std::span<const double>)>& true_h,
                 const std::function<double(std::span<const double>)>& model_h,
                 const std::vector<std::vector<double>>& samples) {
    if (samples.size() < 2) throw ConfigError("metric_e2: need at least 2 samples");
    const size_t n = samples.size();
    std::vector<double> d(n);
    for (size_t i = 0; i < n; ++i) d[i] = true_h(samples[i]) - model_h(samples[i]);
    double mean = 0.0;
    for (double v : d) mean += v;
    mean /= static_cast<double>(n);
    double acc = 0.0;
    for (double v : d) acc += std::abs(v - mean);
    return acc / static_cast<double>(n);
}

double metric_e2(const systems::System& sys, const models::ModelParams& params, int n_samples,
                 std::uint64_t seed) {
    Rng rng(mix_seed(seed, "e2-samples"));
    std::vector<std::vector<double>> zs;
    zs.reserve(static_cast<size_t>(n_samples));
    for (int i = 0; i < n_samples; ++i) zs.push_back(systems::sample_ic(sys, rng));
    return metric_e2([&sys](std::span<const double> x) { return true_hamiltonian(sys, x); },
                     [&params](std::span<const double> x) {
                         return models::eval_with_input_grad(params, x).value;
                     },
                     zs);
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

namespace {

struct RunSpec {
    int n, m, repeat;
    double eps;
    StepperId integ;
};

SweepRecord execute_run(const SweepGrid& grid, const RunSpec& rs) {
    SweepRecord rec;
    rec.n = rs.n;
    rec.m = rs.m;
    rec.eps = rs.eps;
    rec.integrator = integrators::to_string(rs.integ);
    rec.repeat = rs.repeat;

    // Paired seeds: everything except the noise stream is shared across the
    // integrator (and eps) axes of one (N, M, repeat) cell.
    std::uint64_t cell = mix_seed(grid.base_seed, "cell");
    cell = mix_seed(cell, static_cast<std::uint64_t>(rs.n));
    cell = mix_seed(cell, static_cast<std::uint64_t>(rs.m));
    cell = mix_seed(cell, static_cast<std::uint64_t>(rs.repeat));
    const std::uint64_t data_seed = mix_seed(cell, "data");
    const std::uint64_t init_seed = mix_seed(cell, "init");
    const std::uint64_t test_seed = mix_seed(cell, "test");
    const std::uint64_t shuffle_seed = mix_seed(cell, "shuffle");
    const std::uint64_t noise_seed =
        mix_seed(mix_seed(data_seed, "noise"), std::bit_cast<std::uint64_t>(rs.eps));
    rec.seed = data_seed;

    try {
        const systems::System sys = systems::make_system(grid.system_id);
        const double dt = grid.t_final / (rs.m - 1);
        training::TrajectoryDataset ds = training::generate_dataset(
            sys, rs.n, rs.m, dt, grid.eval.rtol, grid.eval.atol, data_seed);
        if (rs.eps > 0.0) ds = training::add_noise(ds, rs.eps, noise_seed);

        models::ModelParams init =
            sys.kind == systems::System::Kind::Chain
                ? models::init_chain(sys.chain_k(), grid.hidden, init_seed)
                : models::init_separable(sys.qdim(), grid.hidden, init_seed);

        training::TrainConfig cfg = grid.train;
        cfg.integrator = rs.integ;
        cfg.shuffle_seed = shuffle_seed;
        cfg.jobs = 1; // parallelism lives at the run level
        cfg.batch_size = std::min(cfg.batch_size, rs.n);
        const training::TrainResult tr = training::train(ds, cfg, init);

        EvalOptions eopts = grid.eval;
        eopts.seed = test_seed;
        const EvalReport rep = evaluate_model(sys, tr.params, eopts);
        rec.e1 = rep.e1;
        rec.e2 = rep.e2;
        rec.final_loss = tr.final_loss;
        rec.ok = true;
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
    }
    return rec;
}

std::string records_to_csv(const std::vector<SweepRecord>& records) {
    std::ostringstream os;
    os << "N,M,eps,integrator,repeat,e1,e2,final_loss,seed,status\n";
    for (const auto& r : records) {
        os << r.n << "," << r.m << "," << fmt_g17(r.eps) << "," << r.integrator << ","
           << r.repeat << ",";
        if (r.ok)
            os << fmt_g17(r.e1) << "," << fmt_g17(r.e2) << "," << fmt_g17(r.final_loss);
        else
            os << "nan,nan,nan";
        os << "," << r.seed << "," << (r.ok ? "ok" : "failed") << "\n";
    }
    return os.str();
}

std::string aggregates_to_csv(const SweepGrid& grid, const std::vector<SweepRecord>& records) {
    std::ostringstream os;
    os << "N,M,eps,integrator,median_e1,geomean_e1,median_e2,geomean_e2,geomean_loss\n";
    auto emit = [&os](const std::string& n, const std::string& m, const std::string& eps,
                      const std::string& integ, const std::vector<double>& e1,
                      const std::vector<double>& e2, const std::vector<double>& loss) {
        if (e1.empty()) return;
        os << n << "," << m << "," << eps << "," << integ << "," << fmt_g17(median(e1)) << ","
           << fmt_g17(geometric_mean(e1)) << "," << fmt_g17(median(e2)) << ","
           << fmt_g17(geometric_mean(e2)) << "," << fmt_g17(geometric_mean(loss)) << "\n";
    };
    // per-cell rows
    for (int n : grid.n_values)
        for (int m : grid.m_values)
            for (double eps : grid.eps_values)
                for (StepperId integ : grid.integrators) {
                    std::vector<double> e1, e2, loss;
                    for (const auto& r : records)
                        if (r.ok && r.n == n && r.m == m && r.eps == eps &&
                            r.integrator == integrators::to_string(integ)) {
                            e1.push_back(r.e1);
                            e2.push_back(r.e2);
                            loss.push_back(r.final_loss);
                        }
                    emit(std::to_string(n), std::to_string(m), fmt_g17(eps),
                         integrators::to_string(integ), e1, e2, loss);
                }
    // per-integrator groups
    for (StepperId integ : grid.integrators) {
        std::vector<double> e1, e2, loss;
        for (const auto& r : records)
            if (r.ok && r.integrator == integrators::to_string(integ)) {
                e1.push_back(r.e1);
                e2.push_back(r.e2);
                loss.push_back(r.final_loss);
            }
        emit("*", "*", "*", integrators::to_string(integ), e1, e2, loss);
    }
    return os.str();
}

} // namespace

SweepResult run_sweep(const SweepGrid& grid) {
    if (grid.n_values.empty() || grid.m_values.empty() || grid.eps_values.empty() ||
        grid.integrators.empty())
        throw ConfigError("run_sweep: empty grid");
    if (grid.repeats < 1) throw ConfigError("run_sweep: repeats must be >= 1");

    std::vector<RunSpec> runs;
    for (int n : grid.n_values)
        for (int m : grid.m_values)
            for (double eps : grid.eps_values)
                for (StepperId integ : grid.integrators)
                    for (int r = 1; r <= grid.repeats; ++r)
                        runs.push_back({n, m, r, eps, integ});

    SweepResult result;
    result.records.resize(runs.size());
    parallel_for(static_cast<int>(runs.size()), grid.jobs, [&](int /*worker*/, int i) {
        result.records[static_cast<size_t>(i)] = execute_run(grid, runs[static_cast<size_t>(i)]);
    });

    result.records_csv = records_to_csv(result.records);
    result.aggregates_csv = aggregates_to_csv(grid, result.records);
    return result;
}

} // namespace hamlearn::evaluation
