#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hamlearn/integrators.hpp"
#include "hamlearn/models.hpp"
#include "hamlearn/systems.hpp"
#include "hamlearn/training.hpp"

namespace hamlearn::evaluation {

struct EvalOptions {
    int n_test = 100;      // number of test initial conditions
    int m_test = 20;       // points per test trajectory (including t = 0)
    double t_final = 1.0;  // test horizon
    double rtol = 1e-10;
    double atol = 1e-12;
    std::uint64_t seed = 0;
};

struct EvalReport {
    double e1 = 0.0;
    double e2 = 0.0;
    double max_drift = 0.0; // over the learned-model test trajectories (chains)
    int n_test = 0, m_test = 0;
    double t_final = 0.0;
    std::uint64_t seed = 0;
};

/// E1: mean squared trajectory deviation between the true and learned flows,
/// both produced by the reference integrator from shared initial conditions,
/// divided by N M and by 2n. E2: mean absolute deviation of H - H_Theta about
/// its mean over fresh sample points.
EvalReport evaluate_model(const systems::System& sys, const models::ModelParams& params,
                          const EvalOptions& opts, bool want_e1 = true, bool want_e2 = true);

double metric_e1(const systems::System& sys, const models::ModelParams& params,
                 const EvalOptions& opts);

double metric_e2(const std::function<double(std::span<const double>)>& true_h,
                 const std::function<double(std::span<const double>)>& model_h,
                 const std::vector<std::vector<double>>& samples);
double metric_e2(const systems::System& sys, const models::ModelParams& params, int n_samples,
                 std::uint64_t seed);

/// max over trajectory points and chain components of max(| |q|-1 |, |q.p|).
double constraint_drift(const integrators::Trajectory& traj, int k);

// ---------------------------------------------------------------------------
// Parameter-study sweep
// ---------------------------------------------------------------------------

struct SweepGrid {
    std::string system_id = "pendulum-k1";
    std::vector<int> n_values;
    std::vector<int> m_values;
    std::vector<double> eps_values;
    std::vector<integrators::StepperId> integrators;
    int repeats = 5;
    std::uint64_t base_seed = 0;
    double t_final = 0.1; // training horizon; dt = t_final / (M-1)
    std::vector<int> hidden = {100, 100, 100};
    training::TrainConfig train; // integrator field overridden per cell
    EvalOptions eval;
    int jobs = 1;
};

struct SweepRecord {
    int n = 0, m = 0;
    double eps = 0.0;
    std::string integrator;
    int repeat = 0; // 1-based
    double e1 = 0.0, e2 = 0.0, final_loss = 0.0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
};

struct SweepResult {
    std::vector<SweepRecord> records;
    /// header: N,M,eps,integrator,repeat,e1,e2,final_loss,seed,status
    std::string records_csv;
    /// per-cell rows plus per-integrator rows (aggregated-out keys printed as *);
    /// header: N,M,eps,integrator,median_e1,geomean_e1,median_e2,geomean_e2,geomean_loss
    std::string aggregates_csv;
};

/// Seed derivation shares clean data, weight init, shuffling and test points
/// across the integrators (and noise levels) of one (N, M, repeat) cell, so
/// integrator comparisons are paired. Runs are independent; failures become
/// status=failed rows and the sweep continues.
SweepResult run_sweep(const SweepGrid& grid);

double geometric_mean(std::span<const double> v);
double median(std::vector<double> v);

} // namespace hamlearn::evaluation
