#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hamlearn/dataset.hpp"
#include "hamlearn/integrators.hpp"
#include "hamlearn/models.hpp"
#include "hamlearn/tape.hpp"

namespace hamlearn::training {

struct TrainConfig {
    integrators::StepperId integrator = integrators::StepperId::RK4;
    int epochs = 200;
    int batch_size = 32;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    double mu = 0.0;                  // first-integral regularization weight
    std::vector<int> reg_indices;     // 1-based subset of {1..M}; empty -> {2..M}
    std::string first_integral = "h1";
    std::uint64_t shuffle_seed = 0;
    int jobs = 1;
};

// ---------------------------------------------------------------------------
// Recurrent rollout loss
//
//   L(Theta) = 1/(2n) 1/(B M) sum_i sum_j |yhat_i^j - y_i^j|^2
//            + mu/B sum_i sum_{j in I} (G(yhat_i^j) - G(x_i))^2
//
// One graph is built per trajectory shape; per trajectory only the input and
// parameter slots are re-streamed, so epochs never rebuild the tape.
// ---------------------------------------------------------------------------

class TrajLossGraph {
public:
    /// `norm_main` multiplies the squared-error sum (1/(2n B M)); `norm_reg`
    /// multiplies the regularization sum (mu/B). Both are input slots and can
    /// be changed per batch via set_norms.
    TrajLossGraph(const models::ModelParams& shape, integrators::StepperId integrator, int m_points,
                  double dt, int chain_k, double mu, std::span<const int> reg_indices,
                  const std::string& first_integral);

    void set_theta(std::span<const double> theta);
    void set_norms(double norm_main, double norm_reg);

    struct RunResult {
        double objective;      // scaled main + regularization value
        double main_sq_sum;    // raw sum_j |yhat - y|^2
        double stage_violation; // max constraint violation over stage points (chain)
    };
    /// Streams one trajectory (M * 2n values), evaluates, and if `grad_out` is
    /// non-empty runs the reverse pass, accumulating d(objective)/d(theta).
    RunResult run(std::span<const double> traj_states, std::span<double> grad_out);

    int num_params() const { return n_params_; }
    int graph_size() const { return tape_.size(); }

private:
    diff::Tape tape_;
    diff::Expr root_{};
    diff::Expr main_sum_{};
    int dim_ = 0, m_points_ = 0, k_ = 0, n_params_ = 0;
    int norm_main_slot_ = 0, norm_reg_slot_ = 0;
    std::vector<int> stage_state_ids_; // groups of dim_ node ids (chain only)
};

/// Non-streamed convenience: Eq. 6 loss (+ regularization) over the listed
/// trajectories at the given parameters, with its full parameter gradient.
std::pair<double, std::vector<double>> rollout_loss_with_gradient(
    const TrajectoryDataset& ds, std::span<const int> traj_indices,
    const models::ModelParams& params, const TrainConfig& cfg);
double rollout_loss_value(const TrajectoryDataset& ds, std::span<const int> traj_indices,
                          const models::ModelParams& params, const TrainConfig& cfg);

// ---------------------------------------------------------------------------
// Optimizer and epoch loop
// ---------------------------------------------------------------------------

struct AdamState {
    std::vector<double> m, v;
    long t = 0;
};

/// Standard bias-corrected Adam update, in place.
void adam_step(std::span<double> theta, std::span<const double> grad, AdamState& state, double lr,
               double beta1, double beta2, double eps_adam);

struct TrainResult {
    models::ModelParams params;
    std::vector<double> epoch_loss; // dataset-mean Eq. 6 loss per epoch
    double final_loss = 0.0;
    double max_stage_violation = 0.0;
};

/// Shuffled whole-trajectory minibatches; deterministic for fixed seeds and
/// config regardless of cfg.jobs (ordered gradient reduction).
TrainResult train(const TrajectoryDataset& ds, const TrainConfig& cfg,
                  const models::ModelParams& init);

/// Throws ConfigError when the integrator cannot train the model variant
/// (sv needs separable; le/cf4 need chains).
void check_compatible(integrators::StepperId id, const models::ModelParams& shape, int chain_k);

} // namespace hamlearn::training
