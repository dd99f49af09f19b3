#include "hamlearn/training.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "hamlearn/errors.hpp"
#include "hamlearn/geometry.hpp"
#include "hamlearn/parallel.hpp"
#include "hamlearn/rng.hpp"

namespace hamlearn::training {

using diff::Expr;
using integrators::StepperId;
using models::ModelParams;
using models::ModelRef;

void check_compatible(StepperId id, const ModelParams& shape, int chain_k) {
    const bool chain = shape.variant == models::Variant::Chain;
    switch (id) {
    case StepperId::SV:
        if (chain) throw ConfigError("integrator 'sv' trains separable models only");
        return;
    case StepperId::LE:
    case StepperId::CF4:
        if (!chain || chain_k <= 0)
            throw ConfigError("integrator '" + integrators::to_string(id) +
                              "' requires a (T*S^2)^k chain model and dataset");
        return;
    case StepperId::EE:
    case StepperId::RK4: return;
    case StepperId::Dopri54:
        throw ConfigError("'dopri54' is the reference integrator; pick ee|rk4|sv|le|cf4 for "
                          "training");
    }
}

namespace {

/// A^T A v for a row-major n x n factor of Exprs (or doubles).
template <class S>
std::vector<S> gram_matvec(std::span<const S> A, int n, std::span<const S> v) {
    std::vector<S> t;
    t.reserve(static_cast<size_t>(n));
    for (int r = 0; r < n; ++r)
        t.push_back(dot_product(
            A.subspan(static_cast<size_t>(r) * n, static_cast<size_t>(n)), v));
    std::vector<S> out;
    out.reserve(static_cast<size_t>(n));
    std::vector<S> col(static_cast<size_t>(n), t[0]);
    for (int c = 0; c < n; ++c) {
        for (int r = 0; r < n; ++r) col[r] = A[static_cast<size_t>(r) * n + c];
        out.push_back(dot_product(std::span<const S>(col), std::span<const S>(t)));
    }
    return out;
}

} // namespace

TrajLossGraph::TrajLossGraph(const ModelParams& shape, StepperId integrator, int m_points,
                             double dt, int chain_k, double mu,
                             std::span<const int> reg_indices,
                             const std::string& first_integral) {
    check_compatible(integrator, shape, chain_k);
    dim_ = 2 * shape.qdim;
    m_points_ = m_points;
    k_ = shape.variant == models::Variant::Chain ? shape.k : 0;
    n_params_ = shape.param_count();

    ModelRef<Expr> mref = models::make_param_ref(tape_, shape);

    // Input slots mirror the trajectory memory layout: M blocks of 2n values.
    std::vector<Expr> x;
    x.reserve(static_cast<size_t>(dim_));
    for (int c = 0; c < dim_; ++c) {
        // build-time placeholder values keep chain states on the manifold
        double v = 0.0;
        if (k_ > 0 && c < 3 * k_ && c % 3 == 2) v = 1.0; // q_i = e3
        x.push_back(tape_.input(c, v));
    }
    std::vector<std::vector<Expr>> targets(static_cast<size_t>(m_points_));
    for (int j = 1; j < m_points_; ++j) {
        targets[j].reserve(static_cast<size_t>(dim_));
        for (int c = 0; c < dim_; ++c)
            targets[j].push_back(tape_.input(j * dim_ + c, tape_.value(x[c])));
    }
    norm_main_slot_ = m_points_ * dim_;
    norm_reg_slot_ = norm_main_slot_ + 1;
    const Expr norm_main = tape_.input(norm_main_slot_, 1.0);
    const Expr norm_reg = tape_.input(norm_reg_slot_, mu);

    const bool chain = k_ > 0;
    auto record = [&](std::span<const Expr> s) {
        if (!chain) return;
        for (const Expr& e : s) stage_state_ids_.push_back(e.id);
    };
    auto field = [&](std::span<const Expr> s) {
        record(s);
        return models::model_field_t<Expr>(mref, s);
    };
    auto lift = [&](std::span<const Expr> s) {
        record(s);
        return models::model_lift_t<Expr>(mref, s);
    };
    auto grad_v = [&](std::span<const Expr> q) {
        return models::mlp_with_grad<Expr>(mref.layers, q).second;
    };
    auto minv_mul = [&](std::span<const Expr> ph) {
        return gram_matvec<Expr>(mref.A, shape.qdim, ph);
    };

    std::vector<std::vector<Expr>> states(static_cast<size_t>(m_points_));
    states[0] = x;
    for (int j = 1; j < m_points_; ++j) {
        const std::span<const Expr> prev(states[j - 1]);
        switch (integrator) {
        case StepperId::EE: states[j] = integrators::step_explicit_euler<Expr>(field, prev, dt); break;
        case StepperId::RK4: states[j] = integrators::step_rk4<Expr>(field, prev, dt); break;
        case StepperId::SV:
            states[j] = integrators::step_stormer_verlet<Expr>(grad_v, minv_mul, prev, dt);
            break;
        case StepperId::LE: states[j] = integrators::step_lie_euler<Expr>(lift, prev, dt); break;
        case StepperId::CF4: states[j] = integrators::step_cf4<Expr>(lift, prev, dt); break;
        case StepperId::Dopri54: break; // rejected by check_compatible
        }
    }

    // Eq. 6 sum over j = 1..M; the j = 1 term is identically zero but kept so
    // the 1/(NM) normalization stays literal.
    std::vector<Expr> delta(static_cast<size_t>(dim_), x[0]);
    for (int c = 0; c < dim_; ++c) delta[c] = x[c] - x[c];
    Expr main_sum = tape_.dot(delta, delta);
    for (int j = 1; j < m_points_; ++j) {
        for (int c = 0; c < dim_; ++c) delta[c] = states[j][c] - targets[j][c];
        main_sum = main_sum + tape_.dot(delta, delta);
    }
    main_sum_ = main_sum;

    root_ = norm_main * main_sum;
    if (mu > 0.0 && !reg_indices.empty()) {
        const Expr g0 = systems::first_integral_t<Expr>(first_integral, std::span<const Expr>(x));
        Expr reg_sum{};
        bool have = false;
        for (int j1 : reg_indices) {
            if (j1 < 1 || j1 > m_points_)
                throw ConfigError("regularization index " + std::to_string(j1) +
                                  " outside 1..M");
            const Expr gj = systems::first_integral_t<Expr>(
                first_integral, std::span<const Expr>(states[j1 - 1]));
            const Expr d = gj - g0;
            const Expr sq = d * d;
            reg_sum = have ? reg_sum + sq : sq;
            have = true;
        }
        root_ = root_ + norm_reg * reg_sum;
    }
}

void TrajLossGraph::set_theta(std::span<const double> theta) { tape_.set_params(theta); }

void TrajLossGraph::set_norms(double norm_main, double norm_reg) {
    tape_.set_input(norm_main_slot_, norm_main);
    tape_.set_input(norm_reg_slot_, norm_reg);
}

TrajLossGraph::RunResult TrajLossGraph::run(std::span<const double> traj_states,
                                            std::span<double> grad_out) {
    for (int idx = 0; idx < m_points_ * dim_; ++idx) tape_.set_input(idx, traj_states[idx]);
    tape_.forward();

    double viol = 0.0;
    if (k_ > 0) {
        double buf[12]; // up to k = 2
        const int groups = static_cast<int>(stage_state_ids_.size()) / dim_;
        for (int g = 0; g < groups; ++g) {
            for (int c = 0; c < dim_; ++c)
                buf[c] = tape_.value({&tape_, stage_state_ids_[g * dim_ + c]});
            viol = std::max(viol,
                            geom::constraint_violation(std::span<const double>(buf, dim_), k_));
        }
    }
    RunResult r{tape_.value(root_), tape_.value(main_sum_), viol};
    if (!grad_out.empty()) {
        tape_.reverse(root_);
        tape_.accumulate_param_gradient(grad_out);
    }
    return r;
}

std::pair<double, std::vector<double>> rollout_loss_with_gradient(
    const TrajectoryDataset& ds, std::span<const int> traj_indices, const ModelParams& params,
    const TrainConfig& cfg) {
    std::vector<int> reg = cfg.reg_indices;
    if (cfg.mu > 0.0 && reg.empty())
        for (int j = 2; j <= ds.M; ++j) reg.push_back(j);
    TrajLossGraph graph(params, cfg.integrator, ds.M, ds.dt, ds.k, cfg.mu, reg,
                        cfg.first_integral);
    std::vector<double> theta(static_cast<size_t>(params.param_count()));
    params.pack(theta);
    graph.set_theta(theta);
    const double b = static_cast<double>(traj_indices.size());
    graph.set_norms(1.0 / (ds.state_dim() * b * ds.M), cfg.mu / b);
    std::vector<double> g(theta.size(), 0.0);
    double loss = 0.0;
    for (int i : traj_indices) loss += graph.run(ds.trajectory(i), g).objective;
    return {loss, std::move(g)};
}

double rollout_loss_value(const TrajectoryDataset& ds, std::span<const int> traj_indices,
                          const ModelParams& params, const TrainConfig& cfg) {
    std::vector<int> reg = cfg.reg_indices;
    if (cfg.mu > 0.0 && reg.empty())
        for (int j = 2; j <= ds.M; ++j) reg.push_back(j);
    TrajLossGraph graph(params, cfg.integrator, ds.M, ds.dt, ds.k, cfg.mu, reg,
                        cfg.first_integral);
    std::vector<double> theta(static_cast<size_t>(params.param_count()));
    params.pack(theta);
    graph.set_theta(theta);
    const double b = static_cast<double>(traj_indices.size());
    graph.set_norms(1.0 / (ds.state_dim() * b * ds.M), cfg.mu / b);
    double loss = 0.0;
    for (int i : traj_indices) loss += graph.run(ds.trajectory(i), {}).objective;
    return loss;
}

void adam_step(std::span<double> theta, std::span<const double> grad, AdamState& state, double lr,
               double beta1, double beta2, double eps_adam) {
    const size_t n = theta.size();
    if (state.m.size() != n) {
        state.m.assign(n, 0.0);
        state.v.assign(n, 0.0);
        state.t = 0;
    }
    state.t += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (size_t i = 0; i < n; ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grad[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        theta[i] -= lr * mhat / (std::sqrt(vhat) + eps_adam);
    }
}

TrainResult train(const TrajectoryDataset& ds, const TrainConfig& cfg, const ModelParams& init) {
    if (cfg.batch_size < 1 || cfg.batch_size > ds.N)
        throw ConfigError("batch size must lie in [1, N]");
    if (cfg.epochs < 0) throw ConfigError("epochs must be >= 0");
    if (cfg.mu < 0) throw ConfigError("regularization weight mu must be >= 0");
    if (2 * init.qdim != ds.state_dim())
        throw ConfigError("model dimension does not match the dataset");
    if ((init.variant == models::Variant::Chain) != (ds.k > 0))
        throw ConfigError("model variant does not match the dataset manifold tag");
    check_compatible(cfg.integrator, init, ds.k);

    std::vector<int> reg = cfg.reg_indices;
    if (cfg.mu > 0.0 && reg.empty())
        for (int j = 2; j <= ds.M; ++j) reg.push_back(j);

    const int n_params = init.param_count();
    std::vector<double> theta(static_cast<size_t>(n_params));
    init.pack(theta);

    const int jobs = std::max(1, cfg.jobs);
    std::vector<std::unique_ptr<TrajLossGraph>> graphs;
    graphs.reserve(static_cast<size_t>(jobs));
    for (int w = 0; w < jobs; ++w)
        graphs.push_back(std::make_unique<TrajLossGraph>(init, cfg.integrator, ds.M, ds.dt, ds.k,
                                                         cfg.mu, reg, cfg.first_integral));

    TrainResult result;
    result.params = init;
    if (cfg.epochs == 0) {
        std::vector<int> all(static_cast<size_t>(ds.N));
        for (int i = 0; i < ds.N; ++i) all[i] = i;
        result.final_loss = rollout_loss_value(ds, all, init, cfg);
        return result;
    }

    AdamState adam;
    Rng shuffle_rng(cfg.shuffle_seed);
    std::vector<int> order(static_cast<size_t>(ds.N));
    for (int i = 0; i < ds.N; ++i) order[i] = i;

    const int batch = cfg.batch_size;
    std::vector<double> grad(static_cast<size_t>(n_params));
    std::vector<double> grad_slots; // per-position buffers for jobs > 1
    std::vector<TrajLossGraph::RunResult> results(static_cast<size_t>(batch));
    if (jobs > 1) grad_slots.assign(static_cast<size_t>(batch) * n_params, 0.0);

    double viol_worst = 0.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (int i = ds.N - 1; i > 0; --i) {
            const int j = static_cast<int>(shuffle_rng.uniform_index(static_cast<std::uint64_t>(i + 1)));
            std::swap(order[i], order[j]);
        }
        double epoch_sq_sum = 0.0;
        for (int b0 = 0; b0 < ds.N; b0 += batch) {
            const int bsz = std::min(batch, ds.N - b0);
            const double norm_main = 1.0 / (static_cast<double>(ds.state_dim()) * bsz * ds.M);
            const double norm_reg = cfg.mu / bsz;
            for (auto& g : graphs) {
                g->set_theta(theta);
                g->set_norms(norm_main, norm_reg);
            }
            std::fill(grad.begin(), grad.end(), 0.0);
            if (jobs == 1) {
                for (int bi = 0; bi < bsz; ++bi)
                    results[bi] = graphs[0]->run(ds.trajectory(order[b0 + bi]), grad);
            } else {
                std::fill(grad_slots.begin(),
                          grad_slots.begin() + static_cast<size_t>(bsz) * n_params, 0.0);
                parallel_for(bsz, jobs, [&](int w, int bi) {
                    results[bi] = graphs[w]->run(
                        ds.trajectory(order[b0 + bi]),
                        std::span<double>(grad_slots.data() + static_cast<size_t>(bi) * n_params,
                                          static_cast<size_t>(n_params)));
                });
                for (int bi = 0; bi < bsz; ++bi) { // fixed reduction order
                    const double* src = grad_slots.data() + static_cast<size_t>(bi) * n_params;
                    for (int p = 0; p < n_params; ++p) grad[p] += src[p];
                }
            }
            double batch_obj = 0.0;
            for (int bi = 0; bi < bsz; ++bi) {
                batch_obj += results[bi].objective;
                epoch_sq_sum += results[bi].main_sq_sum;
                viol_worst = std::max(viol_worst, results[bi].stage_violation);
            }
            if (!std::isfinite(batch_obj))
                throw TrainingError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                                    ", batch " + std::to_string(b0 / batch + 1));
            adam_step(theta, grad, adam, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps_adam);
        }
        result.epoch_loss.push_back(epoch_sq_sum /
                                    (static_cast<double>(ds.state_dim()) * ds.N * ds.M));
    }

    result.params.unpack(theta);
    result.final_loss = result.epoch_loss.back();
    result.max_stage_violation = viol_worst;
    return result;
}

} // namespace hamlearn::training
