#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hamlearn/geometry.hpp"
#include "hamlearn/linalg.hpp"
#include "hamlearn/chain_dynamics.hpp"
#include "hamlearn/tape.hpp"

namespace hamlearn::models {

// ---------------------------------------------------------------------------
// Learnable Hamiltonian ansatz:
//   separable:  H(q,p) = 1/2 p^T (A^T A) p + V_theta(q)        (A models M^-1)
//   chain:      H(q,p) = 1/2 p^T M(q)^-1 p + V_theta(q), where the k x k
//               scalar mass is A^T A + diag(max(0,b_i)) and M(q) carries the
//               (T*S^2)^k block structure.
// V_theta is a tanh feedforward network with an affine output layer.
// ---------------------------------------------------------------------------

enum class Variant { Separable, Chain };

struct Layer {
    int rows = 0, cols = 0;
    std::vector<double> W; // row-major rows x cols
    std::vector<double> b; // rows
};

struct ModelParams {
    Variant variant = Variant::Separable;
    int qdim = 0; // n (separable) or 3k (chain)
    int k = 0;    // chain only
    std::string activation = "tanh";
    std::vector<double> A; // n x n or k x k, row-major
    std::vector<double> b; // k entries (chain only)
    std::vector<Layer> layers;

    int param_count() const;
    /// Flat parameter order: A row-major, then b, then per layer W row-major
    /// followed by the layer bias.
    void pack(std::span<double> out) const;
    void unpack(std::span<const double> theta);
    void validate() const;
};

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

/// Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; A = I, b = 0.
/// `hidden` may be empty, which leaves a single affine layer (linear potential).
ModelParams init_separable(int n, const std::vector<int>& hidden, std::uint64_t seed);
ModelParams init_chain(int k, const std::vector<int>& hidden, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Generic evaluation. S is double (numeric path) or diff::Expr (training
// graphs). The input gradient is built from the same primitive set, so one
// reverse pass over a rollout graph yields d(loss)/d(theta).
// ---------------------------------------------------------------------------

template <class S> struct ModelRef {
    Variant variant = Variant::Separable;
    int qdim = 0, k = 0;
    std::vector<S> A, b;
    struct L {
        int rows = 0, cols = 0;
        std::vector<S> W, b;
    };
    std::vector<L> layers;
};

ModelRef<double> make_value_ref(const ModelParams& params);
/// Parameter nodes in the flat pack order; node id == slot index.
ModelRef<diff::Expr> make_param_ref(diff::Tape& tape, const ModelParams& params);

template <class S> struct HamEval {
    S value;
    std::vector<S> dq, dp;
};

/// Feedforward potential and its input gradient. The gradient is the usual
/// layer-Jacobian product, assembled as a second forward computation.
template <class S>
std::pair<S, std::vector<S>> mlp_with_grad(const std::vector<typename ModelRef<S>::L>& layers,
                                           std::span<const S> q) {
    const size_t depth = layers.size();
    std::vector<std::vector<S>> acts;
    acts.reserve(depth);
    acts.emplace_back(q.begin(), q.end());
    for (size_t l = 0; l + 1 < depth; ++l) {
        const auto& L = layers[l];
        std::vector<S> h;
        h.reserve(static_cast<size_t>(L.rows));
        const std::span<const S> prev(acts.back());
        for (int r = 0; r < L.rows; ++r) {
            using std::tanh; // Expr overload found by ADL
            S z = dot_product(std::span<const S>(L.W).subspan(static_cast<size_t>(r) * L.cols,
                                                              static_cast<size_t>(L.cols)),
                              prev) +
                  L.b[static_cast<size_t>(r)];
            h.push_back(tanh(z));
        }
        acts.push_back(std::move(h));
    }
    const auto& out = layers.back();
    S v = dot_product(std::span<const S>(out.W), std::span<const S>(acts.back())) +
          out.b[0];

    // backward-as-forward: u <- W_l^T (u . (1 - h^2))
    std::vector<S> u(out.W.begin(), out.W.end());
    for (size_t l = depth - 1; l-- > 0;) {
        const auto& L = layers[l];
        const std::vector<S>& h = acts[l + 1];
        for (int r = 0; r < L.rows; ++r) u[r] = u[r] * (1.0 - h[r] * h[r]);
        std::vector<S> prev;
        prev.reserve(static_cast<size_t>(L.cols));
        std::vector<S> col(static_cast<size_t>(L.rows), u[0]);
        for (int c = 0; c < L.cols; ++c) {
            for (int r = 0; r < L.rows; ++r) col[r] = L.W[static_cast<size_t>(r) * L.cols + c];
            prev.push_back(dot_product(std::span<const S>(col), std::span<const S>(u)));
        }
        u = std::move(prev);
    }
    return {v, std::move(u)};
}

/// k x k scalar mass entries A^T A + diag(max(0, b_i)), row-major.
template <class S>
std::vector<S> chain_scalar_mass_entries(std::span<const S> A, std::span<const S> b, int k) {
    std::vector<S> m;
    m.reserve(static_cast<size_t>(k) * k);
    std::vector<S> coli(static_cast<size_t>(k), A[0]), colj(static_cast<size_t>(k), A[0]);
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            for (int r = 0; r < k; ++r) {
                coli[r] = A[static_cast<size_t>(r) * k + i];
                colj[r] = A[static_cast<size_t>(r) * k + j];
            }
            S e = dot_product(std::span<const S>(coli), std::span<const S>(colj));
            if (i == j) e = e + max0(b[static_cast<size_t>(i)]);
            m.push_back(e);
        }
    }
    return m;
}

template <class S> HamEval<S> eval_hamiltonian(const ModelRef<S>& m, std::span<const S> x) {
    const int nq = m.qdim;
    if (static_cast<int>(x.size()) != 2 * nq)
        throw std::invalid_argument("eval_hamiltonian: state dimension mismatch");
    const std::span<const S> q = x.subspan(0, static_cast<size_t>(nq));
    const std::span<const S> p = x.subspan(static_cast<size_t>(nq), static_cast<size_t>(nq));
    auto [v, dv] = mlp_with_grad<S>(m.layers, q);

    HamEval<S> out{v, std::move(dv), {}};
    if (m.variant == Variant::Separable) {
        // t = A p, K = |t|^2 / 2, dK/dp = A^T t
        std::vector<S> t;
        t.reserve(static_cast<size_t>(nq));
        for (int r = 0; r < nq; ++r)
            t.push_back(dot_product(std::span<const S>(m.A).subspan(
                                        static_cast<size_t>(r) * nq, static_cast<size_t>(nq)),
                                    p));
        out.value = out.value + 0.5 * dot_product(std::span<const S>(t), std::span<const S>(t));
        std::vector<S> col(static_cast<size_t>(nq), t[0]);
        out.dp.reserve(static_cast<size_t>(nq));
        for (int c = 0; c < nq; ++c) {
            for (int r = 0; r < nq; ++r) col[r] = m.A[static_cast<size_t>(r) * nq + c];
            out.dp.push_back(dot_product(std::span<const S>(col), std::span<const S>(t)));
        }
    } else {
        const std::vector<S> mass = chain_scalar_mass_entries<S>(m.A, m.b, m.k);
        ChainKinetic<S> kin = chain_kinetic_partials<S>(m.k, mass, x);
        out.value = out.value + kin.value;
        for (int i = 0; i < nq; ++i) out.dq[i] = out.dq[i] + kin.dq[i];
        out.dp = std::move(kin.dp);
    }
    return out;
}

/// Canonical field J grad H for the separable variant; projected sphere field
/// for chains.
template <class S> std::vector<S> model_field_t(const ModelRef<S>& m, std::span<const S> x) {
    HamEval<S> ev = eval_hamiltonian<S>(m, x);
    if (m.variant == Variant::Chain)
        return geom::projected_sphere_field<S>(m.k, x, ev.dq, ev.dp);
    std::vector<S> f;
    f.reserve(x.size());
    for (auto& v : ev.dp) f.push_back(v);
    for (auto& v : ev.dq) f.push_back(scalar_like(v, 0.0) - v);
    return f;
}

template <class S>
std::vector<geom::AlgebraElement<S>> model_lift_t(const ModelRef<S>& m, std::span<const S> x) {
    HamEval<S> ev = eval_hamiltonian<S>(m, x);
    return geom::lift_from_partials<S>(m.k, x, ev.dq, ev.dp);
}

// ---------------------------------------------------------------------------
// Numeric facade
// ---------------------------------------------------------------------------

struct GradientPair {
    double value = 0.0;
    std::vector<double> grad; // d H / d(q,p), length 2n
};

/// H_Theta(x) and its input gradient (numeric path).
GradientPair eval_with_input_grad(const ModelParams& params, std::span<const double> x);
inline GradientPair hamiltonian_model_eval(const ModelParams& params,
                                           std::span<const double> x) {
    return eval_with_input_grad(params, x);
}

double potential_forward(const ModelParams& params, std::span<const double> q);
double kinetic_separable(const ModelParams& params, std::span<const double> p);
Eigen::MatrixXd chain_scalar_mass(const ModelParams& params);

/// X_{H_Theta} as a reusable closure (captures a value snapshot).
std::function<std::vector<double>(std::span<const double>)> make_model_field(
    const ModelParams& params);

// ---------------------------------------------------------------------------
// Serialization: key-value text document with nested arrays, 17-significant-
// digit decimals and a trailing integrity checksum line.
// ---------------------------------------------------------------------------

/// `meta` key/value pairs land in a "meta" object (reproducibility header);
/// they are ignored on load.
std::string serialize_model(const ModelParams& params,
                            const std::vector<std::pair<std::string, std::string>>& meta = {});
ModelParams deserialize_model(const std::string& text);
void save_model(const ModelParams& params, const std::string& path,
                const std::vector<std::pair<std::string, std::string>>& meta = {});
ModelParams load_model(const std::string& path);

} // namespace hamlearn::models
