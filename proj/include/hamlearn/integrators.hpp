#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hamlearn/geometry.hpp"

namespace hamlearn::integrators {

enum class StepperId { EE, RK4, SV, LE, CF4, Dopri54 };

struct StepperInfo {
    StepperId id;
    int order;
    bool lie_group; // requires manifold-tagged states
};

StepperId parse_stepper(const std::string& id);
std::string to_string(StepperId id);
StepperInfo stepper_info(StepperId id);
/// Number of field/lift evaluations per step (the s-1 stage loop of the
/// recurrent epoch).
int stages(StepperId id);

/// Uniformly sampled trajectory; times[j] = j * dt.
struct Trajectory {
    std::vector<double> times;
    std::vector<std::vector<double>> states;
};

// ---------------------------------------------------------------------------
// One-step maps, generic over the scalar type (double or diff::Expr) so the
// same code integrates reference systems and builds training graphs.
// ---------------------------------------------------------------------------

template <class S>
std::vector<S> axpy_state(std::span<const S> x, double c, std::span<const S> d) {
    std::vector<S> out;
    out.reserve(x.size());
    for (size_t i = 0; i < x.size(); ++i) out.push_back(x[i] + c * d[i]);
    return out;
}

template <class S, class Field>
std::vector<S> step_explicit_euler(Field&& f, std::span<const S> x, double h) {
    const std::vector<S> k = f(x);
    return axpy_state(x, h, std::span<const S>(k));
}

template <class S, class Field>
std::vector<S> step_rk4(Field&& f, std::span<const S> x, double h) {
    const std::vector<S> k1 = f(x);
    std::vector<S> t = axpy_state(x, h / 2, std::span<const S>(k1));
    const std::vector<S> k2 = f(std::span<const S>(t));
    t = axpy_state(x, h / 2, std::span<const S>(k2));
    const std::vector<S> k3 = f(std::span<const S>(t));
    t = axpy_state(x, h, std::span<const S>(k3));
    const std::vector<S> k4 = f(std::span<const S>(t));
    std::vector<S> out;
    out.reserve(x.size());
    for (size_t i = 0; i < x.size(); ++i)
        out.push_back(x[i] + (h / 6) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    return out;
}

/// Leapfrog for separable H = 1/2 p^T Minv p + V(q):
///   p_half = p - h/2 grad V(q); q' = q + h Minv p_half; p' = p_half - h/2 grad V(q').
/// `grad_v(q)` returns grad V, `minv_mul(p)` returns Minv p.
template <class S, class GradV, class MinvMul>
std::vector<S> step_stormer_verlet(GradV&& grad_v, MinvMul&& minv_mul, std::span<const S> x,
                                   double h) {
    const size_t n = x.size() / 2;
    const std::span<const S> q = x.subspan(0, n);
    const std::span<const S> p = x.subspan(n, n);
    const std::vector<S> gq = grad_v(q);
    std::vector<S> phalf;
    phalf.reserve(n);
    for (size_t i = 0; i < n; ++i) phalf.push_back(p[i] - (h / 2) * gq[i]);
    const std::vector<S> v = minv_mul(std::span<const S>(phalf));
    std::vector<S> out(x.begin(), x.end());
    for (size_t i = 0; i < n; ++i) out[i] = q[i] + h * v[i];
    const std::vector<S> gq2 = grad_v(std::span<const S>(out).subspan(0, n));
    for (size_t i = 0; i < n; ++i) out[n + i] = phalf[i] - (h / 2) * gq2[i];
    return out;
}

template <class S>
std::vector<geom::AlgebraElement<S>> scale_algebra(double c,
                                                   std::span<const geom::AlgebraElement<S>> a) {
    std::vector<geom::AlgebraElement<S>> out(a.size());
    for (size_t i = 0; i < a.size(); ++i)
        for (int j = 0; j < 3; ++j) {
            out[i].xi[j] = c * a[i].xi[j];
            out[i].eta[j] = c * a[i].eta[j];
        }
    return out;
}

template <class S, class... Rest>
std::vector<geom::AlgebraElement<S>> combine_algebra(double c,
                                                     std::span<const geom::AlgebraElement<S>> a,
                                                     Rest&&... rest) {
    std::vector<geom::AlgebraElement<S>> out = scale_algebra(c, a);
    if constexpr (sizeof...(rest) > 0) {
        const std::vector<geom::AlgebraElement<S>> tail = combine_algebra<S>(rest...);
        for (size_t i = 0; i < out.size(); ++i)
            for (int j = 0; j < 3; ++j) {
                out[i].xi[j] = out[i].xi[j] + tail[i].xi[j];
                out[i].eta[j] = out[i].eta[j] + tail[i].eta[j];
            }
    }
    return out;
}

/// Lie Euler: y' = psi(exp(h f(y)), y).
template <class S, class Lift>
std::vector<S> step_lie_euler(Lift&& lift, std::span<const S> x, double h) {
    const std::vector<geom::AlgebraElement<S>> k = lift(x);
    const std::vector<geom::AlgebraElement<S>> hk =
        scale_algebra<S>(h, std::span<const geom::AlgebraElement<S>>(k));
    return geom::apply_exp_action<S>(std::span<const geom::AlgebraElement<S>>(hk), x);
}

/// Commutator-free order 4 (two-exponential scheme):
///   K1 = f(y); Y2 = psi(exp(h/2 K1), y);    K2 = f(Y2);
///   Y3 = psi(exp(h/2 K2), y);               K3 = f(Y3);
///   Y4 = psi(exp(h K3 - h/2 K1), Y2);       K4 = f(Y4);
///   y' = psi(exp(h/12 (-K1+2K2+2K3+3K4)), psi(exp(h/12 (3K1+2K2+2K3-K4)), y)).
template <class S, class Lift>
std::vector<S> step_cf4(Lift&& lift, std::span<const S> x, double h) {
    using A = geom::AlgebraElement<S>;
    auto span_of = [](const std::vector<A>& v) { return std::span<const A>(v); };
    const std::vector<A> k1 = lift(x);
    std::vector<A> e = scale_algebra<S>(h / 2, span_of(k1));
    const std::vector<S> y2 = geom::apply_exp_action<S>(span_of(e), x);
    const std::vector<A> k2 = lift(std::span<const S>(y2));
    e = scale_algebra<S>(h / 2, span_of(k2));
    const std::vector<S> y3 = geom::apply_exp_action<S>(span_of(e), x);
    const std::vector<A> k3 = lift(std::span<const S>(y3));
    e = combine_algebra<S>(h, span_of(k3), -h / 2, span_of(k1));
    const std::vector<S> y4 = geom::apply_exp_action<S>(span_of(e), std::span<const S>(y2));
    const std::vector<A> k4 = lift(std::span<const S>(y4));

    e = combine_algebra<S>(3 * h / 12, span_of(k1), 2 * h / 12, span_of(k2), 2 * h / 12,
                           span_of(k3), -h / 12, span_of(k4));
    const std::vector<S> half = geom::apply_exp_action<S>(span_of(e), x);
    e = combine_algebra<S>(-h / 12, span_of(k1), 2 * h / 12, span_of(k2), 2 * h / 12, span_of(k3),
                           3 * h / 12, span_of(k4));
    return geom::apply_exp_action<S>(span_of(e), std::span<const S>(half));
}

// ---------------------------------------------------------------------------
// Numeric driving
// ---------------------------------------------------------------------------

using Field = std::function<std::vector<double>(std::span<const double>)>;
using Step = std::function<std::vector<double>(std::span<const double>, double)>;

/// M states including x0; times j*h. Stepper errors surface with the step index.
Trajectory rollout(const Step& step, std::span<const double> x0, double h, int steps_m);

/// Adaptive Dormand-Prince 5(4) with 4th-order dense output, sampled at the
/// requested times (times[0] must be 0; x(0) = x0).
Trajectory integrate_reference(const Field& field, std::span<const double> x0,
                               std::span<const double> times, double rtol = 1e-10,
                               double atol = 1e-12);

} // namespace hamlearn::integrators
