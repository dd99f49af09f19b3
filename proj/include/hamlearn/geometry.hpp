#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <span>
#include <vector>

#include "hamlearn/rotations.hpp"

namespace hamlearn::geom {

// ---------------------------------------------------------------------------
// Numeric types. Covectors are stored as plain column 3-vectors; the
// row-vector reading of momenta is a convention, not a separate type.
// ---------------------------------------------------------------------------

struct SE3AlgebraElement {
    Eigen::Vector3d xi{0, 0, 0};  // rotational part
    Eigen::Vector3d eta{0, 0, 0}; // translational part
};

struct SE3GroupElement {
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d r{0, 0, 0};
};

struct SpherePhasePoint {
    Eigen::Vector3d q; // |q| = 1
    Eigen::Vector3d p; // q.p = 0
};

constexpr double kUnitTol = 1e-8;

/// Orthogonal projection (I - q q^T) v onto the tangent plane at unit q.
Eigen::Vector3d project_tangent(const Eigen::Vector3d& q, const Eigen::Vector3d& v);

/// General constraint projector P = I - G (G^T G)^-1 G^T for an n x m
/// constraint Jacobian of full column rank. Cross-validation oracle; the
/// sphere paths use the closed form above.
Eigen::MatrixXd projection_matrix_general(const Eigen::MatrixXd& G);

/// W(q,p) = p q^T - q p^T on the sphere.
Eigen::Matrix3d w_matrix_sphere(const Eigen::Vector3d& q, const Eigen::Vector3d& p);

/// W from the general projector formula, with Lambda = d(P(q)^T p)/dq taken
/// by central differences. Test oracle only.
Eigen::MatrixXd w_matrix_from_projector(
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& constraint_jacobian,
    const Eigen::VectorXd& q, const Eigen::VectorXd& p, double fd_step = 1e-6);

SE3GroupElement se3_exp(const SE3AlgebraElement& a);
SE3GroupElement se3_compose(const SE3GroupElement& g1, const SE3GroupElement& g2);
SE3GroupElement se3_identity();

/// Psi((R,r),(q,p)) = (R q, R p + r x R q); transitive on T*S^2.
SpherePhasePoint group_action(const SE3GroupElement& g, const SpherePhasePoint& y);

/// psi_*((xi,eta))(q,p) = (xi x q, xi x p + eta x q).
std::pair<Eigen::Vector3d, Eigen::Vector3d> infinitesimal_generator(const SE3AlgebraElement& a,
                                                                    const SpherePhasePoint& y);

/// F[H](q,p) = (q x dH/dp, dH/dq x q + dH/dp x p).
SE3AlgebraElement lift_f_of_h(const Eigen::Vector3d& dHq, const Eigen::Vector3d& dHp,
                              const SpherePhasePoint& y);

void validate_sphere_point(const SpherePhasePoint& y, double tol = kUnitTol);

/// max(| |q_i|-1 |, |q_i.p_i|) over the k components of a packed state
/// (q_1..q_k, p_1..p_k).
double constraint_violation(std::span<const double> x, int k);

// ---------------------------------------------------------------------------
// Generic forms shared by the numeric integrators and the derivative tape.
// The scalar S is double or diff::Expr.
// ---------------------------------------------------------------------------

template <class S> using Vec3 = std::array<S, 3>;

template <class S> struct AlgebraElement {
    Vec3<S> xi, eta;
};

template <class S> Vec3<S> cross3(const Vec3<S>& a, const Vec3<S>& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

template <class S> S dot3(const Vec3<S>& a, const Vec3<S>& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

template <class S> Vec3<S> axpy3(double c, const Vec3<S>& x, const Vec3<S>& y) {
    return {y[0] + c * x[0], y[1] + c * x[1], y[2] + c * x[2]};
}

/// One T*S^2 component of Psi(exp(xi,eta), (q,p)). Rotations are applied as
/// R v = v + c1 (xi x v) + c2 (xi x (xi x v)); the translation factor uses
/// r = eta + c2 (xi x eta) + c3 (xi x (xi x eta)).
template <class S>
void exp_action_component(const Vec3<S>& xi, const Vec3<S>& eta, const Vec3<S>& q,
                          const Vec3<S>& p, Vec3<S>& q_out, Vec3<S>& p_out) {
    using hamlearn::rotc1; // double overloads; Expr overloads found by ADL
    using hamlearn::rotc2;
    using hamlearn::rotc3;
    const S u = dot3(xi, xi);
    const S c1 = rotc1(u);
    const S c2 = rotc2(u);
    const S c3 = rotc3(u);
    auto rotate = [&](const Vec3<S>& v) -> Vec3<S> {
        const Vec3<S> w = cross3(xi, v);
        const Vec3<S> w2 = cross3(xi, w);
        return {v[0] + c1 * w[0] + c2 * w2[0], v[1] + c1 * w[1] + c2 * w2[1],
                v[2] + c1 * w[2] + c2 * w2[2]};
    };
    const Vec3<S> we = cross3(xi, eta);
    const Vec3<S> we2 = cross3(xi, we);
    const Vec3<S> r = {eta[0] + c2 * we[0] + c3 * we2[0], eta[1] + c2 * we[1] + c3 * we2[1],
                       eta[2] + c2 * we[2] + c3 * we2[2]};
    const Vec3<S> Rq = rotate(q);
    const Vec3<S> Rp = rotate(p);
    const Vec3<S> rxq = cross3(r, Rq);
    q_out = Rq;
    p_out = {Rp[0] + rxq[0], Rp[1] + rxq[1], Rp[2] + rxq[2]};
}

template <class S> Vec3<S> load3(std::span<const S> x, int off) {
    return {x[off], x[off + 1], x[off + 2]};
}

template <class S> void store3(std::span<S> x, int off, const Vec3<S>& v) {
    x[off] = v[0];
    x[off + 1] = v[1];
    x[off + 2] = v[2];
}

/// Componentwise action of SE(3)^k on a packed (T*S^2)^k state.
template <class S>
std::vector<S> apply_exp_action(std::span<const AlgebraElement<S>> a, std::span<const S> x) {
    const int k = static_cast<int>(a.size());
    std::vector<S> out(x.begin(), x.end());
    for (int i = 0; i < k; ++i) {
        Vec3<S> q = load3(x, 3 * i), p = load3(x, 3 * (k + i));
        Vec3<S> qn, pn;
        exp_action_component(a[i].xi, a[i].eta, q, p, qn, pn);
        store3(std::span<S>(out), 3 * i, qn);
        store3(std::span<S>(out), 3 * (k + i), pn);
    }
    return out;
}

/// Projected Hamilton equations on (T*S^2)^k from ambient partials:
///   qdot_i = (I - q_i q_i^T) dH/dp_i
///   pdot_i = -(I - q_i q_i^T) dH/dq_i + dH/dp_i x (p_i x q_i)
template <class S>
std::vector<S> projected_sphere_field(int k, std::span<const S> x, std::span<const S> dHq,
                                      std::span<const S> dHp) {
    std::vector<S> out;
    out.reserve(static_cast<size_t>(6 * k));
    for (int i = 0; i < k; ++i) {
        const Vec3<S> q = load3(x, 3 * i);
        const Vec3<S> a = load3(dHp, 3 * i);
        const S qa = dot3(q, a);
        out.push_back(a[0] - q[0] * qa);
        out.push_back(a[1] - q[1] * qa);
        out.push_back(a[2] - q[2] * qa);
    }
    for (int i = 0; i < k; ++i) {
        const Vec3<S> q = load3(x, 3 * i);
        const Vec3<S> p = load3(x, 3 * (k + i));
        const Vec3<S> b = load3(dHq, 3 * i);
        const Vec3<S> a = load3(dHp, 3 * i);
        const S qb = dot3(q, b);
        const Vec3<S> pxq = cross3(p, q);
        const Vec3<S> t = cross3(a, pxq);
        out.push_back(q[0] * qb - b[0] + t[0]);
        out.push_back(q[1] * qb - b[1] + t[1]);
        out.push_back(q[2] * qb - b[2] + t[2]);
    }
    return out;
}

/// F[H] componentwise: xi_i = q_i x dH/dp_i, eta_i = dH/dq_i x q_i + dH/dp_i x p_i.
template <class S>
std::vector<AlgebraElement<S>> lift_from_partials(int k, std::span<const S> x,
                                                  std::span<const S> dHq, std::span<const S> dHp) {
    std::vector<AlgebraElement<S>> out(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
        const Vec3<S> q = load3(x, 3 * i);
        const Vec3<S> p = load3(x, 3 * (k + i));
        const Vec3<S> b = load3(dHq, 3 * i);
        const Vec3<S> a = load3(dHp, 3 * i);
        out[i].xi = cross3(q, a);
        const Vec3<S> bq = cross3(b, q);
        const Vec3<S> ap = cross3(a, p);
        out[i].eta = {bq[0] + ap[0], bq[1] + ap[1], bq[2] + ap[2]};
    }
    return out;
}

} // namespace hamlearn::geom
