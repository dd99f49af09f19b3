#include "hamlearn/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hamlearn::geom {

Eigen::Vector3d project_tangent(const Eigen::Vector3d& q, const Eigen::Vector3d& v) {
    if (std::abs(q.norm() - 1.0) > kUnitTol)
        throw std::invalid_argument("project_tangent: q is not a unit vector");
    return v - q * q.dot(v);
}

Eigen::MatrixXd projection_matrix_general(const Eigen::MatrixXd& G) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(G);
    const auto& s = svd.singularValues();
    const double smax = s(0);
    const double smin = s(s.size() - 1);
    const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (!(cond < 1e12))
        throw std::invalid_argument(
            "projection_matrix_general: constraint Jacobian is rank deficient "
            "(condition estimate " +
            std::to_string(cond) + ")");
    const Eigen::MatrixXd gtg = G.transpose() * G;
    return Eigen::MatrixXd::Identity(G.rows(), G.rows()) - G * gtg.ldlt().solve(G.transpose());
}

Eigen::Matrix3d w_matrix_sphere(const Eigen::Vector3d& q, const Eigen::Vector3d& p) {
    return p * q.transpose() - q * p.transpose();
}

Eigen::MatrixXd w_matrix_from_projector(
    const std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>& constraint_jacobian,
    const Eigen::VectorXd& q, const Eigen::VectorXd& p, double fd_step) {
    const auto n = q.size();
    auto ptp = [&](const Eigen::VectorXd& qq) -> Eigen::VectorXd {
        return projection_matrix_general(constraint_jacobian(qq)).transpose() * p;
    };
    Eigen::MatrixXd lambda(n, n); // Lambda = d(P(q)^T p)/dq by central differences
    Eigen::VectorXd qp = q;
    for (Eigen::Index j = 0; j < n; ++j) {
        qp(j) = q(j) + fd_step;
        const Eigen::VectorXd fp = ptp(qp);
        qp(j) = q(j) - fd_step;
        const Eigen::VectorXd fm = ptp(qp);
        qp(j) = q(j);
        lambda.col(j) = (fp - fm) / (2.0 * fd_step);
    }
    const Eigen::MatrixXd P = projection_matrix_general(constraint_jacobian(q));
    return P.transpose() * lambda.transpose() * P + lambda * P - P.transpose() * lambda.transpose();
}

SE3GroupElement se3_exp(const SE3AlgebraElement& a) {
    const double u = a.xi.squaredNorm();
    const double c1 = rotc1(u), c2 = rotc2(u), c3 = rotc3(u);
    Eigen::Matrix3d hat;
    hat << 0, -a.xi.z(), a.xi.y(), a.xi.z(), 0, -a.xi.x(), -a.xi.y(), a.xi.x(), 0;
    const Eigen::Matrix3d hat2 = hat * hat;
    SE3GroupElement g;
    g.R = Eigen::Matrix3d::Identity() + c1 * hat + c2 * hat2;
    g.r = (Eigen::Matrix3d::Identity() + c2 * hat + c3 * hat2) * a.eta;
    return g;
}

SE3GroupElement se3_compose(const SE3GroupElement& g1, const SE3GroupElement& g2) {
    SE3GroupElement g;
    g.R = g1.R * g2.R;
    g.r = g1.r + g1.R * g2.r;
    return g;
}

SE3GroupElement se3_identity() { return SE3GroupElement{}; }

SpherePhasePoint group_action(const SE3GroupElement& g, const SpherePhasePoint& y) {
    SpherePhasePoint out;
    out.q = g.R * y.q;
    out.p = g.R * y.p + g.r.cross(out.q);
    return out;
}

std::pair<Eigen::Vector3d, Eigen::Vector3d> infinitesimal_generator(const SE3AlgebraElement& a,
                                                                    const SpherePhasePoint& y) {
    return {a.xi.cross(y.q), a.xi.cross(y.p) + a.eta.cross(y.q)};
}

SE3AlgebraElement lift_f_of_h(const Eigen::Vector3d& dHq, const Eigen::Vector3d& dHp,
                              const SpherePhasePoint& y) {
    SE3AlgebraElement a;
    a.xi = y.q.cross(dHp);
    a.eta = dHq.cross(y.q) + dHp.cross(y.p);
    return a;
}

void validate_sphere_point(const SpherePhasePoint& y, double tol) {
    if (std::abs(y.q.norm() - 1.0) > tol)
        throw std::invalid_argument("phase point off the unit sphere: | |q|-1 | = " +
                                    std::to_string(std::abs(y.q.norm() - 1.0)));
    if (std::abs(y.q.dot(y.p)) > tol)
        throw std::invalid_argument("momentum not tangent: |q.p| = " +
                                    std::to_string(std::abs(y.q.dot(y.p))));
}

double constraint_violation(std::span<const double> x, int k) {
    double worst = 0.0;
    for (int i = 0; i < k; ++i) {
        const Eigen::Map<const Eigen::Vector3d> q(x.data() + 3 * i);
        const Eigen::Map<const Eigen::Vector3d> p(x.data() + 3 * (k + i));
        worst = std::max(worst, std::abs(q.norm() - 1.0));
        worst = std::max(worst, std::abs(q.dot(p)));
    }
    return worst;
}

} // namespace hamlearn::geom
