#pragma once

#include <Eigen/Dense>
#include <cassert>
#include <cstdint>
#include <span>
#include <vector>

#include "hamlearn/errors.hpp"

namespace hamlearn::diff {

// Reverse-mode scalar tape. Nodes are created in topological order and hold
// one real value and one adjoint each. The primitive set is closed:
//
//   Const, Input, Param              leaves (Input/Param read from slot arrays)
//   Add, Sub, Mul, Neg               arithmetic
//   Tanh                             network activation
//   Max0                             max(0,x), subgradient at 0 taken as 0
//   RotC1, RotC2, RotC3              Rodrigues coefficients as functions of |xi|^2
//   Dot                              fused inner product of two id lists
//   SolveOut                         one coordinate of a fused square linear solve
//
// The square solve y = M^-1 p is a joint primitive: reverse propagates
// rhs-adjoint = M^-T ybar and M-adjoint = -(M^-T ybar) y^T, which reduces to
// the symmetric-positive-definite rule when M is symmetric.
//
// Graphs are built once per trajectory shape and then re-evaluated by
// streaming new Input/Param slot values through forward(); evaluation order
// is the creation order, so repeated evaluation is bit-identical.

enum class Op : std::uint8_t {
    Const,
    Input,
    Param,
    Add,
    Sub,
    Mul,
    Neg,
    Tanh,
    Max0,
    RotC1,
    RotC2,
    RotC3,
    Dot,
    SolveOut,
};

class Tape;

struct Expr {
    Tape* tape = nullptr;
    int id = -1;
    bool valid() const { return tape != nullptr && id >= 0; }
};

class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;            // graphs are confined to one owner
    Tape& operator=(const Tape&) = delete;

    void clear();

    // ---- graph construction (values are evaluated eagerly) ----
    Expr constant(double v);
    Expr input(int slot, double v);
    Expr param(int slot, double v);
    Expr add(Expr x, Expr y);
    Expr sub(Expr x, Expr y);
    Expr mul(Expr x, Expr y);
    Expr neg(Expr x);
    Expr tanh(Expr x);
    Expr max0(Expr x);
    Expr rotc1(Expr u);
    Expr rotc2(Expr u);
    Expr rotc3(Expr u);
    Expr dot(std::span<const Expr> a, std::span<const Expr> b);
    /// Solve M y = rhs for square row-major M (dim x dim). Throws SolveError
    /// carrying the pivot index when the factorization breaks down.
    std::vector<Expr> solve_square(std::span<const Expr> m_rowmajor,
                                   std::span<const Expr> rhs);

    // ---- streaming evaluation ----
    void set_input(int slot, double v) { inputs_[static_cast<size_t>(slot)] = v; }
    void set_param(int slot, double v) { params_[static_cast<size_t>(slot)] = v; }
    void set_params(std::span<const double> theta);
    /// Recompute every node value in creation order.
    void forward();
    /// Reverse pass from a scalar root; fills adjoints of every node.
    void reverse(Expr root);

    double value(Expr x) const { return val_[static_cast<size_t>(x.id)]; }
    double adjoint(Expr x) const { return adj_[static_cast<size_t>(x.id)]; }

    int size() const { return static_cast<int>(op_.size()); }
    int num_param_slots() const { return static_cast<int>(params_.size()); }

    /// Adds d(root)/d(param slot) into `out` (accumulating); call reverse() first.
    void accumulate_param_gradient(std::span<double> out) const;

private:
    int push(Op op, int a, int b, double v);
    void ensure_slot(std::vector<double>& v, int slot);

    std::vector<Op> op_;
    std::vector<int> a_, b_;
    std::vector<double> val_, adj_;
    std::vector<int> pool_;

    struct SolveInst {
        int dim = 0;
        int args_off = 0;  // pool: dim*dim matrix ids then dim rhs ids
        int first_out = 0; // node id of output coordinate 0
        Eigen::MatrixXd m;
        Eigen::PartialPivLU<Eigen::MatrixXd> lu;
        Eigen::VectorXd y;
        bool rev_done = false;
    };
    std::vector<SolveInst> solves_;

    std::vector<double> params_, inputs_;
    std::vector<int> param_node_; // node id per slot, -1 if unused

    void factor_solve(SolveInst& s);
    void reverse_solve(SolveInst& s);
};

/// d(loss_root)/dTheta as one flat vector in the documented parameter order
/// (the tape's param slot order). An empty graph yields the zero vector.
std::vector<double> loss_param_gradient(Tape& tape, Expr root, int n_params);

// ---- expression operators ----

inline Expr operator+(Expr x, Expr y) { return x.tape->add(x, y); }
inline Expr operator-(Expr x, Expr y) { return x.tape->sub(x, y); }
inline Expr operator*(Expr x, Expr y) { return x.tape->mul(x, y); }
inline Expr operator-(Expr x) { return x.tape->neg(x); }

inline Expr operator+(Expr x, double c) { return x.tape->add(x, x.tape->constant(c)); }
inline Expr operator+(double c, Expr x) { return x.tape->add(x.tape->constant(c), x); }
inline Expr operator-(Expr x, double c) { return x.tape->sub(x, x.tape->constant(c)); }
inline Expr operator-(double c, Expr x) { return x.tape->sub(x.tape->constant(c), x); }
inline Expr operator*(Expr x, double c) { return x.tape->mul(x, x.tape->constant(c)); }
inline Expr operator*(double c, Expr x) { return x.tape->mul(x.tape->constant(c), x); }

inline Expr tanh(Expr x) { return x.tape->tanh(x); }
inline Expr max0(Expr x) { return x.tape->max0(x); }
inline Expr rotc1(Expr u) { return u.tape->rotc1(u); }
inline Expr rotc2(Expr u) { return u.tape->rotc2(u); }
inline Expr rotc3(Expr u) { return u.tape->rotc3(u); }

inline Expr dot_product(std::span<const Expr> a, std::span<const Expr> b) {
    assert(!a.empty());
    return a[0].tape->dot(a, b);
}

inline std::vector<Expr> solve_square(std::span<const Expr> m_rowmajor,
                                      std::span<const Expr> rhs) {
    assert(!rhs.empty());
    return rhs[0].tape->solve_square(m_rowmajor, rhs);
}

inline Expr scalar_like(Expr ref, double v) { return ref.tape->constant(v); }

} // namespace hamlearn::diff
