#include "hamlearn/tape.hpp"

#include <cmath>
#include <string>

#include "hamlearn/rotations.hpp"

namespace hamlearn::diff {

void Tape::clear() {
    op_.clear();
    a_.clear();
    b_.clear();
    val_.clear();
    adj_.clear();
    pool_.clear();
    solves_.clear();
    params_.clear();
    inputs_.clear();
    param_node_.clear();
}

int Tape::push(Op op, int a, int b, double v) {
    op_.push_back(op);
    a_.push_back(a);
    b_.push_back(b);
    val_.push_back(v);
    adj_.push_back(0.0);
    return static_cast<int>(op_.size()) - 1;
}

void Tape::ensure_slot(std::vector<double>& v, int slot) {
    if (slot >= static_cast<int>(v.size())) v.resize(static_cast<size_t>(slot) + 1, 0.0);
}

Expr Tape::constant(double v) { return {this, push(Op::Const, -1, -1, v)}; }

Expr Tape::input(int slot, double v) {
    ensure_slot(inputs_, slot);
    inputs_[static_cast<size_t>(slot)] = v;
    return {this, push(Op::Input, slot, -1, v)};
}

Expr Tape::param(int slot, double v) {
    ensure_slot(params_, slot);
    if (slot >= static_cast<int>(param_node_.size()))
        param_node_.resize(static_cast<size_t>(slot) + 1, -1);
    assert(param_node_[static_cast<size_t>(slot)] == -1 && "one node per parameter slot");
    params_[static_cast<size_t>(slot)] = v;
    int id = push(Op::Param, slot, -1, v);
    param_node_[static_cast<size_t>(slot)] = id;
    return {this, id};
}

Expr Tape::add(Expr x, Expr y) { return {this, push(Op::Add, x.id, y.id, val_[x.id] + val_[y.id])}; }
Expr Tape::sub(Expr x, Expr y) { return {this, push(Op::Sub, x.id, y.id, val_[x.id] - val_[y.id])}; }
Expr Tape::mul(Expr x, Expr y) { return {this, push(Op::Mul, x.id, y.id, val_[x.id] * val_[y.id])}; }
Expr Tape::neg(Expr x) { return {this, push(Op::Neg, x.id, -1, -val_[x.id])}; }
Expr Tape::tanh(Expr x) { return {this, push(Op::Tanh, x.id, -1, std::tanh(val_[x.id]))}; }
Expr Tape::max0(Expr x) {
    return {this, push(Op::Max0, x.id, -1, val_[x.id] > 0.0 ? val_[x.id] : 0.0)};
}
Expr Tape::rotc1(Expr u) { return {this, push(Op::RotC1, u.id, -1, hamlearn::rotc1(val_[u.id]))}; }
Expr Tape::rotc2(Expr u) { return {this, push(Op::RotC2, u.id, -1, hamlearn::rotc2(val_[u.id]))}; }
Expr Tape::rotc3(Expr u) { return {this, push(Op::RotC3, u.id, -1, hamlearn::rotc3(val_[u.id]))}; }

Expr Tape::dot(std::span<const Expr> a, std::span<const Expr> b) {
    assert(a.size() == b.size() && !a.empty());
    int off = static_cast<int>(pool_.size());
    int n = static_cast<int>(a.size());
    pool_.reserve(pool_.size() + 2 * static_cast<size_t>(n));
    double acc = 0.0;
    for (int i = 0; i < n; ++i) pool_.push_back(a[i].id);
    for (int i = 0; i < n; ++i) pool_.push_back(b[i].id);
    const int* pa = pool_.data() + off;
    const int* pb = pa + n;
    for (int i = 0; i < n; ++i) acc += val_[pa[i]] * val_[pb[i]];
    return {this, push(Op::Dot, off, n, acc)};
}

void Tape::factor_solve(SolveInst& s) {
    const int d = s.dim;
    const int* ids = pool_.data() + s.args_off;
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) s.m(r, c) = val_[ids[r * d + c]];
    s.lu.compute(s.m);
    const auto& u = s.lu.matrixLU();
    double scale = s.m.cwiseAbs().maxCoeff();
    for (int i = 0; i < d; ++i) {
        if (std::abs(u(i, i)) <= 1e-13 * std::max(1.0, scale))
            throw SolveError("linear solve: negligible pivot at index " + std::to_string(i), i);
    }
    Eigen::VectorXd rhs(d);
    for (int i = 0; i < d; ++i) rhs[i] = val_[ids[d * d + i]];
    s.y = s.lu.solve(rhs);
}

std::vector<Expr> Tape::solve_square(std::span<const Expr> m_rowmajor, std::span<const Expr> rhs) {
    const int d = static_cast<int>(rhs.size());
    assert(static_cast<int>(m_rowmajor.size()) == d * d);
    int off = static_cast<int>(pool_.size());
    for (const Expr& e : m_rowmajor) pool_.push_back(e.id);
    for (const Expr& e : rhs) pool_.push_back(e.id);

    solves_.push_back(SolveInst{});
    SolveInst& s = solves_.back();
    s.dim = d;
    s.args_off = off;
    s.m.resize(d, d);
    factor_solve(s);

    std::vector<Expr> out;
    out.reserve(static_cast<size_t>(d));
    int inst = static_cast<int>(solves_.size()) - 1;
    for (int i = 0; i < d; ++i) {
        int id = push(Op::SolveOut, inst, i, s.y[i]);
        if (i == 0) s.first_out = id;
        out.push_back({this, id});
    }
    return out;
}

void Tape::set_params(std::span<const double> theta) {
    assert(theta.size() == params_.size());
    std::copy(theta.begin(), theta.end(), params_.begin());
}

void Tape::forward() {
    const int n = size();
    for (int i = 0; i < n; ++i) {
        switch (op_[i]) {
        case Op::Const: break;
        case Op::Input: val_[i] = inputs_[a_[i]]; break;
        case Op::Param: val_[i] = params_[a_[i]]; break;
        case Op::Add: val_[i] = val_[a_[i]] + val_[b_[i]]; break;
        case Op::Sub: val_[i] = val_[a_[i]] - val_[b_[i]]; break;
        case Op::Mul: val_[i] = val_[a_[i]] * val_[b_[i]]; break;
        case Op::Neg: val_[i] = -val_[a_[i]]; break;
        case Op::Tanh: val_[i] = std::tanh(val_[a_[i]]); break;
        case Op::Max0: val_[i] = val_[a_[i]] > 0.0 ? val_[a_[i]] : 0.0; break;
        case Op::RotC1: val_[i] = hamlearn::rotc1(val_[a_[i]]); break;
        case Op::RotC2: val_[i] = hamlearn::rotc2(val_[a_[i]]); break;
        case Op::RotC3: val_[i] = hamlearn::rotc3(val_[a_[i]]); break;
        case Op::Dot: {
            const int* pa = pool_.data() + a_[i];
            const int* pb = pa + b_[i];
            double acc = 0.0;
            for (int j = 0; j < b_[i]; ++j) acc += val_[pa[j]] * val_[pb[j]];
            val_[i] = acc;
            break;
        }
        case Op::SolveOut: {
            SolveInst& s = solves_[a_[i]];
            if (b_[i] == 0) factor_solve(s);
            val_[i] = s.y[b_[i]];
            break;
        }
        }
    }
}

void Tape::reverse_solve(SolveInst& s) {
    const int d = s.dim;
    Eigen::VectorXd ybar(d);
    for (int i = 0; i < d; ++i) ybar[i] = adj_[s.first_out + i];
    Eigen::VectorXd t = s.lu.transpose().solve(ybar); // M^-T ybar
    const int* ids = pool_.data() + s.args_off;
    for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c) adj_[ids[r * d + c]] -= t[r] * s.y[c];
    for (int i = 0; i < d; ++i) adj_[ids[d * d + i]] += t[i];
}

void Tape::reverse(Expr root) {
    assert(root.tape == this);
    std::fill(adj_.begin(), adj_.end(), 0.0);
    for (auto& s : solves_) s.rev_done = false;
    adj_[root.id] = 1.0;
    for (int i = root.id; i >= 0; --i) {
        const double g = adj_[i];
        switch (op_[i]) {
        case Op::Const:
        case Op::Input:
        case Op::Param: break;
        case Op::Add:
            adj_[a_[i]] += g;
            adj_[b_[i]] += g;
            break;
        case Op::Sub:
            adj_[a_[i]] += g;
            adj_[b_[i]] -= g;
            break;
        case Op::Mul:
            adj_[a_[i]] += g * val_[b_[i]];
            adj_[b_[i]] += g * val_[a_[i]];
            break;
        case Op::Neg: adj_[a_[i]] -= g; break;
        case Op::Tanh: adj_[a_[i]] += g * (1.0 - val_[i] * val_[i]); break;
        case Op::Max0: adj_[a_[i]] += val_[a_[i]] > 0.0 ? g : 0.0; break;
        case Op::RotC1: adj_[a_[i]] += g * hamlearn::rotc1_deriv(val_[a_[i]]); break;
        case Op::RotC2: adj_[a_[i]] += g * hamlearn::rotc2_deriv(val_[a_[i]]); break;
        case Op::RotC3: adj_[a_[i]] += g * hamlearn::rotc3_deriv(val_[a_[i]]); break;
        case Op::Dot: {
            if (g != 0.0) {
                const int* pa = pool_.data() + a_[i];
                const int* pb = pa + b_[i];
                for (int j = 0; j < b_[i]; ++j) {
                    adj_[pa[j]] += g * val_[pb[j]];
                    adj_[pb[j]] += g * val_[pa[j]];
                }
            }
            break;
        }
        case Op::SolveOut: {
            SolveInst& s = solves_[a_[i]];
            if (!s.rev_done) { // adjoints of all outputs are final here
                reverse_solve(s);
                s.rev_done = true;
            }
            break;
        }
        }
    }
}

void Tape::accumulate_param_gradient(std::span<double> out) const {
    for (int slot = 0; slot < static_cast<int>(param_node_.size()); ++slot) {
        int id = param_node_[slot];
        if (id >= 0 && slot < static_cast<int>(out.size())) out[slot] += adj_[id];
    }
}

std::vector<double> loss_param_gradient(Tape& tape, Expr root, int n_params) {
    std::vector<double> g(static_cast<size_t>(n_params), 0.0);
    if (!root.valid()) return g;
    tape.reverse(root);
    tape.accumulate_param_gradient(g);
    return g;
}

} // namespace hamlearn::diff
