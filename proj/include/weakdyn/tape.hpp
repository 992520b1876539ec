#pragma once

// Reverse-mode automatic differentiation on an explicit tape.
//
// Two sweeps are provided:
//  * gradient(): a *symbolic* reverse sweep that appends the adjoint
//    computation to the tape itself. Because the adjoints are ordinary tape
//    nodes, a subsequent sweep through them yields second-order derivatives
//    (gradients of input gradients with respect to parameters).
//  * reverse(): a numeric reverse sweep for plain first-order gradients.
//
// Replay<> re-evaluates a frozen tape over many input lanes at once, which is
// what the training loop uses: the graph is built once per model and then
// interpreted over batches of data points.

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace weakdyn::ad {

enum class Op : std::uint8_t {
    Const, // value c
    Input, // placeholder, value set externally
    Add,   // a + b
    Sub,   // a - b
    Mul,   // a * b
    Neg,   // -a
    Tanh,  // tanh(a)
    AddC,  // a + c
    MulC,  // a * c
};

struct Node {
    Op op;
    std::int32_t a = -1;
    std::int32_t b = -1;
    double c = 0.0;
};

class Tape;

// Lightweight handle to a tape node.
class Var {
public:
    Var() : tape_(nullptr), idx_(-1) {}
    Var(Tape* t, std::int32_t i) : tape_(t), idx_(i) {}
    std::int32_t index() const { return idx_; }
    Tape* tape() const { return tape_; }
    double value() const;

private:
    Tape* tape_;
    std::int32_t idx_;
};

class Tape {
public:
    std::vector<Node> nodes;
    std::vector<double> vals;

    std::int32_t push(Node n, double v) {
        nodes.push_back(n);
        vals.push_back(v);
        return static_cast<std::int32_t>(nodes.size()) - 1;
    }

    Var constant(double v) { return {this, push({Op::Const, -1, -1, v}, v)}; }
    Var input(double v = 0.0) { return {this, push({Op::Input, -1, -1, 0.0}, v)}; }

    void set(std::int32_t i, double v) { vals[i] = v; }
    double value(std::int32_t i) const { return vals[i]; }
    std::size_t size() const { return nodes.size(); }

    // Recompute all non-leaf values in topological (index) order.
    void forward() {
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            const Node& n = nodes[i];
            switch (n.op) {
            case Op::Const:
            case Op::Input: break;
            case Op::Add: vals[i] = vals[n.a] + vals[n.b]; break;
            case Op::Sub: vals[i] = vals[n.a] - vals[n.b]; break;
            case Op::Mul: vals[i] = vals[n.a] * vals[n.b]; break;
            case Op::Neg: vals[i] = -vals[n.a]; break;
            case Op::Tanh: vals[i] = std::tanh(vals[n.a]); break;
            case Op::AddC: vals[i] = vals[n.a] + n.c; break;
            case Op::MulC: vals[i] = vals[n.a] * n.c; break;
            }
        }
    }

    // Numeric reverse sweep from weighted seeds; returns adjoints of all nodes.
    std::vector<double> reverse(std::span<const std::pair<std::int32_t, double>> seeds) const {
        std::vector<double> adj(nodes.size(), 0.0);
        for (const auto& [i, w] : seeds) adj[i] += w;
        for (std::int32_t i = static_cast<std::int32_t>(nodes.size()) - 1; i >= 0; --i) {
            const double a = adj[i];
            if (a == 0.0) continue;
            const Node& n = nodes[i];
            switch (n.op) {
            case Op::Const:
            case Op::Input: break;
            case Op::Add:
                adj[n.a] += a;
                adj[n.b] += a;
                break;
            case Op::Sub:
                adj[n.a] += a;
                adj[n.b] -= a;
                break;
            case Op::Mul:
                adj[n.a] += a * vals[n.b];
                adj[n.b] += a * vals[n.a];
                break;
            case Op::Neg: adj[n.a] -= a; break;
            case Op::Tanh: adj[n.a] += a * (1.0 - vals[i] * vals[i]); break;
            case Op::AddC: adj[n.a] += a; break;
            case Op::MulC: adj[n.a] += a * n.c; break;
            }
        }
        return adj;
    }

    std::vector<double> reverse(Var y) const {
        const std::pair<std::int32_t, double> seed{y.index(), 1.0};
        return reverse(std::span<const std::pair<std::int32_t, double>>(&seed, 1));
    }
};

inline double Var::value() const { return tape_->value(idx_); }

inline Var operator+(Var a, Var b) {
    Tape* t = a.tape();
    return {t, t->push({Op::Add, a.index(), b.index(), 0.0}, a.value() + b.value())};
}
inline Var operator-(Var a, Var b) {
    Tape* t = a.tape();
    return {t, t->push({Op::Sub, a.index(), b.index(), 0.0}, a.value() - b.value())};
}
inline Var operator*(Var a, Var b) {
    Tape* t = a.tape();
    return {t, t->push({Op::Mul, a.index(), b.index(), 0.0}, a.value() * b.value())};
}
inline Var operator-(Var a) {
    Tape* t = a.tape();
    return {t, t->push({Op::Neg, a.index(), -1, 0.0}, -a.value())};
}
inline Var operator+(Var a, double c) {
    Tape* t = a.tape();
    return {t, t->push({Op::AddC, a.index(), -1, c}, a.value() + c)};
}
inline Var operator+(double c, Var a) { return a + c; }
inline Var operator-(Var a, double c) { return a + (-c); }
inline Var operator-(double c, Var a) { return -a + c; }
inline Var operator*(Var a, double c) {
    Tape* t = a.tape();
    return {t, t->push({Op::MulC, a.index(), -1, c}, a.value() * c)};
}
inline Var operator*(double c, Var a) { return a * c; }
inline Var tanh(Var a) {
    Tape* t = a.tape();
    return {t, t->push({Op::Tanh, a.index(), -1, 0.0}, std::tanh(a.value()))};
}

// Symbolic reverse sweep: appends adjoint nodes for d(y)/d(x) to the tape and
// returns them as Vars. The returned Vars participate in later sweeps, which
// is how gradient-of-gradient quantities are obtained.
inline std::vector<Var> gradient(Var y, std::span<const Var> xs) {
    Tape* t = y.tape();
    const std::int32_t top = y.index();
    std::vector<std::int32_t> adj(static_cast<std::size_t>(top) + 1, -1);
    adj[top] = t->constant(1.0).index();

    auto acc = [&](std::int32_t p, Var v) {
        if (adj[p] < 0)
            adj[p] = v.index();
        else
            adj[p] = (Var(t, adj[p]) + v).index();
    };

    for (std::int32_t i = top; i >= 0; --i) {
        if (adj[i] < 0) continue;
        const Node n = t->nodes[i]; // copy: the vector may reallocate below
        Var a_i(t, adj[i]);
        switch (n.op) {
        case Op::Const:
        case Op::Input: break;
        case Op::Add:
            acc(n.a, a_i);
            acc(n.b, a_i);
            break;
        case Op::Sub:
            acc(n.a, a_i);
            acc(n.b, -a_i);
            break;
        case Op::Mul:
            acc(n.a, a_i * Var(t, n.b));
            acc(n.b, a_i * Var(t, n.a));
            break;
        case Op::Neg: acc(n.a, -a_i); break;
        case Op::Tanh: {
            Var yv(t, i);
            acc(n.a, a_i - a_i * (yv * yv));
            break;
        }
        case Op::AddC: acc(n.a, a_i); break;
        case Op::MulC: acc(n.a, a_i * n.c); break;
        }
    }

    std::vector<Var> out;
    out.reserve(xs.size());
    for (const Var& x : xs) {
        if (adj[x.index()] < 0)
            out.push_back(t->constant(0.0));
        else
            out.emplace_back(t, adj[x.index()]);
    }
    return out;
}

// Batched interpreter over a frozen tape. Values are stored node-major with
// `lanes` contiguous doubles per node, so each op vectorizes across lanes.
class Replay {
public:
    Replay(const Tape& tape, std::vector<std::int32_t> inputs,
           std::vector<std::int32_t> params, std::vector<std::int32_t> outputs)
        : nodes_(tape.nodes), inputs_(std::move(inputs)), params_(std::move(params)),
          outputs_(std::move(outputs)) {}

    void set_params(std::span<const double> theta) {
        param_vals_.assign(theta.begin(), theta.end());
    }

    std::size_t num_inputs() const { return inputs_.size(); }
    std::size_t num_outputs() const { return outputs_.size(); }
    std::size_t num_params() const { return params_.size(); }

    // X: lanes x num_inputs row-major. Y: lanes x num_outputs row-major.
    void forward(const double* X, int lanes, double* Y) {
        lanes_ = lanes;
        vals_.assign(nodes_.size() * static_cast<std::size_t>(lanes), 0.0);
        for (std::size_t j = 0; j < inputs_.size(); ++j) {
            double* row = at(inputs_[j]);
            for (int l = 0; l < lanes; ++l) row[l] = X[static_cast<std::size_t>(l) * inputs_.size() + j];
        }
        for (std::size_t j = 0; j < params_.size(); ++j) {
            double* row = at(params_[j]);
            for (int l = 0; l < lanes; ++l) row[l] = param_vals_[j];
        }
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            const Node& n = nodes_[i];
            double* o = at(static_cast<std::int32_t>(i));
            switch (n.op) {
            case Op::Const:
                for (int l = 0; l < lanes; ++l) o[l] = n.c;
                break;
            case Op::Input: break; // filled above
            case Op::Add: {
                const double *a = at(n.a), *b = at(n.b);
                for (int l = 0; l < lanes; ++l) o[l] = a[l] + b[l];
                break;
            }
            case Op::Sub: {
                const double *a = at(n.a), *b = at(n.b);
                for (int l = 0; l < lanes; ++l) o[l] = a[l] - b[l];
                break;
            }
            case Op::Mul: {
                const double *a = at(n.a), *b = at(n.b);
                for (int l = 0; l < lanes; ++l) o[l] = a[l] * b[l];
                break;
            }
            case Op::Neg: {
                const double* a = at(n.a);
                for (int l = 0; l < lanes; ++l) o[l] = -a[l];
                break;
            }
            case Op::Tanh: {
                const double* a = at(n.a);
                for (int l = 0; l < lanes; ++l) o[l] = std::tanh(a[l]);
                break;
            }
            case Op::AddC: {
                const double* a = at(n.a);
                for (int l = 0; l < lanes; ++l) o[l] = a[l] + n.c;
                break;
            }
            case Op::MulC: {
                const double* a = at(n.a);
                for (int l = 0; l < lanes; ++l) o[l] = a[l] * n.c;
                break;
            }
            }
        }
        if (Y) {
            for (std::size_t j = 0; j < outputs_.size(); ++j) {
                const double* row = at(outputs_[j]);
                for (int l = 0; l < lanes; ++l) Y[static_cast<std::size_t>(l) * outputs_.size() + j] = row[l];
            }
        }
    }

    // seeds: lanes x num_outputs adjoints of a scalar objective w.r.t. the
    // outputs. Accumulates the parameter gradient (summed over lanes) into
    // `grad` (size num_params). Must follow a forward() over the same lanes.
    void backward(const double* seeds, double* grad) {
        const int lanes = lanes_;
        adj_.assign(nodes_.size() * static_cast<std::size_t>(lanes), 0.0);
        for (std::size_t j = 0; j < outputs_.size(); ++j) {
            double* row = adj_at(outputs_[j]);
            for (int l = 0; l < lanes; ++l) row[l] += seeds[static_cast<std::size_t>(l) * outputs_.size() + j];
        }
        for (std::int32_t i = static_cast<std::int32_t>(nodes_.size()) - 1; i >= 0; --i) {
            const Node& n = nodes_[i];
            const double* ai = adj_at(i);
            switch (n.op) {
            case Op::Const:
            case Op::Input: break;
            case Op::Add: {
                double *a = adj_at(n.a), *b = adj_at(n.b);
                for (int l = 0; l < lanes; ++l) { a[l] += ai[l]; b[l] += ai[l]; }
                break;
            }
            case Op::Sub: {
                double *a = adj_at(n.a), *b = adj_at(n.b);
                for (int l = 0; l < lanes; ++l) { a[l] += ai[l]; b[l] -= ai[l]; }
                break;
            }
            case Op::Mul: {
                double *a = adj_at(n.a), *b = adj_at(n.b);
                const double *va = at(n.a), *vb = at(n.b);
                for (int l = 0; l < lanes; ++l) { a[l] += ai[l] * vb[l]; b[l] += ai[l] * va[l]; }
                break;
            }
            case Op::Neg: {
                double* a = adj_at(n.a);
                for (int l = 0; l < lanes; ++l) a[l] -= ai[l];
                break;
            }
            case Op::Tanh: {
                double* a = adj_at(n.a);
                const double* vo = at(i);
                for (int l = 0; l < lanes; ++l) a[l] += ai[l] * (1.0 - vo[l] * vo[l]);
                break;
            }
            case Op::AddC: {
                double* a = adj_at(n.a);
                for (int l = 0; l < lanes; ++l) a[l] += ai[l];
                break;
            }
            case Op::MulC: {
                double* a = adj_at(n.a);
                for (int l = 0; l < lanes; ++l) a[l] += ai[l] * n.c;
                break;
            }
            }
        }
        for (std::size_t j = 0; j < params_.size(); ++j) {
            const double* row = adj_at(params_[j]);
            double s = 0.0;
            for (int l = 0; l < lanes; ++l) s += row[l];
            grad[j] += s;
        }
    }

private:
    double* at(std::int32_t i) { return vals_.data() + static_cast<std::size_t>(i) * lanes_; }
    const double* at(std::int32_t i) const {
        return vals_.data() + static_cast<std::size_t>(i) * lanes_;
    }
    double* adj_at(std::int32_t i) { return adj_.data() + static_cast<std::size_t>(i) * lanes_; }

    std::vector<Node> nodes_;
    std::vector<std::int32_t> inputs_, params_, outputs_;
    std::vector<double> param_vals_;
    std::vector<double> vals_, adj_;
    int lanes_ = 0;
};

} // namespace weakdyn::ad
