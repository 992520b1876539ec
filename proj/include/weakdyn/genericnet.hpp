#pragma once

// GENERIC-structured parametric models: dense tanh networks for the energy E
// and entropy S, skew generators A_i = U_i - U_i^T, Q-matrices with rows
// (A_i grad h)^T, and the assembled operators
//   L = Q_S^T B Q_S (B skew),   M = Q_E^T C C^T Q_E (Gram, PSD),
// so that L grad S = 0 and M grad E = 0 hold for every parameter value.
//
// The field f(x) = L grad E + M grad S is compiled once onto an autodiff tape
// (with the input gradients grad E, grad S produced by a symbolic reverse
// sweep), then replayed in batches for training.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "rng.hpp"
#include "tape.hpp"
#include "trajectory.hpp"

namespace weakdyn {

namespace detail {

// Dense-net parameter layout, per layer: weights row-major [out][in], then
// biases [out]. Hidden activations tanh, linear output.
inline int dense_param_count(std::span<const int> widths) {
    int n = 0;
    for (std::size_t k = 1; k < widths.size(); ++k) n += (widths[k - 1] + 1) * widths[k];
    return n;
}

// Numeric forward pass; if grad1 is non-null the net must be scalar-valued
// and the input gradient is written there.
inline std::vector<double> dense_apply(std::span<const int> widths, std::span<const double> p,
                                       std::span<const double> x,
                                       std::vector<double>* grad1 = nullptr) {
    const std::size_t L = widths.size() - 1;
    std::vector<std::vector<double>> act(L + 1);
    act[0].assign(x.begin(), x.end());
    std::size_t off = 0;
    for (std::size_t k = 1; k <= L; ++k) {
        const int win = widths[k - 1], wout = widths[k];
        act[k].assign(wout, 0.0);
        for (int j = 0; j < wout; ++j) {
            double z = p[off + static_cast<std::size_t>(wout) * win + j]; // bias
            for (int i = 0; i < win; ++i) z += p[off + static_cast<std::size_t>(j) * win + i] * act[k - 1][i];
            act[k][j] = k < L ? std::tanh(z) : z;
        }
        off += static_cast<std::size_t>(win + 1) * wout;
    }
    if (grad1) {
        if (widths.back() != 1) throw Error("dense_apply: input gradient needs scalar output");
        std::vector<double> delta{1.0};
        for (std::size_t k = L; k >= 1; --k) {
            const int win = widths[k - 1], wout = widths[k];
            off -= static_cast<std::size_t>(win + 1) * wout;
            if (k < L) // tanh' through this layer's activation
                for (int j = 0; j < wout; ++j) delta[j] *= 1.0 - act[k][j] * act[k][j];
            std::vector<double> prev(win, 0.0);
            for (int j = 0; j < wout; ++j)
                for (int i = 0; i < win; ++i)
                    prev[i] += delta[j] * p[off + static_cast<std::size_t>(j) * win + i];
            delta = std::move(prev);
        }
        *grad1 = std::move(delta);
    }
    return act[L];
}

// Tape-recorded forward pass over parameter and input Vars (same layout).
inline std::vector<ad::Var> dense_tape(std::span<const int> widths, std::span<const ad::Var> p,
                                       std::span<const ad::Var> x) {
    const std::size_t L = widths.size() - 1;
    std::vector<ad::Var> a(x.begin(), x.end());
    std::size_t off = 0;
    for (std::size_t k = 1; k <= L; ++k) {
        const int win = widths[k - 1], wout = widths[k];
        std::vector<ad::Var> next;
        next.reserve(wout);
        for (int j = 0; j < wout; ++j) {
            ad::Var z = p[off + static_cast<std::size_t>(wout) * win + j];
            for (int i = 0; i < win; ++i)
                z = z + p[off + static_cast<std::size_t>(j) * win + i] * a[i];
            next.push_back(k < L ? ad::tanh(z) : z);
        }
        a = std::move(next);
        off += static_cast<std::size_t>(win + 1) * wout;
    }
    return a;
}

} // namespace detail

// Scalar or vector dense network evaluation; returns (value, grad_x value)
// for scalar nets.
inline std::pair<double, std::vector<double>> net_eval_grad(std::span<const int> widths,
                                                            std::span<const double> params,
                                                            std::span<const double> x) {
    std::vector<double> g;
    const std::vector<double> out = detail::dense_apply(widths, params, x, &g);
    return {out[0], std::move(g)};
}

// Q-matrix of Theorem-style construction: row i is (A_i grad_h)^T with
// A_i = U_i - U_i^T. U is m_gen stacked d x d row-major blocks.
inline std::vector<double> q_matrix(std::span<const double> U, int m_gen, int d,
                                    std::span<const double> grad_h) {
    std::vector<double> Q(static_cast<std::size_t>(m_gen) * d, 0.0);
    for (int i = 0; i < m_gen; ++i) {
        const double* Ui = U.data() + static_cast<std::size_t>(i) * d * d;
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int k = 0; k < d; ++k)
                s += (Ui[static_cast<std::size_t>(j) * d + k] - Ui[static_cast<std::size_t>(k) * d + j]) * grad_h[k];
            Q[static_cast<std::size_t>(i) * d + j] = s;
        }
    }
    return Q;
}

// Abstract parametric vector field used by the trainer: single-point
// evaluation plus lane-batched forward/backward over a frozen tape.
class FieldModel {
public:
    virtual ~FieldModel() = default;
    virtual int dim() const = 0;
    virtual int param_count() const = 0;
    virtual std::span<const double> params() const = 0;
    virtual void set_params(std::span<const double> theta) = 0;
    virtual void eval(std::span<const double> x, std::span<double> f) const = 0;
    // X: lanes x d row-major -> F: lanes x d. backward accumulates the
    // parameter gradient of sum_lanes <seeds, F> into grad.
    virtual void forward_batch(const double* X, int lanes, double* F) = 0;
    virtual void backward_batch(const double* seeds, double* grad) = 0;

    Dynamics dynamics() const {
        Dynamics dyn;
        dyn.dim = dim();
        dyn.rhs = [this](std::span<const double> x, std::span<double> f) { eval(x, f); };
        return dyn;
    }
};

// f(x) = theta * x in 1D; the transparent model used by estimator oracles.
class LinearModel1D : public FieldModel {
public:
    explicit LinearModel1D(double theta = 0.0) : theta_{theta} {}
    int dim() const override { return 1; }
    int param_count() const override { return 1; }
    std::span<const double> params() const override { return theta_; }
    void set_params(std::span<const double> t) override { theta_[0] = t[0]; }
    void eval(std::span<const double> x, std::span<double> f) const override {
        f[0] = theta_[0] * x[0];
    }
    void forward_batch(const double* X, int lanes, double* F) override {
        last_.assign(X, X + lanes);
        for (int l = 0; l < lanes; ++l) F[l] = theta_[0] * X[l];
    }
    void backward_batch(const double* seeds, double* grad) override {
        for (std::size_t l = 0; l < last_.size(); ++l) grad[0] += seeds[l] * last_[l];
    }

private:
    std::vector<double> theta_ = {0.0};
    std::vector<double> last_;
};

struct GfinnArch {
    int d = 3;
    std::vector<int> hidden = {20, 20, 20}; // tanh hidden layers for every net
    int m_gen = 0;                          // 0 = default to d
    int r = 0;                              // 0 = default to d
    bool state_dependent_bc = true;         // B and C as nets of x vs constants

    int m() const { return m_gen > 0 ? m_gen : d; }
    int rr() const { return r > 0 ? r : d; }
    std::vector<int> scalar_widths() const {
        std::vector<int> w{d};
        w.insert(w.end(), hidden.begin(), hidden.end());
        w.push_back(1);
        return w;
    }
    std::vector<int> matrix_widths(int out) const {
        std::vector<int> w{d};
        w.insert(w.end(), hidden.begin(), hidden.end());
        w.push_back(out);
        return w;
    }
};

struct DegeneracyReport {
    double max_l_grad_s = 0.0; // ||L grad S||_inf
    double max_m_grad_e = 0.0; // ||M grad E||_inf
    double max_l_sym = 0.0;    // ||L + L^T||_inf
    double max_m_asym = 0.0;   // ||M - M^T||_inf
    double min_eig_m = 0.0;    // over all points
};

class GfinnModel : public FieldModel {
public:
    GfinnModel(const GfinnArch& arch, std::uint64_t seed) : arch_(arch) {
        layout();
        init_params(seed);
        build_tape();
    }

    const GfinnArch& arch() const { return arch_; }
    int dim() const override { return arch_.d; }
    int param_count() const override { return static_cast<int>(theta_.size()); }
    std::span<const double> params() const override { return theta_; }
    void set_params(std::span<const double> theta) override {
        if (theta.size() != theta_.size()) throw Error("GfinnModel: parameter size mismatch");
        theta_.assign(theta.begin(), theta.end());
        replay_.set_params(theta_);
    }

    void eval(std::span<const double> x, std::span<double> f) const override {
        field_numeric(x, f);
    }
    void forward_batch(const double* X, int lanes, double* F) override {
        replay_.forward(X, lanes, F);
    }
    void backward_batch(const double* seeds, double* grad) override {
        replay_.backward(seeds, grad);
    }

    double energy(std::span<const double> x) const {
        return detail::dense_apply(e_widths_, slice(off_e_, n_e_), x)[0];
    }
    double entropy(std::span<const double> x) const {
        return detail::dense_apply(s_widths_, slice(off_s_, n_s_), x)[0];
    }
    std::vector<double> grad_energy(std::span<const double> x) const {
        std::vector<double> g;
        detail::dense_apply(e_widths_, slice(off_e_, n_e_), x, &g);
        return g;
    }
    std::vector<double> grad_entropy(std::span<const double> x) const {
        std::vector<double> g;
        detail::dense_apply(s_widths_, slice(off_s_, n_s_), x, &g);
        return g;
    }

    // d x d row-major operators at x.
    std::vector<double> l_matrix(std::span<const double> x) const {
        const int d = arch_.d, m = arch_.m();
        const std::vector<double> Q = q_matrix(slice(off_us_, n_u_), m, d, grad_entropy(x));
        const std::vector<double> B = b_skew(x);
        // L = Q^T B Q
        std::vector<double> BQ(static_cast<std::size_t>(m) * d, 0.0);
        for (int i = 0; i < m; ++i)
            for (int k = 0; k < m; ++k) {
                const double b = B[static_cast<std::size_t>(i) * m + k];
                if (b == 0.0) continue;
                for (int j = 0; j < d; ++j)
                    BQ[static_cast<std::size_t>(i) * d + j] += b * Q[static_cast<std::size_t>(k) * d + j];
            }
        std::vector<double> L(static_cast<std::size_t>(d) * d, 0.0);
        for (int i = 0; i < m; ++i)
            for (int a = 0; a < d; ++a)
                for (int b2 = 0; b2 < d; ++b2)
                    L[static_cast<std::size_t>(a) * d + b2] +=
                        Q[static_cast<std::size_t>(i) * d + a] * BQ[static_cast<std::size_t>(i) * d + b2];
        return L;
    }

    std::vector<double> m_matrix(std::span<const double> x) const {
        const int d = arch_.d, m = arch_.m(), r = arch_.rr();
        const std::vector<double> Q = q_matrix(slice(off_ue_, n_u_), m, d, grad_energy(x));
        const std::vector<double> C = c_factor(x); // m x r
        // G = C^T Q (r x d), M = G^T G
        std::vector<double> G(static_cast<std::size_t>(r) * d, 0.0);
        for (int i = 0; i < m; ++i)
            for (int k = 0; k < r; ++k) {
                const double c = C[static_cast<std::size_t>(i) * r + k];
                if (c == 0.0) continue;
                for (int j = 0; j < d; ++j)
                    G[static_cast<std::size_t>(k) * d + j] += c * Q[static_cast<std::size_t>(i) * d + j];
            }
        std::vector<double> M(static_cast<std::size_t>(d) * d, 0.0);
        for (int k = 0; k < r; ++k)
            for (int a = 0; a < d; ++a)
                for (int b = 0; b < d; ++b)
                    M[static_cast<std::size_t>(a) * d + b] +=
                        G[static_cast<std::size_t>(k) * d + a] * G[static_cast<std::size_t>(k) * d + b];
        return M;
    }

    DegeneracyReport degeneracy_report(std::span<const std::vector<double>> points) const;

    void save(const std::string& path) const {
        nlohmann::json j;
        j["format"] = "weakdyn-gfinn-v1";
        j["arch"] = {{"d", arch_.d},           {"hidden", arch_.hidden},
                     {"m_gen", arch_.m()},     {"r", arch_.rr()},
                     {"state_dependent_bc", arch_.state_dependent_bc}};
        j["params"] = theta_;
        std::ofstream out(path);
        if (!out) throw Error("cannot write checkpoint: " + path);
        out << j.dump(2) << "\n";
    }

    static GfinnModel load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot read checkpoint: " + path);
        nlohmann::json j;
        in >> j;
        if (j.value("format", "") != "weakdyn-gfinn-v1")
            throw Error("unrecognized checkpoint format in " + path);
        GfinnArch arch;
        arch.d = j["arch"]["d"].get<int>();
        arch.hidden = j["arch"]["hidden"].get<std::vector<int>>();
        arch.m_gen = j["arch"]["m_gen"].get<int>();
        arch.r = j["arch"]["r"].get<int>();
        arch.state_dependent_bc = j["arch"]["state_dependent_bc"].get<bool>();
        GfinnModel model(arch, 0);
        const std::vector<double> theta = j["params"].get<std::vector<double>>();
        model.set_params(theta);
        return model;
    }

private:
    std::span<const double> slice(int off, int n) const {
        return std::span<const double>(theta_).subspan(off, n);
    }

    // B(x) = B_raw(x) - B_raw(x)^T, m x m.
    std::vector<double> b_skew(std::span<const double> x) const {
        const int m = arch_.m();
        std::vector<double> raw =
            arch_.state_dependent_bc
                ? detail::dense_apply(b_widths_, slice(off_b_, n_b_), x)
                : std::vector<double>(theta_.begin() + off_b_, theta_.begin() + off_b_ + n_b_);
        std::vector<double> B(static_cast<std::size_t>(m) * m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                B[static_cast<std::size_t>(i) * m + j] =
                    raw[static_cast<std::size_t>(i) * m + j] - raw[static_cast<std::size_t>(j) * m + i];
        return B;
    }

    // C(x), m x r.
    std::vector<double> c_factor(std::span<const double> x) const {
        return arch_.state_dependent_bc
                   ? detail::dense_apply(c_widths_, slice(off_c_, n_c_), x)
                   : std::vector<double>(theta_.begin() + off_c_, theta_.begin() + off_c_ + n_c_);
    }

    void field_numeric(std::span<const double> x, std::span<double> f) const {
        const int d = arch_.d, m = arch_.m(), r = arch_.rr();
        const std::vector<double> gE = grad_energy(x), gS = grad_entropy(x);
        const std::vector<double> QS = q_matrix(slice(off_us_, n_u_), m, d, gS);
        const std::vector<double> QE = q_matrix(slice(off_ue_, n_u_), m, d, gE);
        const std::vector<double> B = b_skew(x);
        const std::vector<double> C = c_factor(x);
        // L grad E = QS^T B (QS gE)
        std::vector<double> u(m, 0.0), v(m, 0.0);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < d; ++j) u[i] += QS[static_cast<std::size_t>(i) * d + j] * gE[j];
        for (int i = 0; i < m; ++i)
            for (int k = 0; k < m; ++k) v[i] += B[static_cast<std::size_t>(i) * m + k] * u[k];
        // M grad S = QE^T C C^T (QE gS)
        std::vector<double> w(m, 0.0), a(r, 0.0), b(m, 0.0);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < d; ++j) w[i] += QE[static_cast<std::size_t>(i) * d + j] * gS[j];
        for (int k = 0; k < r; ++k)
            for (int i = 0; i < m; ++i) a[k] += C[static_cast<std::size_t>(i) * r + k] * w[i];
        for (int i = 0; i < m; ++i)
            for (int k = 0; k < r; ++k) b[i] += C[static_cast<std::size_t>(i) * r + k] * a[k];
        for (int j = 0; j < d; ++j) {
            double s = 0.0;
            for (int i = 0; i < m; ++i)
                s += QS[static_cast<std::size_t>(i) * d + j] * v[i] +
                     QE[static_cast<std::size_t>(i) * d + j] * b[i];
            f[j] = s;
        }
    }

    void layout() {
        const int d = arch_.d, m = arch_.m(), r = arch_.rr();
        e_widths_ = arch_.scalar_widths();
        s_widths_ = arch_.scalar_widths();
        b_widths_ = arch_.matrix_widths(m * m);
        c_widths_ = arch_.matrix_widths(m * r);
        n_e_ = detail::dense_param_count(e_widths_);
        n_s_ = detail::dense_param_count(s_widths_);
        n_u_ = m * d * d;
        n_b_ = arch_.state_dependent_bc ? detail::dense_param_count(b_widths_) : m * m;
        n_c_ = arch_.state_dependent_bc ? detail::dense_param_count(c_widths_) : m * r;
        off_e_ = 0;
        off_s_ = off_e_ + n_e_;
        off_us_ = off_s_ + n_s_;
        off_ue_ = off_us_ + n_u_;
        off_b_ = off_ue_ + n_u_;
        off_c_ = off_b_ + n_b_;
        theta_.assign(static_cast<std::size_t>(off_c_) + n_c_, 0.0);
    }

    // Per-layer uniform +-sqrt(6/(w_in+w_out)) weights, zero biases; skew
    // generators and constant B/C entries uniform +-sqrt(6/(2d)).
    void init_params(std::uint64_t seed) {
        std::uint64_t counter = 0;
        auto init_net = [&](std::span<const int> widths, int off) {
            std::size_t p = static_cast<std::size_t>(off);
            for (std::size_t k = 1; k < widths.size(); ++k) {
                const int win = widths[k - 1], wout = widths[k];
                const double bound = std::sqrt(6.0 / (win + wout));
                for (int i = 0; i < win * wout; ++i)
                    theta_[p++] = rng::uniform(-bound, bound, seed, counter++);
                for (int j = 0; j < wout; ++j) theta_[p++] = 0.0; // biases
            }
        };
        init_net(e_widths_, off_e_);
        init_net(s_widths_, off_s_);
        const double bound = std::sqrt(6.0 / (2.0 * arch_.d));
        for (int i = 0; i < 2 * n_u_; ++i)
            theta_[off_us_ + i] = rng::uniform(-bound, bound, seed, counter++);
        if (arch_.state_dependent_bc) {
            init_net(b_widths_, off_b_);
            init_net(c_widths_, off_c_);
        } else {
            for (int i = 0; i < n_b_ + n_c_; ++i)
                theta_[off_b_ + i] = rng::uniform(-bound, bound, seed, counter++);
        }
    }

    void build_tape() {
        const int d = arch_.d, m = arch_.m(), r = arch_.rr();
        tape_ = ad::Tape{};
        std::vector<ad::Var> xv, pv;
        std::vector<std::int32_t> x_idx, p_idx;
        for (int i = 0; i < d; ++i) {
            xv.push_back(tape_.input());
            x_idx.push_back(xv.back().index());
        }
        for (double t : theta_) {
            pv.push_back(tape_.input(t));
            p_idx.push_back(pv.back().index());
        }
        auto pslice = [&](int off, int n) {
            return std::span<const ad::Var>(pv).subspan(off, n);
        };
        const ad::Var E = detail::dense_tape(e_widths_, pslice(off_e_, n_e_), xv)[0];
        const ad::Var S = detail::dense_tape(s_widths_, pslice(off_s_, n_s_), xv)[0];
        const std::vector<ad::Var> gE = ad::gradient(E, xv);
        const std::vector<ad::Var> gS = ad::gradient(S, xv);

        auto q_rows = [&](int u_off, const std::vector<ad::Var>& g) {
            std::vector<std::vector<ad::Var>> Q(m);
            for (int i = 0; i < m; ++i) {
                const int base = u_off + i * d * d;
                for (int j = 0; j < d; ++j) {
                    ad::Var s = (pv[base + j * d + 0] - pv[base + 0 * d + j]) * g[0];
                    for (int k = 1; k < d; ++k)
                        s = s + (pv[base + j * d + k] - pv[base + k * d + j]) * g[k];
                    Q[i].push_back(s);
                }
            }
            return Q;
        };
        const auto QS = q_rows(off_us_, gS);
        const auto QE = q_rows(off_ue_, gE);

        std::vector<ad::Var> b_raw, c_entries;
        if (arch_.state_dependent_bc) {
            b_raw = detail::dense_tape(b_widths_, pslice(off_b_, n_b_), xv);
            c_entries = detail::dense_tape(c_widths_, pslice(off_c_, n_c_), xv);
        } else {
            for (int i = 0; i < n_b_; ++i) b_raw.push_back(pv[off_b_ + i]);
            for (int i = 0; i < n_c_; ++i) c_entries.push_back(pv[off_c_ + i]);
        }

        auto dot = [&](const std::vector<ad::Var>& a, const std::vector<ad::Var>& b) {
            ad::Var s = a[0] * b[0];
            for (std::size_t i = 1; i < a.size(); ++i) s = s + a[i] * b[i];
            return s;
        };
        // u = QS gE, v = B u with B = raw - raw^T
        std::vector<ad::Var> u, v, w, a, bb;
        for (int i = 0; i < m; ++i) u.push_back(dot(QS[i], gE));
        for (int i = 0; i < m; ++i) {
            ad::Var s = tape_.constant(0.0);
            for (int k = 0; k < m; ++k)
                s = s + (b_raw[i * m + k] - b_raw[k * m + i]) * u[k];
            v.push_back(s);
        }
        // w = QE gS, a = C^T w, bb = C a
        for (int i = 0; i < m; ++i) w.push_back(dot(QE[i], gS));
        for (int k = 0; k < r; ++k) {
            ad::Var s = c_entries[0 * r + k] * w[0];
            for (int i = 1; i < m; ++i) s = s + c_entries[i * r + k] * w[i];
            a.push_back(s);
        }
        for (int i = 0; i < m; ++i) {
            ad::Var s = c_entries[i * r + 0] * a[0];
            for (int k = 1; k < r; ++k) s = s + c_entries[i * r + k] * a[k];
            bb.push_back(s);
        }
        std::vector<std::int32_t> out_idx;
        for (int j = 0; j < d; ++j) {
            ad::Var s = QS[0][j] * v[0] + QE[0][j] * bb[0];
            for (int i = 1; i < m; ++i) s = s + QS[i][j] * v[i] + QE[i][j] * bb[i];
            out_idx.push_back(s.index());
        }
        replay_ = ad::Replay(tape_, x_idx, p_idx, out_idx);
        replay_.set_params(theta_);
    }

    GfinnArch arch_;
    std::vector<double> theta_;
    std::vector<int> e_widths_, s_widths_, b_widths_, c_widths_;
    int n_e_ = 0, n_s_ = 0, n_u_ = 0, n_b_ = 0, n_c_ = 0;
    int off_e_ = 0, off_s_ = 0, off_us_ = 0, off_ue_ = 0, off_b_ = 0, off_c_ = 0;
    ad::Tape tape_;
    ad::Replay replay_{ad::Tape{}, {}, {}, {}};
};

} // namespace weakdyn

// degeneracy_report needs a symmetric eigensolver; kept out-of-line so the
// Eigen dependency stays in one place.
#include <Eigen/Eigenvalues>

namespace weakdyn {

inline DegeneracyReport GfinnModel::degeneracy_report(
    std::span<const std::vector<double>> points) const {
    const int d = arch_.d;
    DegeneracyReport rep;
    rep.min_eig_m = std::numeric_limits<double>::infinity();
    for (const auto& x : points) {
        const std::vector<double> L = l_matrix(x), M = m_matrix(x);
        const std::vector<double> gE = grad_energy(x), gS = grad_entropy(x);
        for (int i = 0; i < d; ++i) {
            double ls = 0.0, me = 0.0;
            for (int j = 0; j < d; ++j) {
                ls += L[static_cast<std::size_t>(i) * d + j] * gS[j];
                me += M[static_cast<std::size_t>(i) * d + j] * gE[j];
                rep.max_l_sym = std::max(rep.max_l_sym,
                                         std::abs(L[static_cast<std::size_t>(i) * d + j] +
                                                  L[static_cast<std::size_t>(j) * d + i]));
                rep.max_m_asym = std::max(rep.max_m_asym,
                                          std::abs(M[static_cast<std::size_t>(i) * d + j] -
                                                   M[static_cast<std::size_t>(j) * d + i]));
            }
            rep.max_l_grad_s = std::max(rep.max_l_grad_s, std::abs(ls));
            rep.max_m_grad_e = std::max(rep.max_m_grad_e, std::abs(me));
        }
        Eigen::MatrixXd Me(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) Me(i, j) = M[static_cast<std::size_t>(i) * d + j];
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Me);
        rep.min_eig_m = std::min(rep.min_eig_m, es.eigenvalues().minCoeff());
    }
    if (points.empty()) rep.min_eig_m = 0.0;
    return rep;
}

} // namespace weakdyn
