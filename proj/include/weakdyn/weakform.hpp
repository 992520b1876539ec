#pragma once

// Weighted strong-form and weak-form loss assembly and evaluation.

#include <cmath>
#include <span>
#include <vector>

#include "errors.hpp"
#include "testfn.hpp"
#include "trajectory.hpp"

namespace weakdyn {

// Diagonal quadratic-form weights: |x|_W^2 = sum_l w_l x_l^2.
struct WeightMatrix {
    std::vector<double> w;

    static WeightMatrix identity(int d) { return {std::vector<double>(d, 1.0)}; }
    static WeightMatrix inverse_std(std::span<const double> sigma) {
        WeightMatrix W;
        for (double s : sigma) {
            if (s <= 0.0) throw DegenerateState("weight 1/sigma undefined for sigma <= 0");
            W.w.push_back(1.0 / s);
        }
        return W;
    }
};

inline double w_norm(std::span<const double> x, const WeightMatrix& W) {
    if (x.size() != W.w.size()) throw Error("w_norm: dimension mismatch");
    double s = 0.0;
    for (std::size_t l = 0; l < x.size(); ++l) s += W.w[l] * x[l] * x[l];
    return std::sqrt(s);
}

// One-step prediction from y under the model field and chosen integrator.
inline std::vector<double> one_step(const Dynamics& model, std::span<const double> y, double t0,
                                    double dt, Integrator method, const Rk23Options& opt = {}) {
    std::vector<double> x(y.begin(), y.end());
    if (method == Integrator::ForwardEuler) {
        std::vector<double> f(model.dim);
        model.rhs(x, f);
        for (int i = 0; i < model.dim; ++i) x[i] += dt * f[i];
    } else {
        detail::rk23_segment(model, x, t0, t0 + dt, opt);
    }
    return x;
}

// (1/N) sum_i (1/K) sum_{k=1..K} (1/d) |xhat_k(y_{k-1}) - y_k|_W^2
inline double strong_loss(const Dynamics& model, const TrajectoryDataset& data,
                          const WeightMatrix& W, Integrator method, const Rk23Options& opt = {}) {
    const int d = model.dim;
    const int K = data.grid.steps;
    if (K < 1) throw Error("strong_loss: need at least one step");
    double total = 0.0;
    std::vector<double> r(d);
    for (const Trajectory& traj : data.trajectories) {
        double acc = 0.0;
        for (int k = 1; k <= K; ++k) {
            const std::vector<double> xhat =
                one_step(model, traj[k - 1], data.grid.time(k - 1), data.grid.dt, method, opt);
            for (int l = 0; l < d; ++l) r[l] = xhat[l] - traj[k][l];
            const double nrm = w_norm(r, W);
            acc += nrm * nrm / d;
        }
        total += acc / K;
    }
    return total / static_cast<double>(data.trajectories.size());
}

// Assembled weak system for one trajectory: Phi_{qj} = h phi_j(s_q),
// dPhi_{qj} = h phi'_j(s_q) at interior subsampled points s_q = q*h,
// h = nbar*dt, and Y columns y_{nbar}, ..., y_{nbar*Q}.
struct WeakSystem {
    int Q = 0;
    int J = 0;
    int d = 0;
    int nbar = 1;
    double h = 0.0;
    std::vector<double> Phi;  // Q x J row-major
    std::vector<double> dPhi; // Q x J row-major
    std::vector<double> Y;    // d x Q row-major

    double phi(int q, int j) const { return Phi[static_cast<std::size_t>(q) * J + j]; }
    double dphi(int q, int j) const { return dPhi[static_cast<std::size_t>(q) * J + j]; }
    double y(int l, int q) const { return Y[static_cast<std::size_t>(l) * Q + q]; }
    double s(int q) const { return (q + 1) * h; } // time of quadrature point, relative to t0
};

inline WeakSystem assemble_weak(const Trajectory& traj, const TimeGrid& grid,
                                const PlacementPlan& plan, int nbar = 1) {
    if (nbar < 1) throw Error("assemble_weak: nbar must be >= 1");
    const int K = grid.steps;
    WeakSystem sys;
    sys.d = static_cast<int>(traj.front().size());
    sys.nbar = nbar;
    sys.h = nbar * grid.dt;
    sys.Q = K / nbar - 1;
    if (sys.Q < 1) throw SupportOutOfRange("trajectory too short after subsampling");
    sys.J = plan.J;
    sys.Phi.assign(static_cast<std::size_t>(sys.Q) * sys.J, 0.0);
    sys.dPhi.assign(static_cast<std::size_t>(sys.Q) * sys.J, 0.0);
    sys.Y.resize(static_cast<std::size_t>(sys.d) * sys.Q);
    for (int q = 0; q < sys.Q; ++q)
        for (int l = 0; l < sys.d; ++l)
            sys.Y[static_cast<std::size_t>(l) * sys.Q + q] = traj[(q + 1) * nbar][l];

    for (int j = 0; j < sys.J; ++j) {
        const auto [g0, g1] = plan.supports[j];
        if (g0 < 0 || g1 > K) throw SupportOutOfRange("test-function support exceeds grid");
        const BumpTestFunction tf =
            BumpTestFunction::make(g0 * grid.dt, g1 * grid.dt, plan.p);
        for (int q = 0; q < sys.Q; ++q) {
            const auto [v, dv] = bump_eval(tf, sys.s(q));
            sys.Phi[static_cast<std::size_t>(q) * sys.J + j] = sys.h * v;
            sys.dPhi[static_cast<std::size_t>(q) * sys.J + j] = sys.h * dv;
        }
    }
    return sys;
}

// Residual matrix R = Y dPhi + F Phi (d x J row-major); F is d x Q row-major.
inline std::vector<double> weak_residual(const WeakSystem& sys, std::span<const double> F) {
    std::vector<double> R(static_cast<std::size_t>(sys.d) * sys.J, 0.0);
    for (int l = 0; l < sys.d; ++l)
        for (int q = 0; q < sys.Q; ++q) {
            const double yv = sys.y(l, q);
            const double fv = F[static_cast<std::size_t>(l) * sys.Q + q];
            for (int j = 0; j < sys.J; ++j)
                R[static_cast<std::size_t>(l) * sys.J + j] +=
                    yv * sys.dphi(q, j) + fv * sys.phi(q, j);
        }
    return R;
}

// (1/(J d N)) |Y dPhi + F Phi|_W^2 with the weighted-Frobenius convention.
inline double weak_loss(const WeakSystem& sys, std::span<const double> F, const WeightMatrix& W,
                        int n_traj = 1) {
    const std::vector<double> R = weak_residual(sys, F);
    double total = 0.0;
    for (int l = 0; l < sys.d; ++l)
        for (int j = 0; j < sys.J; ++j) {
            const double r = R[static_cast<std::size_t>(l) * sys.J + j];
            total += W.w[l] * r * r;
        }
    return total / (static_cast<double>(sys.J) * sys.d * n_traj);
}

// Discrete evaluation of both sides of the weak-form master equation:
// r_j = [-sum_q h phi'_j(s_q) x_a(s_q)] - [sum_q h phi_j(s_q) f_b(x_b(s_q))],
// one d-vector per test function. Identical trajectories with a matching
// field leave only the quadrature error.
inline std::vector<std::vector<double>> consistency_residual(
    const Trajectory& traj_a, const Trajectory& traj_b, const Dynamics& field_b,
    const TimeGrid& grid, const PlacementPlan& plan, int nbar = 1) {
    if (traj_a.size() != traj_b.size()) throw Error("consistency_residual: grid mismatch");
    const WeakSystem sa = assemble_weak(traj_a, grid, plan, nbar);
    const WeakSystem sb = assemble_weak(traj_b, grid, plan, nbar);
    const int d = sa.d;
    std::vector<double> f(d), xb(d);
    std::vector<std::vector<double>> res(sa.J, std::vector<double>(d, 0.0));
    for (int q = 0; q < sa.Q; ++q) {
        for (int l = 0; l < d; ++l) xb[l] = sb.y(l, q);
        field_b.rhs(xb, f);
        for (int j = 0; j < sa.J; ++j)
            for (int l = 0; l < d; ++l)
                res[j][l] -= sa.y(l, q) * sa.dphi(q, j) + f[l] * sa.phi(q, j);
    }
    return res;
}

} // namespace weakdyn
