#pragma once

// Training loop: AdamW with decoupled weight decay, stepwise learning-rate
// decay, state-wise weights, and the state-wise residual-based-attention
// (RBA) multiplier update, for both the strong-form and weak-form losses.

#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"
#include "genericnet.hpp"
#include "rng.hpp"
#include "testfn.hpp"
#include "trajectory.hpp"
#include "weakform.hpp"

namespace weakdyn {

enum class LossKind { Strong, Weak };

struct RbaConfig {
    double eta_star = 0.0;
    double gamma = 1.0; // (eta_star, gamma) = (0, 1) disables the mechanism
};

struct TrainConfig {
    double lr = 1e-3;
    double decay_rate = 1.0; // alpha; lr(step) = lr * alpha^(step/decay_steps)
    int decay_steps = 5000;
    double weight_decay = 0.0;
    int iters = 1000;
    int batch_size = 0; // strong form: trajectories per iteration, 0 = all
    std::uint64_t seed = 0;
    LossKind loss = LossKind::Strong;
    int testfn_ell = 30;
    int testfn_p = 2;
    double testfn_s = 0.5;
    int nbar = 1;       // weak-form subsampling stride
    RbaConfig rba;
    bool rba_enabled = true; // false removes the multiplier update entirely
    int history_every = 100;

    void validate() const {
        if (lr <= 0.0) throw Error("config: lr must be > 0");
        if (decay_rate <= 0.0 || decay_rate > 1.0) throw Error("config: decay_rate in (0,1]");
        if (decay_steps < 1) throw Error("config: decay_steps must be >= 1");
        if (rba.gamma <= 0.0 || rba.gamma > 1.0) throw Error("config: rba.gamma in (0,1]");
        if (rba.eta_star < 0.0) throw Error("config: rba.eta_star must be >= 0");
    }
};

struct RbaState {
    std::vector<double> lambda; // one multiplier per state, starts at 1

    static RbaState ones(int d) { return {std::vector<double>(d, 1.0)}; }
};

// lambda^k = gamma lambda^{k-1} + eta* sqrt(W) e / ||sqrt(W) e||_inf;
// the normalized term is defined as 0 when e = 0.
inline void rba_update(RbaState& state, std::span<const double> e, const WeightMatrix& W,
                       const RbaConfig& cfg) {
    const int d = static_cast<int>(state.lambda.size());
    std::vector<double> we(d);
    double norm = 0.0;
    for (int l = 0; l < d; ++l) {
        we[l] = std::sqrt(W.w[l]) * e[l];
        norm = std::max(norm, std::abs(we[l]));
    }
    for (int l = 0; l < d; ++l)
        state.lambda[l] = cfg.gamma * state.lambda[l] +
                          (norm > 0.0 ? cfg.eta_star * we[l] / norm : 0.0);
}

inline double lr_at(int step, const TrainConfig& cfg) {
    return cfg.lr * std::pow(cfg.decay_rate, step / cfg.decay_steps);
}

struct AdamState {
    std::vector<double> m, v;
    int t = 0;

    static AdamState zeros(int n) { return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0}; }
};

// Standard AdamW: bias-corrected moments, decay decoupled from the gradient.
inline void adamw_step(std::vector<double>& theta, std::span<const double> g, AdamState& st,
                       double lr, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
                       double eps = 1e-8) {
    ++st.t;
    const double bc1 = 1.0 - std::pow(beta1, st.t);
    const double bc2 = 1.0 - std::pow(beta2, st.t);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        st.m[i] = beta1 * st.m[i] + (1.0 - beta1) * g[i];
        st.v[i] = beta2 * st.v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = st.m[i] / bc1;
        const double vhat = st.v[i] / bc2;
        theta[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * theta[i]);
    }
}

struct HistoryRow {
    int iter = 0;
    double loss = 0.0;
    double lr = 0.0;
    std::vector<double> lambda;
    std::vector<double> e;
};

struct TrainResult {
    std::vector<HistoryRow> history;
    double final_loss = 0.0;
};

inline void write_history_csv(const std::string& path, const std::vector<HistoryRow>& history,
                              int d) {
    std::vector<std::string> header{"iter", "loss", "lr"};
    for (int l = 1; l <= d; ++l) header.push_back("lambda_" + std::to_string(l));
    for (int l = 1; l <= d; ++l) header.push_back("e_" + std::to_string(l));
    csv::Writer w(path, header);
    for (const HistoryRow& h : history) {
        std::vector<double> row{static_cast<double>(h.iter), h.loss, h.lr};
        row.insert(row.end(), h.lambda.begin(), h.lambda.end());
        row.insert(row.end(), h.e.begin(), h.e.end());
        w.row(row);
    }
}

namespace detail {

// Flattened strong-form batch: lanes are (trajectory, step) pairs.
struct StrongBatch {
    int lanes = 0;
    std::vector<double> X;       // lanes x d: y_{k-1}
    std::vector<double> target;  // lanes x d: y_k
};

inline void fill_strong_batch(const TrajectoryDataset& data, std::span<const int> traj_idx,
                              StrongBatch& b) {
    const int d = static_cast<int>(data.sigma.size());
    const int K = data.grid.steps;
    b.lanes = static_cast<int>(traj_idx.size()) * K;
    b.X.resize(static_cast<std::size_t>(b.lanes) * d);
    b.target.resize(static_cast<std::size_t>(b.lanes) * d);
    std::size_t lane = 0;
    for (int i : traj_idx)
        for (int k = 1; k <= K; ++k, ++lane)
            for (int l = 0; l < d; ++l) {
                b.X[lane * d + l] = data.trajectories[i][k - 1][l];
                b.target[lane * d + l] = data.trajectories[i][k][l];
            }
}

// Sampling without replacement: partial Fisher-Yates keyed by (seed, iter).
inline std::vector<int> sample_trajectories(int n, int batch, std::uint64_t seed, int iter) {
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    if (batch <= 0 || batch >= n) return idx;
    for (int j = 0; j < batch; ++j) {
        const int pick = j + static_cast<int>(rng::hash4(seed, 0x5ba7c4, iter, j) %
                                              static_cast<std::uint64_t>(n - j));
        std::swap(idx[j], idx[pick]);
    }
    idx.resize(batch);
    return idx;
}

} // namespace detail

// Loss / residual / backward seeds from a precomputed field matrix F
// (lanes x d, from forward_batch on b.X). Forward Euler one-step predictions.
inline double strong_eval(const detail::StrongBatch& b, std::span<const double> F, double dt,
                          const WeightMatrix& W, std::span<const double> lambda, int n_batch,
                          int K, int d, std::span<double> e_out, std::vector<double>* seeds) {
    const double norm = 1.0 / (static_cast<double>(n_batch) * K * d);
    double loss = 0.0;
    std::fill(e_out.begin(), e_out.end(), 0.0);
    if (seeds) seeds->assign(static_cast<std::size_t>(b.lanes) * d, 0.0);
    for (int lane = 0; lane < b.lanes; ++lane)
        for (int l = 0; l < d; ++l) {
            const std::size_t idx = static_cast<std::size_t>(lane) * d + l;
            const double r = b.X[idx] + dt * F[idx] - b.target[idx];
            loss += norm * W.w[l] * lambda[l] * r * r;
            e_out[l] += std::abs(r);
            if (seeds) (*seeds)[idx] = 2.0 * norm * W.w[l] * lambda[l] * r * dt;
        }
    for (int l = 0; l < d; ++l) e_out[l] /= static_cast<double>(n_batch) * K;
    return loss;
}

// Convenience wrapper: one full strong-form evaluation including the forward
// pass and, when grad is given, the backward pass.
inline double strong_pass(FieldModel& model, const detail::StrongBatch& b, double dt,
                          const WeightMatrix& W, std::span<const double> lambda, int n_batch,
                          int K, std::span<double> e_out, std::vector<double>* grad) {
    const int d = model.dim();
    std::vector<double> F(static_cast<std::size_t>(b.lanes) * d);
    model.forward_batch(b.X.data(), b.lanes, F.data());
    std::vector<double> seeds;
    const double loss =
        strong_eval(b, F, dt, W, lambda, n_batch, K, d, e_out, grad ? &seeds : nullptr);
    if (grad) {
        std::fill(grad->begin(), grad->end(), 0.0);
        model.backward_batch(seeds.data(), grad->data());
    }
    return loss;
}

// Pre-assembled weak-form systems (one per trajectory) with a shared flat
// input matrix so the whole dataset evaluates in a single replay.
struct WeakBatch {
    std::vector<WeakSystem> systems;
    std::vector<double> X; // total lanes x d: subsampled states
    std::vector<int> offset; // lane offset of each trajectory
    int lanes = 0;
    int d = 0;

    static WeakBatch assemble(const TrajectoryDataset& data, const PlacementPlan& plan,
                              int nbar) {
        WeakBatch b;
        b.d = static_cast<int>(data.sigma.size());
        for (const Trajectory& traj : data.trajectories) {
            WeakSystem sys = assemble_weak(traj, data.grid, plan, nbar);
            b.offset.push_back(b.lanes);
            b.lanes += sys.Q;
            b.systems.push_back(std::move(sys));
        }
        b.X.resize(static_cast<std::size_t>(b.lanes) * b.d);
        for (std::size_t i = 0; i < b.systems.size(); ++i) {
            const WeakSystem& sys = b.systems[i];
            for (int q = 0; q < sys.Q; ++q)
                for (int l = 0; l < b.d; ++l)
                    b.X[static_cast<std::size_t>(b.offset[i] + q) * b.d + l] = sys.y(l, q);
        }
        return b;
    }
};

inline double weak_eval(const WeakBatch& b, std::span<const double> Fall, const WeightMatrix& W,
                        std::span<const double> lambda, std::span<double> e_out,
                        std::vector<double>* seeds) {
    const int d = b.d;
    const int N = static_cast<int>(b.systems.size());
    double loss = 0.0;
    std::fill(e_out.begin(), e_out.end(), 0.0);
    if (seeds) seeds->assign(static_cast<std::size_t>(b.lanes) * d, 0.0);
    int total_j = 0;
    std::vector<double> F; // d x Q for one trajectory
    for (int i = 0; i < N; ++i) {
        const WeakSystem& sys = b.systems[i];
        const double norm = 1.0 / (static_cast<double>(sys.J) * d * N);
        F.assign(static_cast<std::size_t>(d) * sys.Q, 0.0);
        for (int q = 0; q < sys.Q; ++q)
            for (int l = 0; l < d; ++l)
                F[static_cast<std::size_t>(l) * sys.Q + q] =
                    Fall[static_cast<std::size_t>(b.offset[i] + q) * d + l];
        const std::vector<double> R = weak_residual(sys, F);
        total_j += sys.J;
        for (int l = 0; l < d; ++l)
            for (int j = 0; j < sys.J; ++j) {
                const double r = R[static_cast<std::size_t>(l) * sys.J + j];
                loss += norm * W.w[l] * lambda[l] * r * r;
                e_out[l] += std::abs(r);
                if (seeds) {
                    const double c = 2.0 * norm * W.w[l] * lambda[l] * r;
                    for (int q = 0; q < sys.Q; ++q)
                        (*seeds)[static_cast<std::size_t>(b.offset[i] + q) * d + l] +=
                            c * sys.phi(q, j);
                }
            }
    }
    for (int l = 0; l < d; ++l) e_out[l] /= static_cast<double>(total_j);
    return loss;
}

inline double weak_pass(FieldModel& model, const WeakBatch& b, const WeightMatrix& W,
                        std::span<const double> lambda, std::span<double> e_out,
                        std::vector<double>* grad) {
    std::vector<double> Fall(static_cast<std::size_t>(b.lanes) * b.d);
    model.forward_batch(b.X.data(), b.lanes, Fall.data());
    std::vector<double> seeds;
    const double loss = weak_eval(b, Fall, W, lambda, e_out, grad ? &seeds : nullptr);
    if (grad) {
        std::fill(grad->begin(), grad->end(), 0.0);
        model.backward_batch(seeds.data(), grad->data());
    }
    return loss;
}

// Per-state L1 residual vector e for the RBA update, without gradients.
inline std::vector<double> residual_vector(FieldModel& model, const TrajectoryDataset& data,
                                           const WeightMatrix& W, LossKind kind,
                                           const TrainConfig& cfg = {}) {
    const int d = model.dim();
    std::vector<double> e(d, 0.0);
    std::vector<double> lambda(d, 1.0);
    if (kind == LossKind::Strong) {
        detail::StrongBatch b;
        std::vector<int> all(data.trajectories.size());
        std::iota(all.begin(), all.end(), 0);
        detail::fill_strong_batch(data, all, b);
        strong_pass(model, b, data.grid.dt, W, lambda, static_cast<int>(all.size()),
                    data.grid.steps, e, nullptr);
    } else {
        const PlacementPlan plan =
            place_supports(data.grid.steps / cfg.nbar, cfg.testfn_ell, cfg.testfn_p, cfg.testfn_s);
        const WeakBatch b = WeakBatch::assemble(data, plan, cfg.nbar);
        weak_pass(model, b, W, lambda, e, nullptr);
    }
    return e;
}

// Main loop. Each iteration evaluates the residual at theta^{k-1}, updates
// the RBA multipliers, and applies one AdamW step on the gradient of the
// loss weighted by W diag(lambda^k).
inline TrainResult train(FieldModel& model, const TrajectoryDataset& data,
                         const TrainConfig& cfg, const WeightMatrix& W) {
    cfg.validate();
    const int d = model.dim();
    const int n_traj = static_cast<int>(data.trajectories.size());
    const int K = data.grid.steps;
    RbaState rba = RbaState::ones(d);
    AdamState adam = AdamState::zeros(model.param_count());
    std::vector<double> theta(model.params().begin(), model.params().end());
    std::vector<double> grad(model.param_count());
    std::vector<double> e(d);
    TrainResult result;

    WeakBatch weak;
    PlacementPlan plan;
    detail::StrongBatch strong;
    if (cfg.loss == LossKind::Weak) {
        plan = place_supports(K / cfg.nbar, cfg.testfn_ell, cfg.testfn_p, cfg.testfn_s);
        weak = WeakBatch::assemble(data, plan, cfg.nbar);
    }

    double loss = 0.0;
    std::vector<double> F, seeds;
    for (int iter = 0; iter < cfg.iters; ++iter) {
        int n_batch = n_traj;
        if (cfg.loss == LossKind::Strong) {
            const std::vector<int> idx =
                detail::sample_trajectories(n_traj, cfg.batch_size, cfg.seed, iter);
            n_batch = static_cast<int>(idx.size());
            detail::fill_strong_batch(data, idx, strong);
        }
        // One forward pass per iteration: the residual e at theta^{k-1} does
        // not depend on the multipliers, so the same field values serve both
        // the RBA update and the loss gradient under W diag(lambda^k).
        const int lanes = cfg.loss == LossKind::Strong ? strong.lanes : weak.lanes;
        const double* X = cfg.loss == LossKind::Strong ? strong.X.data() : weak.X.data();
        F.resize(static_cast<std::size_t>(lanes) * d);
        model.forward_batch(X, lanes, F.data());
        if (cfg.loss == LossKind::Strong)
            strong_eval(strong, F, data.grid.dt, W, rba.lambda, n_batch, K, d, e, nullptr);
        else
            weak_eval(weak, F, W, rba.lambda, e, nullptr);
        if (cfg.rba_enabled) rba_update(rba, e, W, cfg.rba);
        if (cfg.loss == LossKind::Strong)
            loss = strong_eval(strong, F, data.grid.dt, W, rba.lambda, n_batch, K, d, e,
                               &seeds);
        else
            loss = weak_eval(weak, F, W, rba.lambda, e, &seeds);
        if (!std::isfinite(loss))
            throw NonFiniteLoss("non-finite loss at iteration " + std::to_string(iter));
        std::fill(grad.begin(), grad.end(), 0.0);
        model.backward_batch(seeds.data(), grad.data());
        adamw_step(theta, grad, adam, lr_at(iter, cfg), cfg.weight_decay);
        model.set_params(theta);
        if (iter % cfg.history_every == 0 || iter == cfg.iters - 1)
            result.history.push_back({iter, loss, lr_at(iter, cfg), rba.lambda, e});
    }
    result.final_loss = loss;
    return result;
}

} // namespace weakdyn
