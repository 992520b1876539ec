#pragma once

// Dynamics definitions, integration, noisy dataset generation and per-state
// statistics.

#include <cmath>
#include <cstdio>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "csv.hpp"
#include "errors.hpp"
#include "rng.hpp"

namespace weakdyn {

struct TimeGrid {
    double t0 = 0.0;
    double dt = 0.0;
    int steps = 0; // K; the grid has K+1 points

    // Points are computed as t0 + i*dt, never by repeated addition.
    double time(int i) const { return t0 + i * dt; }
    int points() const { return steps + 1; }
    double horizon() const { return steps * dt; }
};

// A trajectory is (K+1) states of dimension d.
using Trajectory = std::vector<std::vector<double>>;

struct Dynamics {
    int dim = 0;
    std::function<void(std::span<const double>, std::span<double>)> rhs;
    // Optional analytic flow (t, x0) -> x(t); null when unavailable.
    std::function<void(double, std::span<const double>, std::span<double>)> flow;
};

struct TrajectoryDataset {
    TimeGrid grid;
    std::vector<Trajectory> trajectories;
    double noise_level = 0.0;     // rho
    std::vector<double> sigma;    // per-state population std
    std::vector<double> mu;       // per-state mean
};

// x(t) = x0 e^{lambda t}
inline double linear_solution(double lambda, double x0, double t) {
    return x0 * std::exp(lambda * t);
}

inline Dynamics linear_dynamics(double lambda) {
    Dynamics dyn;
    dyn.dim = 1;
    dyn.rhs = [lambda](std::span<const double> x, std::span<double> f) { f[0] = lambda * x[0]; };
    dyn.flow = [lambda](double t, std::span<const double> x0, std::span<double> x) {
        x[0] = linear_solution(lambda, x0[0], t);
    };
    return dyn;
}

enum class Integrator { ForwardEuler, RK23 };

struct Rk23Options {
    double rel_tol = 1e-6;
    double abs_tol = 1e-9;
    double min_step = 1e-14;
    double max_step = 0.0; // 0 = unlimited
};

namespace detail {

// Bogacki-Shampine 3(2) pair with PI step control; lands exactly on t_end.
inline void rk23_segment(const Dynamics& dyn, std::vector<double>& x, double t0, double t_end,
                         const Rk23Options& opt) {
    const int d = dyn.dim;
    std::vector<double> k1(d), k2(d), k3(d), k4(d), xt(d), x3(d);
    double t = t0;
    double h = (t_end - t0) * 0.1;
    if (opt.max_step > 0.0 && h > opt.max_step) h = opt.max_step;
    double err_prev = 1.0;
    dyn.rhs(x, k1);
    while (t < t_end) {
        if (t + h > t_end) h = t_end - t;
        for (int i = 0; i < d; ++i) xt[i] = x[i] + 0.5 * h * k1[i];
        dyn.rhs(xt, k2);
        for (int i = 0; i < d; ++i) xt[i] = x[i] + 0.75 * h * k2[i];
        dyn.rhs(xt, k3);
        for (int i = 0; i < d; ++i)
            x3[i] = x[i] + h * (2.0 / 9.0 * k1[i] + 1.0 / 3.0 * k2[i] + 4.0 / 9.0 * k3[i]);
        dyn.rhs(x3, k4);
        double err = 0.0;
        for (int i = 0; i < d; ++i) {
            const double e = h * (-5.0 / 72.0 * k1[i] + 1.0 / 12.0 * k2[i] + 1.0 / 9.0 * k3[i] -
                                  1.0 / 8.0 * k4[i]);
            const double sc =
                opt.abs_tol + opt.rel_tol * std::max(std::abs(x[i]), std::abs(x3[i]));
            err += (e / sc) * (e / sc);
        }
        err = std::sqrt(err / d);
        if (!std::isfinite(err)) err = 1e10;
        if (err <= 1.0) {
            t += h;
            x = x3;
            k1 = k4; // FSAL
            const double fac = 0.9 * std::pow(std::max(err, 1e-10), -0.7 / 3.0) *
                               std::pow(err_prev, 0.4 / 3.0);
            h *= std::min(5.0, std::max(0.2, fac));
            err_prev = std::max(err, 1e-10);
        } else {
            h *= std::max(0.2, 0.9 * std::pow(err, -1.0 / 3.0));
        }
        if (opt.max_step > 0.0 && h > opt.max_step) h = opt.max_step;
        if (h < opt.min_step * std::max(1.0, std::abs(t)))
            throw StepSizeUnderflow("RK23 step size underflow at t=" + std::to_string(t));
    }
}

} // namespace detail

inline Trajectory integrate(const Dynamics& dyn, std::span<const double> x0, const TimeGrid& grid,
                            Integrator method, const Rk23Options& opt = {}) {
    if (static_cast<int>(x0.size()) != dyn.dim)
        throw Error("integrate: dimension mismatch");
    const int d = dyn.dim;
    Trajectory traj(grid.points(), std::vector<double>(d));
    std::vector<double> x(x0.begin(), x0.end());
    traj[0] = x;
    if (method == Integrator::ForwardEuler) {
        std::vector<double> f(d);
        for (int k = 1; k <= grid.steps; ++k) {
            dyn.rhs(x, f);
            for (int i = 0; i < d; ++i) x[i] += grid.dt * f[i];
            traj[k] = x;
        }
    } else {
        for (int k = 1; k <= grid.steps; ++k) {
            detail::rk23_segment(dyn, x, grid.time(k - 1), grid.time(k), opt);
            traj[k] = x;
        }
    }
    return traj;
}

// Population (1/N) per-state mean and std over all trajectories and steps.
inline std::pair<std::vector<double>, std::vector<double>> state_std(const TrajectoryDataset& data) {
    if (data.trajectories.empty()) throw Error("state_std: empty dataset");
    const int d = static_cast<int>(data.trajectories.front().front().size());
    std::size_t n = 0;
    std::vector<double> mu(d, 0.0), sigma(d, 0.0);
    for (const auto& traj : data.trajectories)
        for (const auto& x : traj) {
            for (int l = 0; l < d; ++l) mu[l] += x[l];
            ++n;
        }
    if (n < 2) throw Error("state_std: need at least 2 samples");
    for (int l = 0; l < d; ++l) mu[l] /= static_cast<double>(n);
    for (const auto& traj : data.trajectories)
        for (const auto& x : traj)
            for (int l = 0; l < d; ++l) sigma[l] += (x[l] - mu[l]) * (x[l] - mu[l]);
    for (int l = 0; l < d; ++l) {
        sigma[l] = std::sqrt(sigma[l] / static_cast<double>(n));
        if (sigma[l] == 0.0)
            throw DegenerateState("state " + std::to_string(l + 1) + " is constant");
    }
    return {sigma, mu};
}

inline TrajectoryDataset make_dataset(const TimeGrid& grid, std::vector<Trajectory> trajectories,
                                      double rho = 0.0) {
    TrajectoryDataset data;
    data.grid = grid;
    data.trajectories = std::move(trajectories);
    data.noise_level = rho;
    auto [sigma, mu] = state_std(data);
    data.sigma = std::move(sigma);
    data.mu = std::move(mu);
    return data;
}

// Perturbs each sample with independent Gaussian noise of per-state std
// rho*sigma_l. The draw is keyed by (seed, trajectory, time, state).
inline TrajectoryDataset add_noise(const TrajectoryDataset& data, double rho,
                                   std::uint64_t rng_seed) {
    if (rho < 0.0) throw Error("add_noise: rho must be >= 0");
    if (rho == 0.0) return data;
    TrajectoryDataset out = data;
    out.noise_level = rho;
    const int d = static_cast<int>(data.sigma.size());
    for (std::size_t i = 0; i < out.trajectories.size(); ++i)
        for (std::size_t k = 0; k < out.trajectories[i].size(); ++k)
            for (int l = 0; l < d; ++l)
                out.trajectories[i][k][l] +=
                    rho * data.sigma[l] * rng::normal(rng_seed, i, k, static_cast<std::uint64_t>(l));
    auto [sigma, mu] = state_std(out);
    out.sigma = std::move(sigma);
    out.mu = std::move(mu);
    return out;
}

// Artifact benchmark: damped oscillator in GENERIC form, state (q, p, S).
//   E = p^2/2 + q^2/2 + S,  S(x) = S
//   L = [[0,1,0],[-1,0,0],[0,0,0]],  M = zeta*[[0,0,0],[0,1,-p],[0,-p,p^2]]
// giving qdot = p, pdot = -q - zeta p, Sdot = zeta p^2.
struct GenericBenchmark {
    Dynamics dyn;
    double zeta = 0.0;
    std::function<double(std::span<const double>)> energy;
    std::function<double(std::span<const double>)> entropy;
    std::function<std::vector<double>(std::span<const double>)> l_matrix; // row-major d x d
    std::function<std::vector<double>(std::span<const double>)> m_matrix;
};

inline GenericBenchmark damped_oscillator_benchmark(double zeta) {
    if (zeta < 0.0) throw Error("damped_oscillator_benchmark: zeta must be >= 0");
    GenericBenchmark b;
    b.zeta = zeta;
    b.dyn.dim = 3;
    b.dyn.rhs = [zeta](std::span<const double> x, std::span<double> f) {
        const double q = x[0], p = x[1];
        f[0] = p;
        f[1] = -q - zeta * p;
        f[2] = zeta * p * p;
    };
    b.energy = [](std::span<const double> x) {
        return 0.5 * x[1] * x[1] + 0.5 * x[0] * x[0] + x[2];
    };
    b.entropy = [](std::span<const double> x) { return x[2]; };
    b.l_matrix = [](std::span<const double>) {
        return std::vector<double>{0, 1, 0, -1, 0, 0, 0, 0, 0};
    };
    b.m_matrix = [zeta](std::span<const double> x) {
        const double p = x[1];
        return std::vector<double>{0, 0, 0, 0, zeta, -zeta * p, 0, -zeta * p, zeta * p * p};
    };
    return b;
}

// Trajectory CSV: header t,x1,...,xd; 17 significant digits.
inline void write_trajectory_csv(const std::string& path, const TimeGrid& grid,
                                 const Trajectory& traj) {
    const int d = static_cast<int>(traj.front().size());
    std::vector<std::string> header{"t"};
    for (int l = 1; l <= d; ++l) header.push_back("x" + std::to_string(l));
    csv::Writer w(path, header);
    for (int k = 0; k < grid.points(); ++k) {
        std::vector<double> row{grid.time(k)};
        row.insert(row.end(), traj[k].begin(), traj[k].end());
        w.row(row);
    }
}

inline std::string trajectory_file_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "traj_%04d.csv", index);
    return buf;
}

inline Trajectory read_trajectory_csv(const std::string& path) {
    const csv::Table t = csv::read(path);
    const std::size_t d = t.header.size() - 1;
    Trajectory traj;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        std::vector<double> x(d);
        for (std::size_t l = 0; l < d; ++l) x[l] = t.num(r, l + 1);
        traj.push_back(std::move(x));
    }
    return traj;
}

} // namespace weakdyn
