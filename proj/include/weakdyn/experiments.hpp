#pragma once

// Experiment orchestration: evaluation metrics, affine calibration of learned
// scalars, key=value config files, run manifests, and the strong-vs-weak
// training comparison on the damped-oscillator benchmark.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "csv.hpp"
#include "errors.hpp"
#include "genericnet.hpp"
#include "train.hpp"
#include "trajectory.hpp"

namespace weakdyn {

// (1/(d N)) sum_i sum_j sqrt(sum_k (x_kj - xhat_kj)^2 / sum_k x_kj^2)
inline double rel_l2_error(const std::vector<Trajectory>& truth,
                           const std::vector<Trajectory>& pred) {
    if (truth.empty() || truth.size() != pred.size())
        throw Error("rel_l2_error: trajectory count mismatch");
    const int d = static_cast<int>(truth.front().front().size());
    double total = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i].size() != pred[i].size()) throw Error("rel_l2_error: length mismatch");
        for (int j = 0; j < d; ++j) {
            double num = 0.0, den = 0.0;
            for (std::size_t k = 0; k < truth[i].size(); ++k) {
                const double diff = truth[i][k][j] - pred[i][k][j];
                num += diff * diff;
                den += truth[i][k][j] * truth[i][k][j];
            }
            if (den == 0.0)
                throw ZeroReference("state " + std::to_string(j + 1) +
                                    " is identically zero in the reference");
            total += std::sqrt(num / den);
        }
    }
    return total / (d * static_cast<double>(truth.size()));
}

struct AffineFit {
    double a = 1.0;
    double b = 0.0;
    std::vector<double> calibrated;
};

// Least-squares a*learned + b ~= truth; with an anchor, b is fixed so the
// anchored sample matches exactly and a fits the rest.
inline AffineFit calibrate_affine(std::span<const double> learned, std::span<const double> truth,
                                  std::optional<std::size_t> anchor = std::nullopt) {
    const std::size_t n = learned.size();
    if (n < 2 || n != truth.size()) throw Error("calibrate_affine: need >= 2 matching samples");
    AffineFit fit;
    if (anchor) {
        const double ua = learned[*anchor], va = truth[*anchor];
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            num += (learned[i] - ua) * (truth[i] - va);
            den += (learned[i] - ua) * (learned[i] - ua);
        }
        if (den == 0.0) throw DegenerateFit("learned samples are constant");
        fit.a = num / den;
        fit.b = va - fit.a * ua;
    } else {
        double su = 0.0, st = 0.0, suu = 0.0, sut = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            su += learned[i];
            st += truth[i];
            suu += learned[i] * learned[i];
            sut += learned[i] * truth[i];
        }
        const double den = n * suu - su * su;
        if (den == 0.0) throw DegenerateFit("learned samples are constant");
        fit.a = (n * sut - su * st) / den;
        fit.b = (st - fit.a * su) / n;
    }
    for (std::size_t i = 0; i < n; ++i) fit.calibrated.push_back(fit.a * learned[i] + fit.b);
    return fit;
}

// ---------------------------------------------------------------------------
// Config files: `key = value` lines, '#' comments.

inline TrainConfig parse_train_config(std::istream& in) {
    TrainConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            if (line.find_first_not_of(" \t\r") != std::string::npos)
                throw Error("config line " + std::to_string(lineno) + ": expected key = value");
            continue;
        }
        auto trim = [](std::string s) {
            const std::size_t a = s.find_first_not_of(" \t\r");
            const std::size_t b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        try {
            if (key == "lr") cfg.lr = std::stod(val);
            else if (key == "decay_rate") cfg.decay_rate = std::stod(val);
            else if (key == "decay_steps") cfg.decay_steps = std::stoi(val);
            else if (key == "weight_decay") cfg.weight_decay = std::stod(val);
            else if (key == "rba.eta_star") cfg.rba.eta_star = std::stod(val);
            else if (key == "rba.gamma") cfg.rba.gamma = std::stod(val);
            else if (key == "loss") {
                if (val == "strong") cfg.loss = LossKind::Strong;
                else if (val == "weak") cfg.loss = LossKind::Weak;
                else throw Error("loss must be strong or weak");
            } else if (key == "testfn.ell") cfg.testfn_ell = std::stoi(val);
            else if (key == "testfn.p") cfg.testfn_p = std::stoi(val);
            else if (key == "testfn.s") cfg.testfn_s = std::stod(val);
            else if (key == "batch_size") cfg.batch_size = std::stoi(val);
            else if (key == "iters") cfg.iters = std::stoi(val);
            else if (key == "seed") cfg.seed = std::stoull(val);
            else throw Error("unknown key '" + key + "'");
        } catch (const std::invalid_argument&) {
            throw Error("config line " + std::to_string(lineno) + ": bad value for " + key);
        }
    }
    cfg.validate();
    return cfg;
}

inline TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open config file: " + path);
    return parse_train_config(in);
}

// ---------------------------------------------------------------------------
// Run manifest and parallelism cap.

inline int max_threads() {
    if (const char* env = std::getenv("WEAKDYN_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(0..n-1), at most max_threads() tasks at a time. Results must not
// depend on scheduling; all randomness is counter-based.
inline void parallel_for(int n, const std::function<void(int)>& fn) {
    const int workers = std::min(n, max_threads());
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (int i = w; i < n; i += workers) fn(i);
        });
    for (auto& t : pool) t.join();
}

inline void write_manifest(const std::string& dir, const nlohmann::json& spec_echo,
                           const std::vector<std::string>& outputs, double seconds) {
    nlohmann::json j;
    j["tool"] = "weakdyn";
    j["version"] = "0.1.0";
    j["spec"] = spec_echo;
    j["outputs"] = outputs;
    j["elapsed_seconds"] = seconds;
    std::ofstream out(dir + "/manifest.json");
    if (!out) throw Error("cannot write manifest in " + dir);
    out << j.dump(2) << "\n";
}

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

// ---------------------------------------------------------------------------
// Strong-vs-weak training comparison on the damped oscillator.

struct TrainCompareOptions {
    double zeta = 0.2;
    double rho = 0.10;       // relative noise level
    int n_traj = 20;
    int K = 200;
    double dt = 0.02;
    int n_test = 5;
    std::uint64_t seed = 0;
    GfinnArch arch{3, {16}, 0, 0, true}; // desk-scale preset
    TrainConfig strong_cfg;
    TrainConfig weak_cfg;

    TrainCompareOptions() {
        strong_cfg.loss = LossKind::Strong;
        strong_cfg.batch_size = 5;
        strong_cfg.iters = 2000;
        strong_cfg.lr = 4e-3;
        strong_cfg.decay_rate = 0.5;
        strong_cfg.decay_steps = 800;
        weak_cfg = strong_cfg;
        weak_cfg.loss = LossKind::Weak;
        weak_cfg.batch_size = 0;
        weak_cfg.nbar = 2;
        weak_cfg.testfn_ell = 20;
        weak_cfg.testfn_p = 2;
        weak_cfg.testfn_s = 0.5;
    }
};

struct TrainedComparison {
    double strong_error = 0.0;
    double weak_error = 0.0;
    DegeneracyReport strong_degeneracy;
    DegeneracyReport weak_degeneracy;
    TrainResult strong_history;
    TrainResult weak_history;
};

namespace detail {

inline std::vector<double> oscillator_ic(std::uint64_t seed, int i) {
    // Sampling box: q in [0.5, 1.5], p in [-0.5, 0.5], S = 0.
    return {rng::uniform(0.5, 1.5, seed, 0xA11, i), rng::uniform(-0.5, 0.5, seed, 0xA12, i),
            0.0};
}

inline std::vector<Trajectory> oscillator_truth(const GenericBenchmark& bench,
                                                const TimeGrid& grid, std::uint64_t seed,
                                                int count, int first_index) {
    std::vector<Trajectory> out;
    for (int i = 0; i < count; ++i)
        out.push_back(integrate(bench.dyn, oscillator_ic(seed, first_index + i), grid,
                                Integrator::RK23));
    return out;
}

// RK23 rollout of the learned field from the truth initial state; on solver
// failure the remaining points repeat the last state (finite, large error).
inline Trajectory rollout(const FieldModel& model, std::span<const double> x0,
                          const TimeGrid& grid) {
    const Dynamics dyn = model.dynamics();
    Trajectory traj(grid.points(), std::vector<double>(dyn.dim));
    std::vector<double> x(x0.begin(), x0.end());
    traj[0] = x;
    for (int k = 1; k <= grid.steps; ++k) {
        try {
            detail::rk23_segment(dyn, x, grid.time(k - 1), grid.time(k), Rk23Options{});
        } catch (const StepSizeUnderflow&) {
            for (int j = k; j <= grid.steps; ++j) traj[j] = x;
            return traj;
        }
        bool finite = true;
        for (double v : x) finite = finite && std::isfinite(v);
        if (!finite) {
            for (int j = k; j <= grid.steps; ++j) traj[j] = traj[k - 1];
            return traj;
        }
        traj[k] = x;
    }
    return traj;
}

} // namespace detail

inline TrainedComparison train_compare(const TrainCompareOptions& opt,
                                       GfinnModel* strong_out = nullptr,
                                       GfinnModel* weak_out = nullptr) {
    const GenericBenchmark bench = damped_oscillator_benchmark(opt.zeta);
    const TimeGrid grid{0.0, opt.dt, opt.K};
    TrajectoryDataset clean = make_dataset(
        grid, detail::oscillator_truth(bench, grid, opt.seed, opt.n_traj, 0));
    const TrajectoryDataset noisy = add_noise(clean, opt.rho, opt.seed ^ 0x6E015Eull);
    const WeightMatrix W = WeightMatrix::inverse_std(noisy.sigma);

    GfinnModel strong_model(opt.arch, opt.seed);
    GfinnModel weak_model(opt.arch, opt.seed); // identical initialization

    TrainConfig scfg = opt.strong_cfg, wcfg = opt.weak_cfg;
    scfg.seed = opt.seed;
    wcfg.seed = opt.seed;
    TrainedComparison cmp;
    std::exception_ptr err;
    parallel_for(2, [&](int which) {
        try {
            if (which == 0)
                cmp.strong_history = train(strong_model, noisy, scfg, W);
            else
                cmp.weak_history = train(weak_model, noisy, wcfg, W);
        } catch (...) {
            err = std::current_exception();
        }
    });
    if (err) std::rethrow_exception(err);

    const std::vector<Trajectory> test_truth =
        detail::oscillator_truth(bench, grid, opt.seed, opt.n_test, opt.n_traj);
    std::vector<Trajectory> strong_pred, weak_pred;
    std::vector<std::vector<double>> probe;
    for (const Trajectory& t : test_truth) {
        strong_pred.push_back(detail::rollout(strong_model, t.front(), grid));
        weak_pred.push_back(detail::rollout(weak_model, t.front(), grid));
        for (std::size_t k = 0; k < t.size(); k += 20) probe.push_back(t[k]);
    }
    cmp.strong_error = rel_l2_error(test_truth, strong_pred);
    cmp.weak_error = rel_l2_error(test_truth, weak_pred);
    cmp.strong_degeneracy = strong_model.degeneracy_report(probe);
    cmp.weak_degeneracy = weak_model.degeneracy_report(probe);
    if (strong_out) *strong_out = strong_model;
    if (weak_out) *weak_out = weak_model;
    return cmp;
}

} // namespace weakdyn
