#pragma once

// Closed-form 1D parameter estimators for xdot = lambda x, their error
// decompositions and limits, and the Monte-Carlo harness.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "kernels.hpp"
#include "rng.hpp"
#include "testfn.hpp"
#include "trajectory.hpp"

namespace weakdyn {

struct Scenario1D {
    double lambda = -2.0; // must be nonzero
    double x0 = 1.0;
    double T = 1.0;
    double dt = 1e-2;
    double sigma = 0.0;
    std::uint64_t seed = 0;

    int steps() const { return static_cast<int>(std::llround(T / dt)); }
};

struct EstimatorReport {
    double theta = 0.0;
    double error = 0.0;      // theta - lambda
    double truncation = 0.0; // E_{lambda,dt}
    double noise_part = 0.0; // (sigma/dt) G_K / |Y_K|^2
    double rel_error = 0.0;  // (theta - lambda)/lambda
};

// theta* = sum y_{i-1}(y_i - y_{i-1}) / (dt sum y_{i-1}^2)
inline double strong_estimator(std::span<const double> y, double dt) {
    if (y.size() < 2) throw DegenerateData("strong_estimator: need K >= 1");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 1; i < y.size(); ++i) {
        num += y[i - 1] * (y[i] - y[i - 1]);
        den += y[i - 1] * y[i - 1];
    }
    if (den == 0.0) throw DegenerateData("strong_estimator: zero denominator");
    return num / (dt * den);
}

// Full report with the exact error decomposition. `eps` is the standardized
// noise realization (y_k = x_k + sigma*eps_k); when empty, the noise part is
// taken as the remainder error - truncation.
inline EstimatorReport strong_report(std::span<const double> y, double dt, double lambda,
                                     double sigma, std::span<const double> eps = {}) {
    EstimatorReport rep;
    rep.theta = strong_estimator(y, dt);
    rep.error = rep.theta - lambda;
    rep.truncation = euler_truncation(lambda, dt);
    rep.rel_error = rep.error / lambda;
    if (!eps.empty() && sigma != 0.0) {
        const double growth = std::exp(lambda * dt);
        double g = 0.0, y2 = 0.0;
        for (std::size_t j = 0; j + 1 < y.size(); ++j) {
            g += y[j] * (eps[j + 1] - growth * eps[j]);
            y2 += y[j] * y[j];
        }
        rep.noise_part = sigma / dt * g / y2;
    } else {
        rep.noise_part = rep.error - rep.truncation;
    }
    return rep;
}

// theta* = -(sum y_i psi'_i)/(sum y_i psi_i), the exact quadratic minimizer.
inline double weak_estimator(std::span<const double> ytilde, std::span<const double> psi,
                             std::span<const double> dpsi) {
    if (ytilde.size() != psi.size() || psi.size() != dpsi.size())
        throw Error("weak_estimator: size mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < ytilde.size(); ++i) {
        num += ytilde[i] * dpsi[i];
        den += ytilde[i] * psi[i];
    }
    if (den == 0.0) throw DegenerateData("weak_estimator: zero denominator");
    return -num / den;
}

enum class StrongLimitVariant {
    AppendixConstant, // x0^2 (e^{2 lambda T} - 1)/(2 lambda T), supported by the proof
    TheoremConstant,  // x0^2 (e^{lambda T} - 1)/(2 lambda T), as printed in the statement
};

// Almost-sure limit of dt*(theta*_strong - lambda).
inline double strong_limit(double lambda, double sigma, double x0, double T,
                           StrongLimitVariant variant = StrongLimitVariant::AppendixConstant) {
    const double a = variant == StrongLimitVariant::AppendixConstant ? 2.0 * lambda * T
                                                                     : lambda * T;
    const double c = x0 * x0 * std::expm1(a) / (2.0 * lambda * T);
    return -sigma * sigma / (c + sigma * sigma);
}

// Validates the five exactness conditions on (psi, psi'); throws
// ConditionViolation naming the failures.
inline void validate_weak_conditions(double lambda, double h, std::span<const double> psi,
                                     std::span<const double> dpsi, double tol = 1e-8) {
    const int m = static_cast<int>(psi.size()) / 2;
    std::string failures;
    auto check = [&](int idx, double residual) {
        if (std::abs(residual) > tol)
            failures += " condition " + std::to_string(idx) + " off by " +
                        std::to_string(residual) + ";";
    };
    for (int i = 1; i <= m; ++i) {
        check(1, psi[m + i] - psi[m - i]);
        check(2, dpsi[m + i] + dpsi[m - i]);
    }
    double sum_psi = 0.0;
    for (double v : psi) sum_psi += v;
    check(3, dpsi[m]);
    check(3, sum_psi - 1.0);
    double c4 = 0.0, c5 = 0.0;
    for (int i = 1; i <= m; ++i) {
        c4 += 2.0 * i * h * dpsi[m + i];
        c5 += dpsi[m + i] * e_lambda(lambda, i * h) + psi[m + i] * e_lambda_prime(lambda, i * h);
    }
    check(4, c4 + 1.0);
    check(5, c5);
    if (!failures.empty()) throw ConditionViolation("weak test function:" + failures);
}

// Relative error of the weak estimator for a given standardized noise vector
// E (indices -m..m). The exact form carries sigma<E, Psi_{1,0}> in the
// denominator and reproduces the direct estimator identically; the
// linearized form drops it and is exactly linear in sigma.
inline double weak_error_formula(double lambda, double sigma, double x0,
                                 std::span<const double> psi, std::span<const double> dpsi,
                                 std::span<const double> E, double h, bool linearized = false) {
    validate_weak_conditions(lambda, h, psi, dpsi);
    const int n = static_cast<int>(psi.size());
    if (static_cast<int>(E.size()) != n) throw Error("weak_error_formula: noise size mismatch");
    const int m = n / 2;
    double num = 0.0, den_noise = 0.0;
    for (int i = 0; i < n; ++i) {
        num += E[i] * (psi[i] + dpsi[i] / lambda); // <E, Psi_{1,1/lambda}>
        den_noise += E[i] * psi[i];                // <E, Psi_{1,0}>
    }
    double s = 0.0;
    for (int i = 1; i <= m; ++i) s += psi[m + i] * e_lambda_prime(lambda, i * h);
    const double den0 = x0 * (1.0 + 2.0 / lambda * s);
    const double den = linearized ? den0 : den0 + sigma * den_noise;
    return sigma * (-num) / den;
}

// ---------------------------------------------------------------------------
// Monte-Carlo harness

struct McStats {
    double mean_error = 0.0;       // mean(theta - lambda)
    double mean_rel_error = 0.0;   // mean((theta - lambda)/lambda)
    double mean_abs_rel = 0.0;     // mean |rel error|
    double mean_dt_error = 0.0;    // mean dt*(theta - lambda)
    double frac_abs_rel_gt1 = 0.0; // fraction of runs with |rel error| > 1
    double scatter_std = 0.0;      // std of rel error across runs
};

namespace detail {

inline void finalize_stats(McStats& st, const std::vector<double>& rels, int runs) {
    st.mean_error /= runs;
    st.mean_rel_error /= runs;
    st.mean_abs_rel /= runs;
    st.mean_dt_error /= runs;
    st.frac_abs_rel_gt1 /= runs;
    double var = 0.0;
    for (double r : rels) var += (r - st.mean_rel_error) * (r - st.mean_rel_error);
    st.scatter_std = runs > 1 ? std::sqrt(var / (runs - 1)) : 0.0;
}

} // namespace detail

// Strong-form Monte-Carlo cell: K = T/dt samples per run, independent noise
// per run keyed by (seed, run, k).
inline McStats mc_strong(double lambda, double x0, double T, double dt, double sigma, int runs,
                         std::uint64_t seed, std::vector<double>* per_run_rel = nullptr) {
    const int K = static_cast<int>(std::llround(T / dt));
    McStats st;
    std::vector<double> y(K + 1);
    std::vector<double> rels;
    rels.reserve(runs);
    for (int r = 0; r < runs; ++r) {
        for (int k = 0; k <= K; ++k)
            y[k] = linear_solution(lambda, x0, k * dt) +
                   sigma * rng::normal(seed, static_cast<std::uint64_t>(r), k);
        const double theta = strong_estimator(y, dt);
        const double err = theta - lambda;
        st.mean_error += err;
        st.mean_dt_error += dt * err;
        const double rel = err / lambda;
        rels.push_back(rel);
        st.mean_rel_error += rel;
        st.mean_abs_rel += std::abs(rel);
        if (std::abs(rel) > 1.0) st.frac_abs_rel_gt1 += 1.0;
    }
    detail::finalize_stats(st, rels, runs);
    if (per_run_rel) *per_run_rel = std::move(rels);
    return st;
}

// Weak-form Monte-Carlo cell with the m = 1 analysis test function on a
// symmetric trapezoid of support length S.
inline McStats mc_weak(double lambda, double x0, double S, double sigma, int runs,
                       std::uint64_t seed, std::vector<double>* per_run_rel = nullptr) {
    const double h = S / 2.0;
    const SymmetricQuadrature quad = symmetric_trapezoid(0.0, 1, h);
    const Theorem44TestFunction tf = theorem44_testfn(lambda, S, quad);
    McStats st;
    std::vector<double> rels;
    rels.reserve(runs);
    std::vector<double> y(3);
    for (int r = 0; r < runs; ++r) {
        for (int i = -1; i <= 1; ++i)
            y[i + 1] = linear_solution(lambda, x0, i * h) +
                       sigma * rng::normal(seed, static_cast<std::uint64_t>(r),
                                           static_cast<std::uint64_t>(i + 1));
        const double theta = weak_estimator(y, tf.psi, tf.dpsi);
        const double err = theta - lambda;
        st.mean_error += err;
        const double rel = err / lambda;
        rels.push_back(rel);
        st.mean_rel_error += rel;
        st.mean_abs_rel += std::abs(rel);
        if (std::abs(rel) > 1.0) st.frac_abs_rel_gt1 += 1.0;
    }
    detail::finalize_stats(st, rels, runs);
    if (per_run_rel) *per_run_rel = std::move(rels);
    return st;
}

// ---------------------------------------------------------------------------
// Crossing step size

struct CrossingResult {
    double dt_star = 0.0;
    double error_at_star = 0.0; // theta*(dt_star) - lambda
};

// Continuous extension of the strong-form error curve in dt for a fixed noise
// stream indexed by absolute time index: quantities at integer K are linearly
// interpolated between neighboring 1/K gridpoints (T normalized to 1).
class StrongErrorCurve {
public:
    StrongErrorCurve(double lambda, double x0, double sigma, std::uint64_t seed, int max_K)
        : lambda_(lambda), x0_(x0), sigma_(sigma) {
        eps_.resize(max_K + 2);
        for (int j = 0; j < static_cast<int>(eps_.size()); ++j)
            eps_[j] = rng::normal(seed, static_cast<std::uint64_t>(j));
    }

    double operator()(double t) const {
        const int N = std::max(1, static_cast<int>(std::floor(1.0 / t)));
        const auto [y2a, ga] = at(N);
        const auto [y2b, gb] = at(N + 1);
        const double lo = 1.0 / (N + 1), hi = 1.0 / N;
        const double w = (hi - t) / (hi - lo);
        const double y2 = y2a + w * (y2b - y2a);
        const double g = ga + w * (gb - ga);
        return euler_truncation(lambda_, t) + sigma_ * g / (t * y2);
    }

private:
    std::pair<double, double> at(int K) const {
        if (auto it = memo_.find(K); it != memo_.end()) return it->second;
        const double h = 1.0 / K;
        const double growth = std::exp(lambda_ * h);
        double y2 = 0.0, g = 0.0;
        for (int j = 0; j < K; ++j) {
            const double y = x0_ * std::exp(lambda_ * j * h) + sigma_ * eps_[j];
            y2 += y * y;
            g += y * (eps_[j + 1] - growth * eps_[j]);
        }
        return memo_[K] = {y2, g};
    }

    double lambda_, x0_, sigma_;
    std::vector<double> eps_;
    mutable std::map<int, std::pair<double, double>> memo_;
};

inline std::optional<CrossingResult> find_crossing_dt(double lambda, double x0, double sigma,
                                                      std::uint64_t seed, double dt_lo,
                                                      double dt_hi, int scan_points = 240,
                                                      double tol = 1e-8) {
    const int max_K = static_cast<int>(std::floor(1.0 / dt_lo)) + 1;
    const StrongErrorCurve curve(lambda, x0, sigma, seed, max_K);
    double t_prev = dt_hi, e_prev = curve(dt_hi);
    for (int i = 1; i <= scan_points; ++i) {
        const double t = dt_hi * std::pow(dt_lo / dt_hi, static_cast<double>(i) / scan_points);
        const double e = curve(t);
        if (e_prev == 0.0) return CrossingResult{t_prev, e_prev};
        if ((e_prev > 0.0) != (e > 0.0)) {
            double a = t, b = t_prev, ea = e;
            for (int it = 0; it < 200; ++it) {
                const double m = 0.5 * (a + b);
                const double em = curve(m);
                if (std::abs(em) < tol) return CrossingResult{m, em};
                if ((em > 0.0) == (ea > 0.0)) {
                    a = m;
                    ea = em;
                } else {
                    b = m;
                }
            }
            return CrossingResult{0.5 * (a + b), curve(0.5 * (a + b))};
        }
        t_prev = t;
        e_prev = e;
    }
    return std::nullopt;
}

} // namespace weakdyn
