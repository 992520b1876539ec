#pragma once

// Compactly supported polynomial bump test functions, their placement over a
// time grid, and the analysis-grade m=1 test function whose point values make
// the 1D weak estimator exact in the noiseless case.

#include <cmath>
#include <vector>

#include "errors.hpp"
#include "kernels.hpp"

namespace weakdyn {

// phi(t) = C (t-a)^p (b-t)^p on [a,b], zero outside; C normalizes the peak
// (at the midpoint) to 1.
struct BumpTestFunction {
    double a = 0.0;
    double b = 1.0;
    int p = 2;
    double C = 1.0;

    static BumpTestFunction make(double a, double b, int p) {
        if (!(a < b)) throw Error("bump: need a < b");
        if (p < 2) throw Error("bump: need p >= 2 for vanishing boundary derivative");
        BumpTestFunction tf;
        tf.a = a;
        tf.b = b;
        tf.p = p;
        tf.C = std::pow((b - a) / 2.0, -2.0 * p);
        return tf;
    }
};

// Returns (phi(t), phi'(t)); zero outside the support.
inline std::pair<double, double> bump_eval(const BumpTestFunction& tf, double t) {
    if (t <= tf.a || t >= tf.b) return {0.0, 0.0};
    const double u = t - tf.a, v = tf.b - t;
    const double up = std::pow(u, tf.p - 1), vp = std::pow(v, tf.p - 1);
    const double value = tf.C * up * u * vp * v;
    const double deriv = tf.C * tf.p * up * vp * (v - u);
    return {value, deriv};
}

struct PlacementPlan {
    int ell = 0;       // support width in grid points
    int p = 2;
    double s = 0.0;    // overlap parameter in [0, 1)
    int ell_overlap = 0;
    int J = 0;
    std::vector<std::pair<int, int>> supports; // inclusive (start, end) grid indices
};

inline PlacementPlan place_supports(int K, int ell, int p, double s) {
    if (ell < 2 || ell > K + 1) throw InvalidPlacement("support width out of range");
    if (s < 0.0 || s >= 1.0) throw InvalidPlacement("overlap parameter must be in [0,1)");
    if (p < 2) throw InvalidPlacement("polynomial degree must be >= 2");
    PlacementPlan plan;
    plan.ell = ell;
    plan.p = p;
    plan.s = s;
    plan.ell_overlap = static_cast<int>(
        std::floor(ell * (1.0 - std::sqrt(1.0 - std::pow(s, 1.0 / p)))));
    const int stride = ell - plan.ell_overlap;
    if (stride <= 0) throw InvalidPlacement("overlap >= support width");
    plan.J = 1 + (K + 1 - ell) / stride;
    for (int j = 0; j < plan.J; ++j)
        plan.supports.emplace_back(j * stride, j * stride + ell - 1);
    return plan;
}

// Symmetric quadrature rule {t* + i h, w_i}, i = -m..m, with sum w_i = S = 2mh.
struct SymmetricQuadrature {
    double t_star = 0.0;
    double h = 0.0;
    int m = 1;
    std::vector<double> weights; // index i+m

    double weight(int i) const { return weights[i + m]; }
    double support_length() const { return 2.0 * m * h; }
};

inline SymmetricQuadrature symmetric_trapezoid(double t_star, int m, double h) {
    if (m < 1 || h <= 0.0) throw Error("symmetric_trapezoid: need m >= 1, h > 0");
    SymmetricQuadrature q;
    q.t_star = t_star;
    q.h = h;
    q.m = m;
    q.weights.assign(2 * m + 1, h);
    q.weights.front() = 0.5 * h;
    q.weights.back() = 0.5 * h;
    return q;
}

// Discrete test-function values for m = 1 that satisfy all five exactness
// conditions of the weak-form error theorem:
//   phi_0 = (1/w0)[1 - 2 e_l(h)/(S e'_l(h))],  phi_1 = (1/w1) e_l(h)/(S e'_l(h)),
//   phi'_0 = 0,                                phi'_1 = -1/(w1 S),
// with phi_{-1} = phi_1 and phi'_{-1} = -phi'_1.
struct Theorem44TestFunction {
    double lambda = 0.0;
    double S = 0.0;
    double h = 0.0;
    std::vector<double> phi;    // index i+1, i = -1..1
    std::vector<double> dphi;
    std::vector<double> psi;    // psi_i  = w_i phi_i
    std::vector<double> dpsi;   // psi'_i = w_i phi'_i
};

inline Theorem44TestFunction theorem44_testfn(double lambda, double S,
                                              const SymmetricQuadrature& quad) {
    if (quad.m != 1) throw Error("theorem44_testfn: requires m = 1");
    if (std::abs(quad.h - S / 2.0) > 1e-12 * std::max(1.0, S))
        throw Error("theorem44_testfn: quadrature spacing must be h = S/2");
    const double h = quad.h;
    const double ep = e_lambda_prime(lambda, h);
    if (ep == 0.0) throw DegenerateTestFunction("e'_lambda(h) = 0 (lambda = 0)");
    const double e = e_lambda(lambda, h);
    const double w0 = quad.weight(0), w1 = quad.weight(1);

    Theorem44TestFunction tf;
    tf.lambda = lambda;
    tf.S = S;
    tf.h = h;
    const double ratio = e / (S * ep);
    const double phi0 = (1.0 - 2.0 * ratio) / w0;
    const double phi1 = ratio / w1;
    const double dphi1 = -1.0 / (w1 * S);
    tf.phi = {phi1, phi0, phi1};
    tf.dphi = {-dphi1, 0.0, dphi1};
    tf.psi = {quad.weight(-1) * phi1, w0 * phi0, w1 * phi1};
    tf.dpsi = {quad.weight(-1) * -dphi1, 0.0, w1 * dphi1};
    return tf;
}

} // namespace weakdyn
