#pragma once

// Scalar truncation kernels shared by the 1D estimator analysis and the
// analysis-grade test functions. Series fallbacks avoid the catastrophic
// cancellation of sinh(z)-z and cosh(z)-1 near z = 0.

#include <cmath>

namespace weakdyn {

// e_lambda(t) = sinh(lambda t) - lambda t
inline double e_lambda(double lambda, double t) {
    const double z = lambda * t;
    if (std::abs(z) < 1e-4) {
        const double z2 = z * z;
        return z * z2 * (1.0 / 6.0 + z2 * (1.0 / 120.0 + z2 / 5040.0));
    }
    return std::sinh(z) - z;
}

// e'_lambda(t) = lambda cosh(lambda t) - lambda
inline double e_lambda_prime(double lambda, double t) {
    const double z = lambda * t;
    if (std::abs(z) < 1e-4) {
        const double z2 = z * z;
        return lambda * z2 * (0.5 + z2 * (1.0 / 24.0 + z2 / 720.0));
    }
    return lambda * (std::cosh(z) - 1.0);
}

// Forward-Euler truncation error of the 1D linear estimator:
// E_{lambda,t} = (e^{lambda t} - 1)/t - lambda. Positive for all lambda != 0, t > 0.
inline double euler_truncation(double lambda, double t) {
    return std::expm1(lambda * t) / t - lambda;
}

// Core ratio (sinh z - z)/(cosh z - 1), scaled by 1/z; tends to 1/3 as z -> 0.
inline double sinh_cosh_ratio_over_z(double z) {
    if (std::abs(z) < 1e-3) {
        const double z2 = z * z;
        // (z/3)(1 + z^2/20 + ...)/(1 + z^2/12 + ...) expanded
        return (1.0 / 3.0) * (1.0 - z2 / 30.0 + z2 * z2 * (1.0 / 840.0));
    }
    const double az = std::abs(z);
    if (az > 30.0) {
        // factor out e^{|z|}/2 so sinh/cosh never overflow; the ratio is even in z
        const double em = std::exp(-az);
        return (1.0 - em * em - 2.0 * az * em) / (az * (1.0 + em * em - 2.0 * em));
    }
    return (std::sinh(z) - z) / (z * (std::cosh(z) - 1.0));
}

// Variance profile of the standardized weak-estimator noise functionals.
// Bounded in [0.5, 1]; V(0) := limit 0.5.
inline double variance_V(double z) {
    const double q = sinh_cosh_ratio_over_z(z);
    return (1.0 - q) * (1.0 - q) + 0.5 * q * q;
}

} // namespace weakdyn
