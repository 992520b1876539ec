#include <doctest.h>

#include <cmath>

#include "weakdyn/kernels.hpp"
#include <initializer_list>

#include "weakdyn/rng.hpp"

using namespace weakdyn;

TEST_CASE("counter-based draws are pure functions of their key") {
    CHECK(rng::normal(42, 1, 2, 3) == rng::normal(42, 1, 2, 3));
    CHECK(rng::normal(42, 1, 2, 3) != rng::normal(42, 1, 2, 4));
    CHECK(rng::normal(42, 1, 2, 3) != rng::normal(43, 1, 2, 3));
    CHECK(rng::uniform(0.0, 1.0, 7, 0) == rng::uniform(0.0, 1.0, 7, 0));
}

TEST_CASE("normal draws have approximately standard moments") {
    const int n = 20000;
    double mean = 0.0, var = 0.0;
    for (int i = 0; i < n; ++i) mean += rng::normal(123, i);
    mean /= n;
    for (int i = 0; i < n; ++i) {
        const double d = rng::normal(123, i) - mean;
        var += d * d;
    }
    var /= n - 1;
    CHECK(std::abs(mean) < 0.02);
    CHECK(std::abs(var - 1.0) < 0.03);
}

TEST_CASE("uniform draws stay inside their interval") {
    for (int i = 0; i < 1000; ++i) {
        const double u = rng::uniform(-2.0, 3.0, 99, i);
        CHECK(u >= -2.0);
        CHECK(u < 3.0);
    }
}

TEST_CASE("truncation kernels match high-precision reference values") {
    // Reference values computed with 50-digit arithmetic.
    CHECK(e_lambda(-2.0, 0.5) == doctest::Approx(-0.17520119364380146).epsilon(1e-14));
    CHECK(e_lambda_prime(-2.0, 0.5) == doctest::Approx(-1.0861612696304874).epsilon(1e-14));
    CHECK(e_lambda(1.0, 1.0) == doctest::Approx(0.17520119364380146).epsilon(1e-14));
}

TEST_CASE("kernel series fallbacks join the closed forms smoothly") {
    // Straddle the switch points: values on either side agree to full
    // precision because both branches are accurate there.
    for (double z : {0.9e-4, 1.1e-4}) {
        const double lambda = 1.0;
        const double direct = std::sinh(z) - z;
        CHECK(e_lambda(lambda, z) == doctest::Approx(direct).epsilon(1e-10));
    }
    CHECK(sinh_cosh_ratio_over_z(0.9e-3) ==
          doctest::Approx(sinh_cosh_ratio_over_z(1.1e-3)).epsilon(1e-6));
    CHECK(sinh_cosh_ratio_over_z(1e-9) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("euler truncation error: series oracle and scaling limit") {
    // E_{lambda,t} = sum_{k>=2} lambda^k t^{k-1} / k!  (explicit partial sum)
    const double lambda = -2.0, t = 1e-3;
    double series = 0.0;
    for (int k = 2; k <= 14; ++k) {
        double num = std::pow(lambda, k) * std::pow(t, k - 1);
        double den = 1.0;
        for (int j = 2; j <= k; ++j) den *= j;
        series += num / den;
    }
    CHECK(euler_truncation(lambda, t) == doctest::Approx(series).epsilon(1e-12));
    // E/t -> lambda^2/2 as t -> 0
    CHECK(euler_truncation(lambda, 1e-8) / 1e-8 ==
          doctest::Approx(lambda * lambda / 2.0).epsilon(1e-6));
    CHECK(euler_truncation(3.0, 0.1) > 0.0);
    CHECK(euler_truncation(-3.0, 0.1) > 0.0);
}

TEST_CASE("variance profile V(z)") {
    // V(1) from the definition with 50-digit arithmetic.
    CHECK(variance_V(1.0) == doctest::Approx(0.51089971427966096).epsilon(1e-13));
    CHECK(variance_V(1e-6) == doctest::Approx(0.5).epsilon(1e-6));
    // convergence to 1 is O(1/z): q = ratio/z, so V(50) = 0.98^2 + 0.5*0.02^2 exactly
    CHECK(variance_V(50.0) == doctest::Approx(0.9606).epsilon(1e-10));
    CHECK(variance_V(-50.0) == variance_V(50.0)); // even function
    CHECK(variance_V(1e7) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(variance_V(-1e7) == doctest::Approx(1.0).epsilon(1e-6));
    // no overflow past the sinh/cosh range
    CHECK(std::isfinite(variance_V(1e300)));
    for (int i = 0; i <= 10000; ++i) {
        const double z = -100.0 + 200.0 * i / 10000.0;
        const double v = variance_V(z);
        CHECK(v >= 0.5 - 1e-12);
        CHECK(v <= 1.0 + 1e-12);
    }
}
