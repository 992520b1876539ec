#include <doctest.h>

#include <cmath>

#include "weakdyn/testfn.hpp"
#include "weakdyn/weakform.hpp"

using namespace weakdyn;

TEST_CASE("bump test function: normalization and boundary behavior") {
    const BumpTestFunction tf = BumpTestFunction::make(0.0, 1.0, 2);
    CHECK(tf.C == doctest::Approx(16.0));
    CHECK(bump_eval(tf, 0.5).first == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(bump_eval(tf, 0.5).second == doctest::Approx(0.0));
    CHECK(bump_eval(tf, 0.25).first == doctest::Approx(0.5625).epsilon(1e-15));
    CHECK(bump_eval(tf, 0.0) == std::pair<double, double>{0.0, 0.0});
    CHECK(bump_eval(tf, 1.0) == std::pair<double, double>{0.0, 0.0});
    CHECK(bump_eval(tf, -0.5) == std::pair<double, double>{0.0, 0.0});

    // max over a dense scan is the midpoint value
    double mx = 0.0;
    for (int i = 0; i <= 10000; ++i)
        mx = std::max(mx, bump_eval(tf, i / 10000.0).first);
    CHECK(mx == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("bump derivative matches central finite differences") {
    const BumpTestFunction tf = BumpTestFunction::make(-1.0, 3.0, 5);
    const double h = 1e-6;
    for (int i = 1; i < 100; ++i) {
        const double t = -1.0 + 4.0 * i / 100.0;
        const double fd = (bump_eval(tf, t + h).first - bump_eval(tf, t - h).first) / (2 * h);
        CHECK(bump_eval(tf, t).second == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("support placement formulas") {
    SUBCASE("zero overlap parameter gives disjoint supports") {
        const PlacementPlan plan = place_supports(99, 10, 2, 0.0);
        CHECK(plan.ell_overlap == 0);
        CHECK(plan.J == 10);
        for (int j = 1; j < plan.J; ++j)
            CHECK(plan.supports[j].first == plan.supports[j - 1].second + 1);
    }
    SUBCASE("high-precision overlap oracle") {
        // floor(30*(1 - sqrt(1 - 0.9^(1/6)))) = 26
        const PlacementPlan plan = place_supports(200, 30, 6, 0.9);
        CHECK(plan.ell_overlap == 26);
    }
    SUBCASE("overlap is monotone non-decreasing in s") {
        int prev = -1;
        for (double s = 0.0; s < 1.0; s += 0.05) {
            const PlacementPlan plan = place_supports(200, 30, 4, s);
            CHECK(plan.ell_overlap >= prev);
            prev = plan.ell_overlap;
        }
    }
    SUBCASE("invalid parameters are rejected") {
        CHECK_THROWS_AS(place_supports(10, 1, 2, 0.0), InvalidPlacement);
        CHECK_THROWS_AS(place_supports(10, 12, 2, 0.0), InvalidPlacement);
        CHECK_THROWS_AS(place_supports(10, 5, 2, 1.0), InvalidPlacement);
        CHECK_THROWS_AS(place_supports(10, 5, 1, 0.0), InvalidPlacement);
    }
}

TEST_CASE("symmetric trapezoid quadrature") {
    const SymmetricQuadrature q = symmetric_trapezoid(0.0, 1, 0.5);
    CHECK(q.weight(-1) == doctest::Approx(0.25));
    CHECK(q.weight(0) == doctest::Approx(0.5));
    CHECK(q.weight(1) == doctest::Approx(0.25));
    CHECK(q.support_length() == doctest::Approx(1.0));
    const SymmetricQuadrature q2 = symmetric_trapezoid(2.0, 2, 1.0);
    double sum = 0.0;
    for (int i = -2; i <= 2; ++i) sum += q2.weight(i);
    CHECK(sum == doctest::Approx(4.0));
}

TEST_CASE("analysis test function satisfies the five exactness conditions") {
    for (double lambda : {-2.0, 1.0, 3.0})
        for (double S : {0.5, 1.0, 4.0}) {
            const SymmetricQuadrature q = symmetric_trapezoid(0.0, 1, S / 2.0);
            const Theorem44TestFunction tf = theorem44_testfn(lambda, S, q);
            CHECK(tf.dphi[1] == 0.0);
            // condition 3: sum psi = 1; condition 4: 2h psi'_1 * 1 = ... = -1
            CHECK(tf.psi[0] + tf.psi[1] + tf.psi[2] == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(2.0 * tf.h * tf.dpsi[2] == doctest::Approx(-1.0).epsilon(1e-12));
            // condition 5
            CHECK(tf.dpsi[2] * e_lambda(lambda, tf.h) + tf.psi[2] * e_lambda_prime(lambda, tf.h) ==
                  doctest::Approx(0.0).epsilon(1e-12));
        }
}

TEST_CASE("analysis test function reference value") {
    // lambda=-2, S=1: phi_1 = 4 e(0.5)/e'(0.5) = 0.64521245064613642
    const SymmetricQuadrature q = symmetric_trapezoid(0.0, 1, 0.5);
    const Theorem44TestFunction tf = theorem44_testfn(-2.0, 1.0, q);
    CHECK(tf.phi[2] == doctest::Approx(0.64521245064613642).epsilon(1e-13));
    CHECK_THROWS_AS(theorem44_testfn(0.0, 1.0, q), DegenerateTestFunction);
}

TEST_CASE("weighted norm and weights") {
    const WeightMatrix W{{4.0, 0.25}};
    CHECK(w_norm(std::vector<double>{1.0, 2.0}, W) == doctest::Approx(std::sqrt(5.0)));
    CHECK_THROWS_AS(WeightMatrix::inverse_std(std::vector<double>{1.0, 0.0}), DegenerateState);
    const WeightMatrix Wi = WeightMatrix::inverse_std(std::vector<double>{0.5, 4.0});
    CHECK(Wi.w[0] == doctest::Approx(2.0));
    CHECK(Wi.w[1] == doctest::Approx(0.25));
}

TEST_CASE("strong loss vanishes on self-consistent Euler data") {
    const double lambda = -1.5;
    const TimeGrid grid{0.0, 0.05, 40};
    const Dynamics dyn = linear_dynamics(lambda);
    const Trajectory traj =
        integrate(dyn, std::vector<double>{1.0}, grid, Integrator::ForwardEuler);
    const TrajectoryDataset data = make_dataset(grid, {traj});
    CHECK(strong_loss(dyn, data, WeightMatrix::identity(1), Integrator::ForwardEuler) ==
          doctest::Approx(0.0).epsilon(1e-28));
}

TEST_CASE("strong loss equals the hand-computed sum on a tiny case") {
    // one trajectory, K=2, d=1, Euler predictions from a zero field
    Dynamics zero;
    zero.dim = 1;
    zero.rhs = [](std::span<const double>, std::span<double> f) { f[0] = 0.0; };
    const TimeGrid grid{0.0, 0.1, 2};
    const TrajectoryDataset data = make_dataset(grid, {{{1.0}, {2.0}, {4.0}}});
    // residuals: (1-2)^2 + (2-4)^2 = 5; normalized by K=2, d=1, N=1
    CHECK(strong_loss(zero, data, WeightMatrix::identity(1), Integrator::ForwardEuler) ==
          doctest::Approx(2.5));
}

TEST_CASE("weak loss equals the brute-force triple sum") {
    const double lambda = -0.8;
    const TimeGrid grid{0.0, 0.02, 60};
    const Trajectory traj = integrate(linear_dynamics(lambda), std::vector<double>{1.2}, grid,
                                      Integrator::RK23);
    const PlacementPlan plan = place_supports(60, 14, 3, 0.4);
    const WeakSystem sys = assemble_weak(traj, grid, plan, 1);
    std::vector<double> F(sys.Q);
    for (int q = 0; q < sys.Q; ++q) F[q] = lambda * sys.y(0, q) * 1.01; // slightly wrong field
    const WeightMatrix W{{1.7}};
    const double loss = weak_loss(sys, F, W, 1);

    // brute force: for each test function, sum over quadrature points
    double brute = 0.0;
    for (int j = 0; j < sys.J; ++j) {
        const auto [g0, g1] = plan.supports[j];
        const BumpTestFunction tf = BumpTestFunction::make(g0 * grid.dt, g1 * grid.dt, plan.p);
        double r = 0.0;
        for (int q = 0; q < sys.Q; ++q) {
            const double t = (q + 1) * sys.h;
            const auto [v, dv] = bump_eval(tf, t);
            r += sys.h * dv * traj[q + 1][0] + sys.h * v * F[q];
        }
        brute += 1.7 * r * r;
    }
    brute /= sys.J * 1 * 1;
    CHECK(loss == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("weak system assembly with subsampling") {
    const TimeGrid grid{0.0, 0.01, 100};
    const Trajectory traj = integrate(linear_dynamics(-1.0), std::vector<double>{1.0}, grid,
                                      Integrator::RK23);
    const PlacementPlan plan = place_supports(50, 10, 2, 0.0);
    const WeakSystem sys = assemble_weak(traj, grid, plan, 2);
    CHECK(sys.Q == 49);
    CHECK(sys.h == doctest::Approx(0.02));
    CHECK(sys.y(0, 0) == traj[2][0]);
    CHECK(sys.y(0, 48) == traj[98][0]);
}

TEST_CASE("weak-form consistency: matching field leaves only quadrature error") {
    const double lambda = -1.0;
    const TimeGrid grid{0.0, 0.005, 400};
    const Trajectory traj = integrate(linear_dynamics(lambda), std::vector<double>{1.0}, grid,
                                      Integrator::RK23);
    const PlacementPlan plan = place_supports(400, 80, 4, 0.3);
    const auto res = consistency_residual(traj, traj, linear_dynamics(lambda), grid, plan, 1);
    for (const auto& r : res) CHECK(std::abs(r[0]) < 1e-6);
    // wrong field leaves an O(1)-scaled residual
    const auto bad = consistency_residual(traj, traj, linear_dynamics(2.0), grid, plan, 1);
    double mx = 0.0;
    for (const auto& r : bad) mx = std::max(mx, std::abs(r[0]));
    CHECK(mx > 1e-2);
}
