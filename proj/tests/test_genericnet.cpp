#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "weakdyn/genericnet.hpp"

using namespace weakdyn;

TEST_CASE("single linear layer: gradient is the weight vector") {
    // widths {3, 1}: params w0 w1 w2 b
    const std::vector<int> widths{3, 1};
    const std::vector<double> p{0.5, -1.0, 2.0, 0.25};
    const std::vector<double> x{1.0, 2.0, 3.0};
    const auto [v, g] = net_eval_grad(widths, p, x);
    CHECK(v == doctest::Approx(0.5 - 2.0 + 6.0 + 0.25));
    CHECK(g[0] == 0.5);
    CHECK(g[1] == -1.0);
    CHECK(g[2] == 2.0);
}

TEST_CASE("dense net input gradient matches central differences") {
    const std::vector<int> widths{3, 8, 8, 1};
    std::vector<double> p(detail::dense_param_count(widths));
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = rng::uniform(-0.7, 0.7, 21, i);
    const double h = 1e-5;
    for (int pt = 0; pt < 50; ++pt) {
        std::vector<double> x(3);
        for (int i = 0; i < 3; ++i) x[i] = rng::uniform(-2.0, 2.0, 22, pt, i);
        const auto [v, g] = net_eval_grad(widths, p, x);
        for (int i = 0; i < 3; ++i) {
            std::vector<double> xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            const double fd =
                (net_eval_grad(widths, p, xp).first - net_eval_grad(widths, p, xm).first) /
                (2 * h);
            CHECK(g[i] == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("parameter gradient of the input gradient (second order)") {
    // d(grad_x h)_0 / d theta_j via the tape vs finite differences.
    const std::vector<int> widths{2, 5, 1};
    const int n = detail::dense_param_count(widths);
    std::vector<double> p(n);
    for (int i = 0; i < n; ++i) p[i] = rng::uniform(-0.8, 0.8, 31, i);
    const std::vector<double> x{0.4, -1.1};

    ad::Tape t;
    std::vector<ad::Var> xv{t.input(x[0]), t.input(x[1])};
    std::vector<ad::Var> pv;
    for (int i = 0; i < n; ++i) pv.push_back(t.input(p[i]));
    const ad::Var y = detail::dense_tape(widths, pv, xv)[0];
    const ad::Var g0 = ad::gradient(y, xv)[0];
    const std::vector<double> adj = t.reverse(g0);

    const double h = 1e-5;
    for (int j = 0; j < n; ++j) {
        std::vector<double> pp = p, pm = p;
        pp[j] += h;
        pm[j] -= h;
        std::vector<double> gp, gm;
        detail::dense_apply(widths, pp, x, &gp);
        detail::dense_apply(widths, pm, x, &gm);
        const double fd = (gp[0] - gm[0]) / (2 * h);
        CHECK(adj[pv[j].index()] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("q_matrix: annihilation and simple 2D case") {
    SUBCASE("2D rotation generator") {
        // U = [[0,1],[0,0]] -> A = [[0,1],[-1,0]]; row = (A grad)^T = (b, -a)
        const std::vector<double> U{0, 1, 0, 0};
        const std::vector<double> g{3.0, 4.0};
        const std::vector<double> Q = q_matrix(U, 1, 2, g);
        CHECK(Q[0] == 4.0);
        CHECK(Q[1] == -3.0);
        CHECK(Q[0] * g[0] + Q[1] * g[1] == 0.0);
    }
    SUBCASE("random generators annihilate grad h") {
        for (int d = 2; d <= 6; ++d) {
            std::vector<double> U(static_cast<std::size_t>(d) * d * d);
            std::vector<double> g(d);
            for (std::size_t i = 0; i < U.size(); ++i) U[i] = rng::uniform(-1.0, 1.0, 41, d, i);
            for (int i = 0; i < d; ++i) g[i] = rng::uniform(-1.0, 1.0, 42, d, i);
            const std::vector<double> Q = q_matrix(U, d, d, g);
            for (int i = 0; i < d; ++i) {
                double dot = 0.0;
                for (int j = 0; j < d; ++j) dot += Q[static_cast<std::size_t>(i) * d + j] * g[j];
                CHECK(std::abs(dot) <= 1e-13);
            }
        }
    }
    SUBCASE("zero gradient gives zero matrix") {
        const std::vector<double> U{0.3, 1.0, -0.2, 0.8};
        const std::vector<double> Q = q_matrix(U, 1, 2, std::vector<double>{0.0, 0.0});
        CHECK(Q[0] == 0.0);
        CHECK(Q[1] == 0.0);
    }
}

TEST_CASE("structural properties of L and M at random points") {
    const GfinnArch arch{3, {8}, 0, 0, true};
    const GfinnModel model(arch, 77);
    for (int pt = 0; pt < 20; ++pt) {
        std::vector<double> x(3);
        for (int i = 0; i < 3; ++i) x[i] = rng::uniform(-2.0, 2.0, 51, pt, i);
        const std::vector<double> L = model.l_matrix(x), M = model.m_matrix(x);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                CHECK(std::abs(L[i * 3 + j] + L[j * 3 + i]) <= 1e-13);
                CHECK(std::abs(M[i * 3 + j] - M[j * 3 + i]) <= 1e-13);
            }
    }
    const std::vector<std::vector<double>> pts{{0.1, -0.5, 1.2}, {2.0, 0.0, -1.0}};
    const DegeneracyReport rep = model.degeneracy_report(pts);
    CHECK(rep.max_l_grad_s <= 1e-12);
    CHECK(rep.max_m_grad_e <= 1e-12);
    CHECK(rep.min_eig_m >= -1e-12);
}

TEST_CASE("compiled field agrees with the operator assembly") {
    const GfinnArch arch{4, {6}, 3, 2, true};
    GfinnModel model(arch, 13);
    for (int pt = 0; pt < 10; ++pt) {
        std::vector<double> x(4), f(4), ftape(4);
        for (int i = 0; i < 4; ++i) x[i] = rng::uniform(-1.5, 1.5, 52, pt, i);
        model.eval(x, f); // numeric matrix assembly
        model.forward_batch(x.data(), 1, ftape.data());
        const std::vector<double> L = model.l_matrix(x), M = model.m_matrix(x);
        const std::vector<double> gE = model.grad_energy(x), gS = model.grad_entropy(x);
        for (int i = 0; i < 4; ++i) {
            double ref = 0.0;
            for (int j = 0; j < 4; ++j) ref += L[i * 4 + j] * gE[j] + M[i * 4 + j] * gS[j];
            CHECK(f[i] == doctest::Approx(ref).epsilon(1e-11));
            CHECK(ftape[i] == doctest::Approx(ref).epsilon(1e-11));
        }
    }
}

TEST_CASE("parameter gradient of a squared field error vs finite differences") {
    const GfinnArch arch{3, {5}, 0, 0, true};
    GfinnModel model(arch, 3);
    const std::vector<double> x{0.5, -0.3, 0.8};
    const std::vector<double> target{0.1, 0.2, -0.1};
    auto objective = [&](std::span<const double> theta) {
        GfinnModel m2(arch, 3);
        m2.set_params(theta);
        std::vector<double> f(3);
        m2.eval(x, f);
        double s = 0.0;
        for (int i = 0; i < 3; ++i) s += (f[i] - target[i]) * (f[i] - target[i]);
        return s;
    };
    std::vector<double> f(3);
    model.forward_batch(x.data(), 1, f.data());
    std::vector<double> seeds(3), grad(model.param_count(), 0.0);
    for (int i = 0; i < 3; ++i) seeds[i] = 2.0 * (f[i] - target[i]);
    model.backward_batch(seeds.data(), grad.data());

    std::vector<double> theta(model.params().begin(), model.params().end());
    const double h = 1e-6;
    for (int rep = 0; rep < 20; ++rep) {
        const int j = static_cast<int>(rng::hash4(61, rep, 0, 0) % theta.size());
        std::vector<double> tp = theta, tm = theta;
        tp[j] += h;
        tm[j] -= h;
        const double fd = (objective(tp) - objective(tm)) / (2 * h);
        if (std::abs(fd) > 1e-10)
            CHECK(grad[j] == doctest::Approx(fd).epsilon(1e-5));
        else
            CHECK(std::abs(grad[j] - fd) < 1e-8);
    }
}

TEST_CASE("adding a constant to the energy output bias leaves the field unchanged") {
    const GfinnArch arch{3, {6}, 0, 0, true};
    GfinnModel model(arch, 8);
    const std::vector<double> x{0.2, 0.9, -0.4};
    std::vector<double> f0(3), f1(3);
    model.eval(x, f0);
    std::vector<double> theta(model.params().begin(), model.params().end());
    // The output bias of the energy net is the last parameter of its block;
    // the energy block starts at offset 0.
    const std::vector<int> widths = arch.scalar_widths();
    theta[detail::dense_param_count(widths) - 1] += 123.456;
    model.set_params(theta);
    model.eval(x, f1);
    for (int i = 0; i < 3; ++i) CHECK(f0[i] == f1[i]); // exact
}

TEST_CASE("checkpoint round trip is bit-exact") {
    const GfinnArch arch{3, {7, 5}, 2, 2, false};
    const GfinnModel model(arch, 99);
    const std::string path = "test_checkpoint.json";
    model.save(path);
    const GfinnModel back = GfinnModel::load(path);
    REQUIRE(back.param_count() == model.param_count());
    for (int i = 0; i < model.param_count(); ++i) CHECK(back.params()[i] == model.params()[i]);
    CHECK(back.arch().hidden == arch.hidden);
    CHECK(back.arch().state_dependent_bc == false);
    // identical fields
    const std::vector<double> x{0.3, -0.7, 1.1};
    std::vector<double> f1(3), f2(3);
    model.eval(x, f1);
    back.eval(x, f2);
    for (int i = 0; i < 3; ++i) CHECK(f1[i] == f2[i]);
    std::filesystem::remove(path);
}

TEST_CASE("thermodynamic behavior along integrated model dynamics") {
    const GfinnArch arch{3, {6}, 0, 0, true};
    const GfinnModel model(arch, 17);
    const TimeGrid grid{0.0, 0.1, 50};
    const std::vector<double> x0{0.4, -0.2, 0.6};
    const Trajectory traj = integrate(model.dynamics(), x0, grid, Integrator::RK23);
    const double E0 = model.energy(traj[0]);
    double prev_S = model.entropy(traj[0]);
    for (int k = 1; k <= 50; ++k) {
        CHECK(std::abs(model.energy(traj[k]) - E0) <= 1e-5 * (1.0 + std::abs(E0)));
        const double S = model.entropy(traj[k]);
        CHECK(S >= prev_S - 1e-8);
        prev_S = S;
    }
}
