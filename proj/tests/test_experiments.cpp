#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "weakdyn/experiments.hpp"

using namespace weakdyn;

TEST_CASE("relative l2 error") {
    const std::vector<Trajectory> truth{{{3.0}, {4.0}}};
    SUBCASE("identical prediction gives zero") {
        CHECK(rel_l2_error(truth, truth) == 0.0);
    }
    SUBCASE("doubling gives exactly one") {
        std::vector<Trajectory> pred{{{6.0}, {8.0}}};
        CHECK(rel_l2_error(truth, pred) == doctest::Approx(1.0));
    }
    SUBCASE("hand computation") {
        // truth = [3,4], pred = [3,0]: sqrt(16/25) = 0.8
        std::vector<Trajectory> pred{{{3.0}, {0.0}}};
        CHECK(rel_l2_error(truth, pred) == doctest::Approx(0.8));
    }
    SUBCASE("zero reference state is rejected") {
        const std::vector<Trajectory> zero{{{0.0}, {0.0}}};
        CHECK_THROWS_AS(rel_l2_error(zero, truth), ZeroReference);
    }
    SUBCASE("invariant under simultaneous trajectory permutation") {
        std::vector<Trajectory> t2{{{3.0}, {4.0}}, {{1.0}, {2.0}}};
        std::vector<Trajectory> p2{{{3.5}, {4.5}}, {{1.5}, {2.5}}};
        const double a = rel_l2_error(t2, p2);
        std::swap(t2[0], t2[1]);
        std::swap(p2[0], p2[1]);
        CHECK(rel_l2_error(t2, p2) == doctest::Approx(a).epsilon(1e-15));
    }
}

TEST_CASE("affine calibration") {
    const std::vector<double> truth{1.0, 2.0, 3.0, 5.0};
    SUBCASE("identity") {
        const AffineFit fit = calibrate_affine(truth, truth);
        CHECK(fit.a == doctest::Approx(1.0));
        CHECK(fit.b == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("inverts an affine map") {
        std::vector<double> learned;
        for (double t : truth) learned.push_back(2.0 * t + 3.0);
        const AffineFit fit = calibrate_affine(learned, truth);
        CHECK(fit.a == doctest::Approx(0.5));
        CHECK(fit.b == doctest::Approx(-1.5));
        for (std::size_t i = 0; i < truth.size(); ++i)
            CHECK(fit.calibrated[i] == doctest::Approx(truth[i]).epsilon(1e-12));
    }
    SUBCASE("anchored calibration matches the anchor exactly") {
        std::vector<double> learned{0.9, 2.2, 2.9, 5.3};
        const AffineFit fit = calibrate_affine(learned, truth, 0);
        CHECK(fit.calibrated[0] == truth[0]);
    }
    SUBCASE("constant learned samples are degenerate") {
        CHECK_THROWS_AS(calibrate_affine(std::vector<double>{1.0, 1.0, 1.0},
                                         std::vector<double>{1.0, 2.0, 3.0}),
                        DegenerateFit);
    }
}

TEST_CASE("training config parser") {
    SUBCASE("full file") {
        std::istringstream in(
            "# optimizer\n"
            "lr = 2e-3\n"
            "decay_rate = 0.5\n"
            "decay_steps = 100\n"
            "weight_decay = 1e-4\n"
            "rba.eta_star = 0.01\n"
            "rba.gamma = 0.999\n"
            "loss = weak\n"
            "testfn.ell = 25\n"
            "testfn.p = 3\n"
            "testfn.s = 0.4\n"
            "batch_size = 5\n"
            "iters = 1234\n"
            "seed = 42\n");
        const TrainConfig cfg = parse_train_config(in);
        CHECK(cfg.lr == 2e-3);
        CHECK(cfg.decay_rate == 0.5);
        CHECK(cfg.decay_steps == 100);
        CHECK(cfg.weight_decay == 1e-4);
        CHECK(cfg.rba.eta_star == 0.01);
        CHECK(cfg.rba.gamma == 0.999);
        CHECK(cfg.loss == LossKind::Weak);
        CHECK(cfg.testfn_ell == 25);
        CHECK(cfg.testfn_p == 3);
        CHECK(cfg.testfn_s == 0.4);
        CHECK(cfg.batch_size == 5);
        CHECK(cfg.iters == 1234);
        CHECK(cfg.seed == 42);
    }
    SUBCASE("unknown key is rejected") {
        std::istringstream in("learning_rate = 1e-3\n");
        CHECK_THROWS_AS(parse_train_config(in), Error);
    }
    SUBCASE("bad loss value is rejected") {
        std::istringstream in("loss = strongest\n");
        CHECK_THROWS_AS(parse_train_config(in), Error);
    }
    SUBCASE("invalid values fail validation") {
        std::istringstream in("lr = -1\n");
        CHECK_THROWS_AS(parse_train_config(in), Error);
    }
}

TEST_CASE("manifest records spec echo and outputs") {
    const std::string dir = "test_manifest_dir";
    std::filesystem::create_directories(dir);
    write_manifest(dir, nlohmann::json{{"kind", "demo"}, {"seed", 7}}, {"a.csv", "b.csv"},
                   1.25);
    std::ifstream in(dir + "/manifest.json");
    nlohmann::json j;
    in >> j;
    CHECK(j["spec"]["kind"] == "demo");
    CHECK(j["outputs"].size() == 2);
    CHECK(j["version"] == "0.1.0");
    std::filesystem::remove_all(dir);
}

TEST_CASE("thread cap honors WEAKDYN_THREADS") {
    setenv("WEAKDYN_THREADS", "3", 1);
    CHECK(max_threads() == 3);
    setenv("WEAKDYN_THREADS", "1", 1);
    CHECK(max_threads() == 1);
    unsetenv("WEAKDYN_THREADS");
    CHECK(max_threads() >= 1);
}

TEST_CASE("parallel_for covers every index exactly once") {
    setenv("WEAKDYN_THREADS", "4", 1);
    std::vector<int> hits(100, 0);
    parallel_for(100, [&](int i) { hits[i] += 1; });
    unsetenv("WEAKDYN_THREADS");
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
}
