// weakdyn command-line front end.
//
// Subcommands:
//   gen-data        generate (optionally noisy) benchmark trajectory CSVs
//   estimate-strong Monte-Carlo sweep of the 1D strong-form estimator
//   estimate-weak   Monte-Carlo sweep of the 1D weak-form estimator
//   crossing        locate a step size where the strong error changes sign
//   train-compare   train one model with the strong loss and one with the
//                   weak loss on the same noisy dataset, report test errors
//   evaluate        evaluate a saved model checkpoint against trajectory data
//
// Exit codes: 0 success, 2 invalid arguments/config, 3 numerical failure.

#include <filesystem>
#include <iostream>
#include <mutex>

#include <CLI11.hpp>
#include <json.hpp>

#include "weakdyn/estimator1d.hpp"
#include "weakdyn/experiments.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalOpts {
    std::uint64_t seed = 0;
    std::string out = ".";
    std::string config;
};

std::vector<double> log_spaced(double lo, double hi, int count) {
    std::vector<double> v;
    for (int i = 0; i < count; ++i)
        v.push_back(count == 1 ? lo
                               : lo * std::pow(hi / lo, static_cast<double>(i) / (count - 1)));
    return v;
}

void write_error_record(const std::string& dir, const std::string& kind,
                        const std::string& message) {
    json j{{"error", message}, {"kind", kind}};
    std::cerr << j.dump() << "\n";
    std::error_code ec;
    fs::create_directories(dir, ec);
    std::ofstream out(dir + "/error.json");
    if (out) out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

int run_gen_data(const GlobalOpts& g, const std::string& system, double zeta, double lambda,
                 double x0, int n_traj, int K, double dt, double rho) {
    weakdyn::Stopwatch timer;
    const weakdyn::TimeGrid grid{0.0, dt, K};
    std::vector<weakdyn::Trajectory> trajs;
    if (system == "oscillator") {
        const weakdyn::GenericBenchmark bench = weakdyn::damped_oscillator_benchmark(zeta);
        trajs = weakdyn::detail::oscillator_truth(bench, grid, g.seed, n_traj, 0);
    } else {
        for (int i = 0; i < n_traj; ++i) {
            const double xi = x0 * weakdyn::rng::uniform(0.5, 1.5, g.seed, 0xD0, i);
            std::vector<double> ic{xi};
            trajs.push_back(weakdyn::integrate(weakdyn::linear_dynamics(lambda), ic, grid,
                                               weakdyn::Integrator::RK23));
        }
    }
    weakdyn::TrajectoryDataset data = weakdyn::make_dataset(grid, std::move(trajs));
    if (rho > 0.0) data = weakdyn::add_noise(data, rho, g.seed ^ 0x6E015Eull);

    std::vector<std::string> outputs;
    for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
        const std::string name = weakdyn::trajectory_file_name(static_cast<int>(i));
        weakdyn::write_trajectory_csv(g.out + "/" + name, grid, data.trajectories[i]);
        outputs.push_back(name);
    }
    weakdyn::write_manifest(g.out,
                            json{{"kind", "gen-data"},
                                 {"system", system},
                                 {"zeta", zeta},
                                 {"lambda", lambda},
                                 {"x0", x0},
                                 {"n_traj", n_traj},
                                 {"K", K},
                                 {"dt", dt},
                                 {"noise", rho},
                                 {"seed", g.seed}},
                            outputs, timer.seconds());
    return 0;
}

int run_estimate_strong(const GlobalOpts& g, double lambda, double x0, double T,
                        std::vector<double> sigmas, double dt_min, double dt_max, int dt_count,
                        int runs) {
    weakdyn::Stopwatch timer;
    const std::vector<double> dts = log_spaced(dt_min, dt_max, dt_count);
    struct Cell {
        double dt, sigma;
        std::vector<double> rel;
    };
    std::vector<Cell> cells;
    for (double dt : dts)
        for (double sigma : sigmas) cells.push_back({dt, sigma, {}});
    weakdyn::parallel_for(static_cast<int>(cells.size()), [&](int i) {
        weakdyn::mc_strong(lambda, x0, T, cells[i].dt, cells[i].sigma, runs,
                           weakdyn::rng::hash4(g.seed, 0xE57, i, 0), &cells[i].rel);
    });
    weakdyn::csv::Writer w(g.out + "/strong_rel_error.csv", {"dt", "sigma", "run", "rel_error"});
    for (const Cell& c : cells)
        for (int r = 0; r < runs; ++r)
            w.row({c.dt, c.sigma, static_cast<double>(r), c.rel[r]});
    weakdyn::write_manifest(g.out,
                            json{{"kind", "estimate-strong"},
                                 {"lambda", lambda},
                                 {"x0", x0},
                                 {"T", T},
                                 {"sigmas", sigmas},
                                 {"dts", dts},
                                 {"runs", runs},
                                 {"seed", g.seed}},
                            {"strong_rel_error.csv"}, timer.seconds());
    return 0;
}

int run_estimate_weak(const GlobalOpts& g, double lambda, double x0,
                      std::vector<double> sigmas, double S_min, double S_max, int S_count,
                      int runs, double compare_dt) {
    weakdyn::Stopwatch timer;
    const std::vector<double> Ss = log_spaced(S_min, S_max, S_count);
    struct Cell {
        double S, sigma;
        std::vector<double> rel;
    };
    std::vector<Cell> cells;
    for (double S : Ss)
        for (double sigma : sigmas) cells.push_back({S, sigma, {}});
    weakdyn::parallel_for(static_cast<int>(cells.size()), [&](int i) {
        weakdyn::mc_weak(lambda, x0, cells[i].S, cells[i].sigma, runs,
                         weakdyn::rng::hash4(g.seed, 0xEA4, i, 0), &cells[i].rel);
    });
    weakdyn::csv::Writer w(g.out + "/weak_rel_error.csv", {"S", "sigma", "run", "rel_error"});
    for (const Cell& c : cells)
        for (int r = 0; r < runs; ++r) w.row({c.S, c.sigma, static_cast<double>(r), c.rel[r]});

    // Strong vs weak on the same noise scale: T = 1, strong at dt =
    // compare_dt, weak with the m = 1 analysis test function at S = 1.
    weakdyn::csv::Writer wc(g.out + "/strong_vs_weak.csv", {"sigma", "form", "run", "rel_error"});
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
        std::vector<double> rs, rw;
        weakdyn::mc_strong(lambda, x0, 1.0, compare_dt, sigmas[si], runs,
                           weakdyn::rng::hash4(g.seed, 0xC0-1, si, 1), &rs);
        weakdyn::mc_weak(lambda, x0, 1.0, sigmas[si], runs,
                         weakdyn::rng::hash4(g.seed, 0xC0-1, si, 2), &rw);
        for (int r = 0; r < runs; ++r) {
            wc.row_raw({weakdyn::csv::format_double(sigmas[si]), "strong", std::to_string(r),
                        weakdyn::csv::format_double(rs[r])});
            wc.row_raw({weakdyn::csv::format_double(sigmas[si]), "weak", std::to_string(r),
                        weakdyn::csv::format_double(rw[r])});
        }
    }
    weakdyn::write_manifest(g.out,
                            json{{"kind", "estimate-weak"},
                                 {"lambda", lambda},
                                 {"x0", x0},
                                 {"sigmas", sigmas},
                                 {"S", Ss},
                                 {"runs", runs},
                                 {"compare_dt", compare_dt},
                                 {"compare_S", 1.0},
                                 {"seed", g.seed}},
                            {"weak_rel_error.csv", "strong_vs_weak.csv"}, timer.seconds());
    return 0;
}

int run_crossing(const GlobalOpts& g, double lambda, double x0, double sigma, double dt_min,
                 double dt_max, int streams, int scan) {
    weakdyn::Stopwatch timer;
    weakdyn::csv::Writer results(g.out + "/crossing_results.csv",
                                 {"stream", "dt_star", "error_at_star"});
    int found = 0;
    int curve_stream = -1;
    for (int s = 0; s < streams; ++s) {
        const std::uint64_t seed = weakdyn::rng::hash4(g.seed, 0xC405, s, 0);
        const auto res = weakdyn::find_crossing_dt(lambda, x0, sigma, seed, dt_min, dt_max, scan);
        if (res) {
            ++found;
            if (curve_stream < 0) curve_stream = s;
            results.row({static_cast<double>(s), res->dt_star, res->error_at_star});
        }
    }
    // Error-vs-dt curve for the first stream that crossed (or stream 0).
    const int cs = curve_stream >= 0 ? curve_stream : 0;
    const std::uint64_t cseed = weakdyn::rng::hash4(g.seed, 0xC405, cs, 0);
    const weakdyn::StrongErrorCurve curve(lambda, x0, sigma, cseed,
                                          static_cast<int>(std::floor(1.0 / dt_min)) + 1);
    weakdyn::csv::Writer cw(g.out + "/crossing_curve.csv", {"dt", "abs_error_times_dt", "sign"});
    for (double dt : log_spaced(dt_min, dt_max, scan)) {
        const double e = curve(dt);
        cw.row({dt, std::abs(dt * e), e >= 0.0 ? 1.0 : -1.0});
    }
    weakdyn::write_manifest(g.out,
                            json{{"kind", "crossing"},
                                 {"lambda", lambda},
                                 {"x0", x0},
                                 {"sigma", sigma},
                                 {"dt_range", {dt_min, dt_max}},
                                 {"streams", streams},
                                 {"found", found},
                                 {"curve_stream", cs},
                                 {"seed", g.seed}},
                            {"crossing_results.csv", "crossing_curve.csv"}, timer.seconds());
    return found > 0 ? 0 : 3;
}

int run_train_compare(const GlobalOpts& g, double rho, double zeta, int n_traj, int K, double dt,
                      int iters) {
    weakdyn::Stopwatch timer;
    weakdyn::TrainCompareOptions opt;
    opt.rho = rho;
    opt.zeta = zeta;
    opt.n_traj = n_traj;
    opt.K = K;
    opt.dt = dt;
    opt.seed = g.seed;
    if (!g.config.empty()) {
        // The config supplies optimizer settings; the loss kind is set per run.
        const weakdyn::TrainConfig base = weakdyn::load_train_config(g.config);
        opt.strong_cfg = base;
        opt.strong_cfg.loss = weakdyn::LossKind::Strong;
        opt.weak_cfg = base;
        opt.weak_cfg.loss = weakdyn::LossKind::Weak;
        opt.weak_cfg.batch_size = 0;
        opt.weak_cfg.nbar = 2;
    }
    if (iters > 0) {
        opt.strong_cfg.iters = iters;
        opt.weak_cfg.iters = iters;
    }
    weakdyn::GfinnModel strong_model(opt.arch, opt.seed), weak_model(opt.arch, opt.seed);
    const weakdyn::TrainedComparison cmp =
        weakdyn::train_compare(opt, &strong_model, &weak_model);

    weakdyn::csv::Writer w(g.out + "/compare.csv",
                           {"model", "rel_l2_error", "max_l_grad_s", "max_m_grad_e",
                            "max_l_sym", "max_m_asym", "min_eig_m"});
    auto emit = [&](const char* name, double err, const weakdyn::DegeneracyReport& r) {
        w.row_raw({name, weakdyn::csv::format_double(err),
                   weakdyn::csv::format_double(r.max_l_grad_s),
                   weakdyn::csv::format_double(r.max_m_grad_e),
                   weakdyn::csv::format_double(r.max_l_sym),
                   weakdyn::csv::format_double(r.max_m_asym),
                   weakdyn::csv::format_double(r.min_eig_m)});
    };
    emit("strong", cmp.strong_error, cmp.strong_degeneracy);
    emit("weak", cmp.weak_error, cmp.weak_degeneracy);
    weakdyn::write_history_csv(g.out + "/history_strong.csv", cmp.strong_history.history, 3);
    weakdyn::write_history_csv(g.out + "/history_weak.csv", cmp.weak_history.history, 3);
    strong_model.save(g.out + "/model_strong.json");
    weak_model.save(g.out + "/model_weak.json");

    // Calibrated energy/entropy along one held-out trajectory.
    const weakdyn::GenericBenchmark bench = weakdyn::damped_oscillator_benchmark(zeta);
    const weakdyn::TimeGrid grid{0.0, dt, K};
    const weakdyn::Trajectory test =
        weakdyn::detail::oscillator_truth(bench, grid, opt.seed, 1, opt.n_traj).front();
    std::vector<double> e_true, s_true, e_strong, s_strong, e_weak, s_weak;
    for (const auto& x : test) {
        e_true.push_back(bench.energy(x));
        s_true.push_back(bench.entropy(x));
        e_strong.push_back(strong_model.energy(x));
        s_strong.push_back(strong_model.entropy(x));
        e_weak.push_back(weak_model.energy(x));
        s_weak.push_back(weak_model.entropy(x));
    }
    const auto ce_s = weakdyn::calibrate_affine(e_strong, e_true);
    const auto cs_s = weakdyn::calibrate_affine(s_strong, s_true);
    const auto ce_w = weakdyn::calibrate_affine(e_weak, e_true);
    const auto cs_w = weakdyn::calibrate_affine(s_weak, s_true);
    weakdyn::csv::Writer cw(g.out + "/calibrated.csv",
                            {"t", "E_true", "E_strong", "E_weak", "S_true", "S_strong",
                             "S_weak"});
    for (int k = 0; k < grid.points(); ++k)
        cw.row({grid.time(k), e_true[k], ce_s.calibrated[k], ce_w.calibrated[k], s_true[k],
                cs_s.calibrated[k], cs_w.calibrated[k]});

    weakdyn::write_manifest(
        g.out,
        json{{"kind", "train-compare"},
             {"noise", rho},
             {"zeta", zeta},
             {"n_traj", n_traj},
             {"K", K},
             {"dt", dt},
             {"iters", opt.strong_cfg.iters},
             {"seed", g.seed},
             {"strong_rel_l2_error", cmp.strong_error},
             {"weak_rel_l2_error", cmp.weak_error}},
        {"compare.csv", "history_strong.csv", "history_weak.csv", "model_strong.json",
         "model_weak.json", "calibrated.csv"},
        timer.seconds());
    return 0;
}

int run_evaluate(const GlobalOpts& g, const std::string& model_path,
                 const std::string& data_dir) {
    weakdyn::Stopwatch timer;
    weakdyn::GfinnModel model = weakdyn::GfinnModel::load(model_path);
    std::vector<weakdyn::Trajectory> truth;
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(data_dir)) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("traj_", 0) == 0 && entry.path().extension() == ".csv")
            files.push_back(entry.path().string());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw weakdyn::Error("no traj_*.csv files in " + data_dir);
    for (const std::string& f : files) truth.push_back(weakdyn::read_trajectory_csv(f));
    const weakdyn::csv::Table t0 = weakdyn::csv::read(files.front());
    const weakdyn::TimeGrid grid{t0.num(0, 0), t0.num(1, 0) - t0.num(0, 0),
                                 static_cast<int>(t0.rows.size()) - 1};

    std::vector<weakdyn::Trajectory> pred;
    std::vector<std::vector<double>> probe;
    for (const auto& traj : truth) {
        pred.push_back(weakdyn::detail::rollout(model, traj.front(), grid));
        for (std::size_t k = 0; k < traj.size(); k += 20) probe.push_back(traj[k]);
    }
    const double err = weakdyn::rel_l2_error(truth, pred);
    const weakdyn::DegeneracyReport rep = model.degeneracy_report(probe);
    weakdyn::csv::Writer w(g.out + "/evaluation.csv",
                           {"rel_l2_error", "max_l_grad_s", "max_m_grad_e", "max_l_sym",
                            "max_m_asym", "min_eig_m"});
    w.row({err, rep.max_l_grad_s, rep.max_m_grad_e, rep.max_l_sym, rep.max_m_asym,
           rep.min_eig_m});
    weakdyn::write_manifest(g.out,
                            json{{"kind", "evaluate"},
                                 {"model", model_path},
                                 {"data", data_dir},
                                 {"trajectories", files.size()},
                                 {"rel_l2_error", err},
                                 {"seed", g.seed}},
                            {"evaluation.csv"}, timer.seconds());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"weakdyn: weak-form dynamical-system identification toolkit"};
    app.require_subcommand(1);
    GlobalOpts g;
    app.fallthrough(); // allow --seed/--out/--config after the subcommand
    app.add_option("--seed", g.seed, "master seed");
    app.add_option("--out", g.out, "output directory");
    app.add_option("--config", g.config, "training config file (key = value)");

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate benchmark trajectory CSVs");
    std::string system = "oscillator";
    double zeta = 0.2, lambda = -2.0, x0 = 1.0, dt = 0.02, rho = 0.0;
    int n_traj = 20, K = 200;
    gen->add_option("--system", system, "oscillator | linear")
        ->check(CLI::IsMember({"oscillator", "linear"}));
    gen->add_option("--zeta", zeta, "oscillator damping");
    gen->add_option("--lambda", lambda, "linear-system rate");
    gen->add_option("--x0", x0, "linear-system initial scale");
    gen->add_option("--n-traj", n_traj, "number of trajectories");
    gen->add_option("--K", K, "steps per trajectory");
    gen->add_option("--dt", dt, "step size");
    gen->add_option("--noise", rho, "relative noise level rho");

    // estimate-strong
    auto* es = app.add_subcommand("estimate-strong", "strong-form estimator Monte-Carlo sweep");
    double es_lambda = -2.0, es_x0 = 1.0, es_T = 1.0, es_dt_min = 1e-4, es_dt_max = 1e-1;
    int es_dt_count = 13, es_runs = 1000;
    std::vector<double> es_sigmas{1e-3, 1e-2, 1e-1};
    es->add_option("--lambda", es_lambda, "true rate");
    es->add_option("--x0", es_x0, "initial condition");
    es->add_option("--T", es_T, "horizon");
    es->add_option("--sigmas", es_sigmas, "noise levels")->delimiter(',');
    es->add_option("--dt-min", es_dt_min, "smallest step size");
    es->add_option("--dt-max", es_dt_max, "largest step size");
    es->add_option("--dt-count", es_dt_count, "log-spaced step-size count");
    es->add_option("--runs", es_runs, "Monte-Carlo runs per cell");

    // estimate-weak
    auto* ew = app.add_subcommand("estimate-weak", "weak-form estimator Monte-Carlo sweep");
    double ew_lambda = -2.0, ew_x0 = 1.0, ew_S_min = 0.25, ew_S_max = 8.0, ew_cmp_dt = 0.01;
    int ew_S_count = 6, ew_runs = 1000;
    std::vector<double> ew_sigmas{1e-2};
    ew->add_option("--lambda", ew_lambda, "true rate");
    ew->add_option("--x0", ew_x0, "state scale at the test-function center");
    ew->add_option("--sigmas", ew_sigmas, "noise levels")->delimiter(',');
    ew->add_option("--S-min", ew_S_min, "smallest support length");
    ew->add_option("--S-max", ew_S_max, "largest support length");
    ew->add_option("--S-count", ew_S_count, "log-spaced support count");
    ew->add_option("--runs", ew_runs, "Monte-Carlo runs per cell");
    ew->add_option("--compare-dt", ew_cmp_dt, "step size for the strong-vs-weak comparison");

    // crossing
    auto* cr = app.add_subcommand("crossing", "find a sign change of the strong error in dt");
    double cr_lambda = -2.0, cr_x0 = 1.0, cr_sigma = 1e-2, cr_dt_min = 1e-4, cr_dt_max = 1e-1;
    int cr_streams = 100, cr_scan = 240;
    cr->add_option("--lambda", cr_lambda, "true rate");
    cr->add_option("--x0", cr_x0, "initial condition");
    cr->add_option("--sigma", cr_sigma, "noise level");
    cr->add_option("--dt-min", cr_dt_min, "lower bracket");
    cr->add_option("--dt-max", cr_dt_max, "upper bracket");
    cr->add_option("--streams", cr_streams, "independent noise streams");
    cr->add_option("--scan", cr_scan, "scan points per stream");

    // train-compare
    auto* tc = app.add_subcommand("train-compare", "strong vs weak training comparison");
    double tc_rho = 0.10, tc_zeta = 0.2, tc_dt = 0.02;
    int tc_n_traj = 20, tc_K = 200, tc_iters = 0;
    tc->add_option("--noise", tc_rho, "relative noise level rho");
    tc->add_option("--zeta", tc_zeta, "oscillator damping");
    tc->add_option("--n-traj", tc_n_traj, "training trajectories");
    tc->add_option("--K", tc_K, "steps per trajectory");
    tc->add_option("--dt", tc_dt, "step size");
    tc->add_option("--iters", tc_iters, "iteration budget (0 = preset)");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "evaluate a checkpoint against trajectory data");
    std::string ev_model, ev_data;
    ev->add_option("--model", ev_model, "checkpoint file")->required();
    ev->add_option("--data", ev_data, "directory of traj_*.csv files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (!g.config.empty()) {
        try {
            weakdyn::load_train_config(g.config);
        } catch (const weakdyn::Error& e) {
            write_error_record(g.out, "spec", e.what());
            return 2;
        }
    }

    try {
        std::error_code ec;
        fs::create_directories(g.out, ec);
        if (gen->parsed())
            return run_gen_data(g, system, zeta, lambda, x0, n_traj, K, dt, rho);
        if (es->parsed())
            return run_estimate_strong(g, es_lambda, es_x0, es_T, es_sigmas, es_dt_min,
                                       es_dt_max, es_dt_count, es_runs);
        if (ew->parsed())
            return run_estimate_weak(g, ew_lambda, ew_x0, ew_sigmas, ew_S_min, ew_S_max,
                                     ew_S_count, ew_runs, ew_cmp_dt);
        if (cr->parsed())
            return run_crossing(g, cr_lambda, cr_x0, cr_sigma, cr_dt_min, cr_dt_max,
                                cr_streams, cr_scan);
        if (tc->parsed())
            return run_train_compare(g, tc_rho, tc_zeta, tc_n_traj, tc_K, tc_dt, tc_iters);
        if (ev->parsed()) return run_evaluate(g, ev_model, ev_data);
        return 2;
    } catch (const weakdyn::Error& e) {
        write_error_record(g.out, "numerical", e.what());
        return 3;
    } catch (const std::exception& e) {
        write_error_record(g.out, "internal", e.what());
        return 3;
    }
}
