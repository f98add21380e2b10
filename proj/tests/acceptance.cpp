// Acceptance gate: eleven end-to-end checks, one printed line each, nonzero
// exit if any fails.  Every tolerance is pinned in code next to its check.
// Monte Carlo checks run at the full stated sizes, so this binary takes a
// few minutes; worker count follows $LEVYSIM_WORKERS (results do not depend
// on it, and criterion 10 verifies exactly that through the CLI).

#include <levysim/config.hpp>
#include <levysim/io.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

using namespace levysim;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool pass, const std::string& what) {
    std::printf("criterion %2d [%s] %s\n", id, pass ? "PASS" : "FAIL", what.c_str());
    std::fflush(stdout);
    if (!pass) ++failures;
}

double now_seconds() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

int workers() { return ExperimentConfig{}.resolved_workers(); }

MomentReport run_ens(const std::string& model, SchemeKind scheme, double T, long n, long N,
                     std::uint64_t seed,
                     std::optional<std::pair<double, double>> window = std::nullopt) {
    EnsembleConfig ec;
    ec.model = make_builtin_model(model);
    ec.scheme = scheme;
    ec.T = T;
    ec.n = n;
    ec.N_paths = N;
    ec.master_seed = seed;
    ec.window = window;
    ec.workers = workers();
    return run_ensemble(ec);
}

double stat_of(const std::vector<MomentStat>& stats, double p) {
    for (const auto& s : stats)
        if (s.exponent == p) return s.value;
    return std::numeric_limits<double>::quiet_NaN();
}

double wstat_of(const std::vector<WindowStat>& stats, double p) {
    for (const auto& s : stats)
        if (s.exponent == p) return s.value;
    return std::numeric_limits<double>::quiet_NaN();
}

// --- criterion 1: stationary moments against the closed forms ---------------

void criterion_1() {
    const double t0 = now_seconds();
    const double root23 = std::sqrt(2.0 / 3.0);
    const double cases[5][2] = {{0.5, root23},
                                {1.0, 4.0 * std::sqrt(3.0) / 9.0},
                                {1.5, root23},
                                {2.0, 1.0},
                                {2.5, 2.0 * root23}};
    double worst = 0;
    for (const auto& c : cases)
        worst = std::max(worst, std::abs(stationary_moment(c[0]) - c[1]));
    const double dt = now_seconds() - t0;
    report(1, worst < 1e-6 && dt < 1.0,
           "stationary moments match the closed forms (worst |dev| " + format_double(worst) +
               " < 1e-6, " + format_double(dt) + "s < 1s)");
}

// --- criterion 2: truncated moments at the four splitting bounds ------------

void criterion_2() {
    const double t0 = now_seconds();
    const double hs[4] = {1e-2, 1e-3, 1e-4, 1e-5};
    const double printed[4][5] = {
        {0.815, 0.763, 0.794, 0.909, 1.152},
        {0.816, 0.769, 0.812, 0.972, 1.364},
        {0.816, 0.770, 0.816, 0.991, 1.482},
        {0.816, 0.770, 0.816, 0.997, 1.548},
    };
    const double ps[5] = {0.5, 1.0, 1.5, 2.0, 2.5};
    double worst = 0;
    for (int i = 0; i < 4; ++i) {
        const double K = 1.0 / std::sqrt(2.0 * hs[i]);
        for (int j = 0; j < 5; ++j)
            worst = std::max(worst, std::abs(stationary_moment(ps[j], K) - printed[i][j]));
    }
    const double dt = now_seconds() - t0;
    report(2, worst <= 0.002 && dt < 1.0,
           "truncated moments at K = 1/sqrt(2h) match the benchmark values (worst |dev| " +
               format_double(worst) + " <= 0.002, " + format_double(dt) + "s < 1s)");
}

// --- criterion 3: splitting terminal moments at h = 1e-3, N = 1e5 -----------

void criterion_3() {
    const MomentReport rep =
        run_ens("cauchy_cubic", SchemeKind::Splitting, 5.0, 5000, 100000, 2026);
    const double v05 = stat_of(rep.terminal, 0.5);
    const double v10 = stat_of(rep.terminal, 1.0);
    const double v15 = stat_of(rep.terminal, 1.5);
    const double v25 = stat_of(rep.terminal, 2.5);
    // the p = 2.5 band is centered on the truncated stationary value at
    // K = 1/sqrt(2e-3), not on the full moment 1.633: the splitting scheme
    // carries an O(h^{(3-p)/2}) systematic truncation error at this order
    const bool pass = std::abs(v05 - 0.816) <= 0.02 && std::abs(v10 - 0.768) <= 0.03 &&
                      std::abs(v15 - 0.811) <= 0.08 && std::abs(v25 - 1.364) <= 0.15;
    report(3, pass,
           "splitting terminal moments, h=1e-3 N=1e5: |X|^0.5 " + format_double(v05) +
               " (0.816+-0.02), |X| " + format_double(v10) + " (0.768+-0.03), |X|^1.5 " +
               format_double(v15) + " (0.811+-0.08), |X|^2.5 " + format_double(v25) +
               " (1.364+-0.15)");
}

// --- criterion 4: explicit Euler NaN census ---------------------------------

void criterion_4() {
    const MomentReport rep =
        run_ens("cauchy_cubic", SchemeKind::ExplicitEuler, 5.0, 500, 10000, 2026);
    const bool pass = rep.nan_fraction >= 0.15 && rep.nan_fraction <= 0.25;
    report(4, pass,
           "explicit Euler at h=1e-2 loses a fifth of its paths (nan fraction " +
               format_double(rep.nan_fraction) + " in [0.15, 0.25])");
}

// --- criterion 5: tamed blow-up vs splitting stability at h = 1e-2 ----------

void criterion_5() {
    const MomentReport tamed =
        run_ens("cauchy_cubic", SchemeKind::TamedEuler, 5.0, 500, 100000, 2026);
    const MomentReport split =
        run_ens("cauchy_cubic", SchemeKind::Splitting, 5.0, 500, 100000, 2026);
    const double t2 = stat_of(tamed.terminal, 2.0);
    const double s2 = stat_of(split.terminal, 2.0);
    const bool pass = t2 > 10.0 && s2 >= 0.85 && s2 <= 1.05;
    report(5, pass,
           "second moments at h=1e-2 N=1e5: tamed " + format_double(t2) +
               " > 10, splitting " + format_double(s2) + " in [0.85, 1.05]");
}

// --- criterion 6: the splitting hard bound |X| <= 1/sqrt(2h) ----------------

void criterion_6() {
    const SdeModel model = make_builtin_model("cauchy_cubic");
    const std::vector<double> x0{0.0};
    bool pass = true;
    double worst_excess = -std::numeric_limits<double>::infinity();
    for (double h : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
        const double K = 1.0 / std::sqrt(2.0 * h);
        const Grid grid(1000 * h, 1000);
        NoiseGrid ng;
        for (long i = 0; i < 1000; ++i) {
            fill_noise_grid(model.noise, 2026, static_cast<std::uint64_t>(i), grid.n, grid.h,
                            ng);
            const Trajectory tr = simulate_path(model, SchemeKind::Splitting, grid, ng, x0);
            pass = pass && tr.status == PathStatus::Ok;
            for (long k = 1; k <= grid.n; ++k) {
                worst_excess = std::max(worst_excess, std::abs(tr.state(k)[0]) - K);
                pass = pass && std::abs(tr.state(k)[0]) <= K;
            }
        }
    }
    report(6, pass,
           "splitting paths never leave [-K, K], K = 1/sqrt(2h), h in {1e-1..1e-5}, "
           "1000 paths x 1000 steps each (worst |X|-K = " +
               format_double(worst_excess) + ")");
}

// --- criterion 7: strong convergence slope of the Brownian cubic model ------

void criterion_7() {
    StrongErrorConfig sc;
    sc.model = make_builtin_model("gaussian_cubic");
    sc.scheme = SchemeKind::Splitting;
    sc.q = 1.0;
    sc.n_list = {64, 128, 256, 512, 1024, 2048, 4096};
    sc.n_ref = 32768;
    sc.N_paths = 10000;
    sc.T = 1.0;
    sc.master_seed = 2026;
    sc.mode = ErrorMode::MeanOfSup;
    sc.workers = workers();
    const ErrorCurve curve = strong_error_study(sc);
    const double predicted = predicted_slope(sc.model, sc.mode, sc.q, 0.99);
    const bool pass =
        curve.fitted_slope >= 0.40 && curve.fitted_slope <= 0.60 && predicted == 0.5;
    report(7, pass,
           "coupled pathwise-sup study, q=1, n_ref=2^15, N=1e4: slope " +
               format_double(curve.fitted_slope) + " in [0.40, 0.60] (predicted " +
               format_double(predicted) + ")");
}

// --- criterion 8: numeric flow against the closed form ----------------------

void criterion_8() {
    const DriftFn cubic_drift = [](const double* x, double* out) {
        out[0] = -x[0] * x[0] * x[0];
    };
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        const double x = -100.0 + 200.0 * i / 999.0;
        const double t = 0.1 * ((i % 10) + 1) / 10.0;
        const auto y = rk4_flow(t, {x}, cubic_drift, 1e-12);
        worst = std::max(worst, std::abs(y[0] - cubic_flow(t, x)));
    }

    CellRng rng(StreamKey{2026, 0, 0, Channel::Auxiliary});
    double worst_semi = 0;
    for (int i = 0; i < 100000; ++i) {
        const double s = rng.next_uniform();
        const double t = rng.next_uniform();
        const double x = 200.0 * rng.next_uniform() - 100.0;
        const double direct = cubic_flow(s + t, x);
        const double chained = cubic_flow(s, cubic_flow(t, x));
        worst_semi =
            std::max(worst_semi, std::abs(chained - direct) / (1.0 + std::abs(direct)));
    }
    const bool pass = worst < 1e-8 && worst_semi <= 1e-12;
    report(8, pass,
           "rk4 flow matches the closed cubic flow (max |dev| " + format_double(worst) +
               " < 1e-8); semigroup property holds to " + format_double(worst_semi) +
               " <= 1e-12 relative on 1e5 random (s,t,x)");
}

// --- criterion 9: worked rate identities and branch continuity --------------

void criterion_9() {
    const double bar = rate_bar_delta(1.0, 0.5, 2.0);
    const double del = rate_delta_sup(1.0, 0.5, 2.0);
    const double gam = rate_gamma_sup(1.0, 3.0, 2.0, 2.0);
    const double lam = lambda_threshold(1.0, 1.0);
    bool pass = bar == 0.25 && del == 0.125 && gam == 0.1 && lam == 2.0;

    // the two gamma branches must agree where they meet (p = chi + 2), probed
    // one ulp on either side of the seam across a parameter sweep
    double worst_jump = 0;
    for (double kappa : {1.5, 2.0, 3.0, 4.0, 7.5})
        for (double chi : {0.25, 0.5, 1.0, 2.0, 4.0})
            for (double u : {0.1, 0.5, 0.9}) {
                const double p = chi + 2.0;
                const double p_X = p + u * (kappa - 1.0) * 0.999;
                const double below =
                    rate_gamma_sup(std::nextafter(p, 0.0), kappa, chi, p_X);
                const double above = rate_gamma_sup(
                    std::nextafter(p, std::numeric_limits<double>::infinity()), kappa, chi,
                    p_X);
                worst_jump =
                    std::max(worst_jump, std::abs(below - above) / std::max(below, above));
            }
    pass = pass && worst_jump <= 1e-12;
    report(9, pass,
           "worked rates are exact (0.25, 0.125, 0.1, 2); gamma branches agree at "
           "p = chi + 2 to " +
               format_double(worst_jump) + " <= 1e-12 relative");
}

// --- criterion 10: byte-identical CSV across worker counts ------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void criterion_10() {
    const fs::path dir =
        fs::temp_directory_path() / ("levysim_accept_" + std::to_string(getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    const fs::path cfg = dir / "run.ini";
    {
        std::ofstream out(cfg);
        out << "[model]\nname = cauchy_cubic\n\n[run]\nscheme = splitting\nT = 2\n"
               "n = 400\nN_paths = 20000\nmaster_seed = 77\nwindow = 1,2\n\n[output]\ndir = "
            << dir.string() << "\n";
    }
    bool ran = true;
    for (int w : {1, 4, 16}) {
        const std::string cmd = std::string(LEVYSIM_CLI_PATH) + " simulate --config " +
                                cfg.string() + " --workers " + std::to_string(w) +
                                " --prefix w" + std::to_string(w) + " >/dev/null 2>&1";
        const int rc = std::system(cmd.c_str());
        ran = ran && WIFEXITED(rc) && WEXITSTATUS(rc) == 0;
    }
    const std::string c1 = slurp(dir / "w1.csv");
    const bool pass = ran && !c1.empty() && c1 == slurp(dir / "w4.csv") &&
                      c1 == slurp(dir / "w16.csv") &&
                      slurp(dir / "w1_window.csv") == slurp(dir / "w16_window.csv");
    report(10, pass,
           "identical configs give byte-identical CSV across --workers 1, 4, 16");
}

// --- criterion 11: windowed moments separate splitting from reverse ---------

void criterion_11() {
    const auto win = std::make_pair(5.0, 6.0);
    const MomentReport split =
        run_ens("cauchy_cubic", SchemeKind::Splitting, 6.0, 6000, 100000, 2026, win);
    const MomentReport rev =
        run_ens("cauchy_cubic", SchemeKind::ReverseSplitA, 6.0, 6000, 100000, 2026, win);
    const double s1 = wstat_of(split.window_max, 1.0);
    const double s2 = wstat_of(split.window_max, 2.0);
    const double r2 = wstat_of(rev.window_max, 2.0);
    const bool pass = s1 >= 0.74 && s1 <= 0.80 && r2 >= 10.0 * s2;
    report(11, pass,
           "window-max over [5,6] at h=1e-3 N=1e5: splitting |X| " + format_double(s1) +
               " in [0.74, 0.80]; reverse |X|^2 " + format_double(r2) + " >= 10 x " +
               format_double(s2));
}

} // namespace

int main() {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
    criterion_10();
    criterion_11();
    if (failures == 0) {
        std::printf("all 11 criteria passed\n");
        return 0;
    }
    std::printf("%d criteria FAILED\n", failures);
    return 1;
}
