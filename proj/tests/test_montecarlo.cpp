#include <catch2/catch_amalgamated.hpp>

#include <levysim/montecarlo.hpp>

#include <cmath>
#include <vector>

using namespace levysim;

namespace {

// terminal states of the first N path substreams, streamed without storage
std::vector<std::vector<double>> terminal_samples(const SdeModel& m, SchemeKind scheme,
                                                  double T, long n, long N,
                                                  std::uint64_t seed) {
    const Grid grid(T, n);
    std::vector<std::vector<double>> out;
    out.reserve(N);
    NoiseGrid noise;
    std::vector<double> x0(m.dim, 0.0);
    for (long path = 0; path < N; ++path) {
        fill_noise_grid(m.noise, seed, path, n, grid.h, noise);
        run_path_visit(m, scheme, grid, noise, x0.data(), [&](long k, const double* x) {
            if (k == grid.n) out.emplace_back(x, x + m.dim);
        });
    }
    return out;
}

bool reports_identical(const MomentReport& a, const MomentReport& b) {
    if (a.nan_count != b.nan_count || a.flow_divergence_count != b.flow_divergence_count ||
        a.N_effective_terminal != b.N_effective_terminal ||
        a.terminal.size() != b.terminal.size() || a.window_max.size() != b.window_max.size())
        return false;
    for (std::size_t i = 0; i < a.terminal.size(); ++i)
        if (a.terminal[i].value != b.terminal[i].value ||
            a.terminal[i].std_error != b.terminal[i].std_error)
            return false;
    for (std::size_t i = 0; i < a.window_max.size(); ++i)
        if (a.window_max[i].value != b.window_max[i].value ||
            a.window_max[i].std_error != b.window_max[i].std_error ||
            a.window_max[i].argmax_index != b.window_max[i].argmax_index)
            return false;
    return true;
}

} // namespace

TEST_CASE("empirical moments hand values") {
    REQUIRE_THROWS_AS(empirical_moments({}, {1.0}), std::invalid_argument);

    const auto pm = empirical_moments({{1.0}, {-1.0}}, {2.0});
    REQUIRE(pm[0].first == 1.0);
    REQUIRE(pm[0].second == 0.0);

    const auto zeros = empirical_moments({{0.0}, {0.0}, {0.0}}, {0.5, 1.7});
    REQUIRE(zeros[0].first == 0.0);
    REQUIRE(zeros[1].first == 0.0);

    const auto m123 = empirical_moments({{1.0}, {2.0}, {3.0}}, {1.0});
    REQUIRE_THAT(m123[0].first, Catch::Matchers::WithinAbs(2.0, 1e-15));
    // population std sqrt(2/3) over sqrt(3)
    REQUIRE_THAT(m123[0].second, Catch::Matchers::WithinAbs(0.47140452079103173, 1e-14));

    // vector samples use the Euclidean norm
    const auto vec = empirical_moments({{3.0, 4.0}}, {1.0, 2.0});
    REQUIRE_THAT(vec[0].first, Catch::Matchers::WithinAbs(5.0, 1e-14));
    REQUIRE_THAT(vec[1].first, Catch::Matchers::WithinAbs(25.0, 1e-13));
}

TEST_CASE("exponential moment estimate") {
    REQUIRE_THROWS_AS(exp_moment_estimate({}, 1.0, 3.0), std::invalid_argument);
    REQUIRE_THROWS_AS(exp_moment_estimate({{1.0}}, -0.5, 3.0), std::invalid_argument);

    const auto unit = exp_moment_estimate({{2.0}, {-0.3}, {17.0}}, 0.0, 3.0);
    REQUIRE(unit.value == 1.0);
    REQUIRE(unit.std_error == 0.0);
    REQUIRE_FALSE(unit.diverged);

    const auto zeros = exp_moment_estimate({{0.0}, {0.0}}, 5.0, 3.0);
    REQUIRE(zeros.value == 1.0);
    REQUIRE_FALSE(zeros.diverged);

    // exp(0.25 * 100^4) overflows: the estimate reports the divergent regime
    const auto blown = exp_moment_estimate({{1.0}, {100.0}}, 1.0, 3.0);
    REQUIRE(blown.diverged);
    REQUIRE(std::isinf(blown.value));

    const auto finite = exp_moment_estimate({{1.0}, {0.5}}, 1.0, 3.0);
    const double expected = 0.5 * (std::exp(0.25) + std::exp(0.25 * 0.0625));
    REQUIRE_THAT(finite.value, Catch::Matchers::WithinRel(expected, 1e-14));
}

TEST_CASE("window snapping") {
    const Grid grid(1.0, 10);
    REQUIRE(snap_window(0.25, 0.85, grid) == std::pair<long, long>{3, 8});
    // 0.3/0.1 = 2.9999... in floating point; the guard keeps it on index 3
    REQUIRE(snap_window(0.3, 0.7, grid) == std::pair<long, long>{3, 7});
    REQUIRE(snap_window(0.0, 1.0, grid) == std::pair<long, long>{0, 10});
    REQUIRE_THROWS_AS(snap_window(0.61, 0.69, grid), std::invalid_argument);
    REQUIRE_THROWS_AS(snap_window(0.5, 1.2, grid), std::invalid_argument);
    REQUIRE_THROWS_AS(snap_window(-0.1, 0.5, grid), std::invalid_argument);
}

TEST_CASE("window max of constant trajectories") {
    const Grid grid(1.0, 4);
    std::vector<Trajectory> trajs(4);
    for (auto& t : trajs) {
        t.dim = 1;
        t.states.assign(5, 2.0);
        t.status = PathStatus::Ok;
    }
    const auto vals = window_max_moments(trajs, grid, {0.0, 1.0}, {1.0, 2.0});
    REQUIRE(vals[0] == 2.0);
    REQUIRE(vals[1] == 4.0);

    // a path that goes bad mid-window is excluded from later indices only
    trajs[0].status = PathStatus::NonFinite;
    trajs[0].first_bad_index = 3;
    for (auto& t : trajs) t.states[4] = 0.0; // make index 4 harmless
    trajs[1].states[2] = 10.0;               // a spike visible to all
    const auto spiked = window_max_moments(trajs, grid, {0.0, 1.0}, {1.0});
    REQUIRE_THAT(spiked[0], Catch::Matchers::WithinRel((10.0 + 2.0 + 2.0 + 2.0) / 4.0, 1e-15));
}

TEST_CASE("ensembles are bit-identical across runs and worker counts") {
    EnsembleConfig cfg;
    cfg.model = make_builtin_model("cauchy_cubic");
    cfg.scheme = SchemeKind::Splitting;
    cfg.T = 1.0;
    cfg.n = 100;
    cfg.N_paths = 3000; // three blocks, one partial
    cfg.master_seed = 77;
    cfg.window = {{0.5, 1.0}};

    const auto base = run_ensemble(cfg);
    REQUIRE(reports_identical(base, run_ensemble(cfg)));

    auto cfg3 = cfg;
    cfg3.workers = 3;
    REQUIRE(reports_identical(base, run_ensemble(cfg3)));

    auto cfg16 = cfg;
    cfg16.workers = 16;
    REQUIRE(reports_identical(base, run_ensemble(cfg16)));

    auto other_seed = cfg;
    other_seed.master_seed = 78;
    REQUIRE_FALSE(reports_identical(base, run_ensemble(other_seed)));
}

TEST_CASE("ensemble statistics equal per-path statistics") {
    EnsembleConfig cfg;
    cfg.model = make_builtin_model("cauchy_cubic");
    cfg.scheme = SchemeKind::Splitting;
    cfg.T = 2.0;
    cfg.n = 200;
    cfg.N_paths = 200; // a single block keeps the fold order identical
    cfg.master_seed = 1234;
    cfg.exponents = {0.5, 1.0, 2.0};
    cfg.window = {{1.0, 2.0}};

    const auto report = run_ensemble(cfg);
    REQUIRE(report.nan_count == 0);
    REQUIRE(report.N_effective_terminal == 200);

    const auto samples =
        terminal_samples(cfg.model, cfg.scheme, cfg.T, cfg.n, cfg.N_paths, cfg.master_seed);
    REQUIRE(samples.size() == 200);
    const auto direct = empirical_moments(samples, cfg.exponents);
    for (std::size_t e = 0; e < cfg.exponents.size(); ++e) {
        REQUIRE(report.terminal[e].value == direct[e].first);
        REQUIRE(report.terminal[e].std_error == direct[e].second);
    }

    // the splitting bound makes truncation at 1/sqrt(2h) a no-op: the
    // truncated and plain moments are the same sums, exactly
    const double bound = cfg.model.flow.bound(cfg.T / cfg.n);
    auto truncated = samples;
    for (auto& s : truncated)
        if (std::abs(s[0]) > bound) s[0] = 0.0;
    const auto trunc_moments = empirical_moments(truncated, cfg.exponents);
    for (std::size_t e = 0; e < cfg.exponents.size(); ++e)
        REQUIRE(report.terminal[e].value == trunc_moments[e].first);

    // window maxima agree with the materialized-trajectory computation
    const Grid grid(cfg.T, cfg.n);
    std::vector<Trajectory> trajs;
    for (long path = 0; path < cfg.N_paths; ++path) {
        const auto noise = make_noise_grid(cfg.model.noise, cfg.master_seed, path, cfg.n, grid.h);
        trajs.push_back(simulate_path(cfg.model, cfg.scheme, grid, noise, {0.0}));
    }
    const auto direct_win = window_max_moments(trajs, grid, *cfg.window, cfg.exponents);
    for (std::size_t e = 0; e < cfg.exponents.size(); ++e) {
        REQUIRE(report.window_max[e].value == direct_win[e]);
        REQUIRE(report.window_max[e].argmax_index >= report.window_k_lo);
        REQUIRE(report.window_max[e].argmax_index <= report.window_k_hi);
        REQUIRE(report.window_max[e].value >= report.terminal[e].value);
        REQUIRE(report.window_max[e].std_error > 0.0);
    }
}

TEST_CASE("silent noise gives zero moments and an empty census") {
    SdeModel m;
    m.name = "silent";
    m.dim = 1;
    m.driftA = [](const double* x, double* out) { out[0] = -x[0] * x[0] * x[0]; };
    m.b_is_const = true;
    m.b_const = {0.0};
    m.flow = FlowMap::cubic();
    m.noise.brownian_dim = 1;
    m.noise.levy_kind = LevyKind::None;
    m.noise.levy_dim = 0;
    m.noise.p_moment = std::numeric_limits<double>::infinity();

    for (const auto scheme : {SchemeKind::ExplicitEuler, SchemeKind::TamedEuler,
                              SchemeKind::Splitting, SchemeKind::ReverseSplitA,
                              SchemeKind::ReverseSplitB}) {
        EnsembleConfig cfg;
        cfg.model = m;
        cfg.scheme = scheme;
        cfg.T = 1.0;
        cfg.n = 50;
        cfg.N_paths = 10;
        const auto report = run_ensemble(cfg);
        REQUIRE(report.nan_count == 0);
        for (const auto& stat : report.terminal) {
            REQUIRE(stat.value == 0.0);
            REQUIRE(stat.std_error == 0.0);
        }
    }
}

TEST_CASE("NaN census separates Euler from splitting") {
    EnsembleConfig cfg;
    cfg.model = make_builtin_model("cauchy_cubic");
    cfg.scheme = SchemeKind::ExplicitEuler;
    cfg.T = 5.0;
    cfg.n = 500; // h = 1e-2
    cfg.N_paths = 2000;
    cfg.master_seed = 9;

    const auto euler = run_ensemble(cfg);
    REQUIRE(euler.nan_count + euler.N_effective_terminal == cfg.N_paths);
    REQUIRE(euler.nan_fraction > 0.12);
    REQUIRE(euler.nan_fraction < 0.28);
    REQUIRE(euler.flow_divergence_count == 0);

    cfg.scheme = SchemeKind::Splitting;
    const auto split = run_ensemble(cfg);
    REQUIRE(split.nan_count == 0);
    REQUIRE(split.N_effective_terminal == cfg.N_paths);
}

TEST_CASE("splitting moments sit in the published bands at reduced N") {
    EnsembleConfig cfg;
    cfg.model = make_builtin_model("cauchy_cubic");
    cfg.scheme = SchemeKind::Splitting;
    cfg.T = 5.0;
    cfg.n = 500; // h = 1e-2
    cfg.N_paths = 20000;
    cfg.master_seed = 2024;
    cfg.exponents = {0.5, 1.0};

    const auto report = run_ensemble(cfg);
    // published values 0.814 and 0.760 at N = 10^7; generous MC bands here
    REQUIRE(report.terminal[0].value > 0.79);
    REQUIRE(report.terminal[0].value < 0.84);
    REQUIRE(report.terminal[1].value > 0.73);
    REQUIRE(report.terminal[1].value < 0.79);
    REQUIRE(report.terminal[0].std_error < 0.01);
}

TEST_CASE("truncated 2.5-moments increase toward the stationary value as h falls") {
    EnsembleConfig cfg;
    cfg.model = make_builtin_model("cauchy_cubic");
    cfg.scheme = SchemeKind::Splitting;
    cfg.T = 5.0;
    cfg.N_paths = 20000;
    cfg.master_seed = 555;
    cfg.exponents = {2.5};

    cfg.n = 500; // h = 1e-2
    const auto coarse = run_ensemble(cfg);
    cfg.n = 5000; // h = 1e-3
    const auto fine = run_ensemble(cfg);

    const double se = 2 * (coarse.terminal[0].std_error + fine.terminal[0].std_error);
    REQUIRE(coarse.terminal[0].value <= fine.terminal[0].value + se);
    // and both stay below the full stationary moment (1.5478...)
    REQUIRE(fine.terminal[0].value <=
            1.54784616112339 + 2 * fine.terminal[0].std_error);
}

TEST_CASE("exponential moments are h-stable below the threshold") {
    const SdeModel m = make_builtin_model("gaussian_cubic");
    const double lambda = 1.0; // half of the threshold 2 C1 / sigma^2 = 2
    const auto coarse = exp_moment_estimate(
        terminal_samples(m, SchemeKind::Splitting, 5.0, 500, 20000, 31), lambda, m.kappa);
    const auto fine = exp_moment_estimate(
        terminal_samples(m, SchemeKind::Splitting, 5.0, 5000, 20000, 31), lambda, m.kappa);
    REQUIRE_FALSE(coarse.diverged);
    REQUIRE_FALSE(fine.diverged);
    REQUIRE(coarse.value / fine.value > 0.9);
    REQUIRE(coarse.value / fine.value < 1.1);
}
