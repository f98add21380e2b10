#include <catch2/catch_amalgamated.hpp>

#include <levysim/flow.hpp>
#include <levysim/philox.hpp>

#include <cmath>
#include <limits>
#include <vector>

using namespace levysim;

namespace {

// cheap deterministic uniforms for property sweeps
struct Sweep {
    CellRng rng;
    explicit Sweep(std::uint64_t seed) : rng(StreamKey{seed, 0, 0, Channel::Auxiliary}) {}
    double uniform(double lo, double hi) { return lo + (hi - lo) * rng.next_uniform(); }
    double log_uniform(double lo, double hi) {
        return lo * std::exp(std::log(hi / lo) * rng.next_uniform());
    }
};

void cubic_drift(const double* x, double* out) { out[0] = -x[0] * x[0] * x[0]; }

// frozen-Lorenz drift with n=1, b=1, c=0.5
void lorenz_drift(const double* v, double* out) {
    const double y = v[0], z = v[1];
    out[0] = -y * y * y + 0.5 * y - 0.5 * z;
    out[1] = -z * z * z + 0.5 * y + 0.5 * z;
}

} // namespace

TEST_CASE("cubic flow closed form") {
    REQUIRE(cubic_flow(0.0, 5.0) == 5.0);
    REQUIRE(cubic_flow(0.7, 0.0) == 0.0);
    REQUIRE(cubic_flow(123.0, 0.0) == 0.0);
    REQUIRE_THAT(cubic_flow(0.5, 1.0),
                 Catch::Matchers::WithinAbs(0.7071067811865476, 1e-13));
    // enormous x lands on the return radius 1/sqrt(2t)
    REQUIRE_THAT(cubic_flow(0.01, 1e9),
                 Catch::Matchers::WithinAbs(7.0710678118654755, 1e-12));
    REQUIRE_THAT(cubic_flow(0.01, -1e9),
                 Catch::Matchers::WithinAbs(-7.0710678118654755, 1e-12));
    // the two algebraic branches agree where they meet
    const double below = cubic_flow(0.3, 1e8 * (1 - 1e-12));
    const double above = cubic_flow(0.3, 1e8 * (1 + 1e-12));
    REQUIRE_THAT(below, Catch::Matchers::WithinRel(above, 1e-12));
}

TEST_CASE("cubic flow global bound holds exactly") {
    Sweep sweep(101);
    for (int i = 0; i < 1000000; ++i) {
        const double h = sweep.log_uniform(1e-6, 1.0);
        double x = sweep.log_uniform(1e-12, 1e300);
        if (sweep.uniform(0, 1) < 0.5) x = -x;
        const double r = cubic_flow(h, x);
        REQUIRE(std::abs(r) <= cubic_flow_bound(h));
    }
}

TEST_CASE("cubic flow is monotone and contracting") {
    Sweep sweep(102);
    for (int i = 0; i < 100000; ++i) {
        const double t = sweep.log_uniform(1e-6, 10.0);
        double x = sweep.log_uniform(1e-6, 1e12);
        if (sweep.uniform(0, 1) < 0.5) x = -x;
        const double r = cubic_flow(t, x);
        REQUIRE(std::abs(r) <= std::abs(x)); // contraction at L=0
        REQUIRE(r * x >= 0.0);               // sign preserved

        const double y = x * (1.0 + sweep.uniform(0.0, 1.0)) + sweep.uniform(0.0, 1.0);
        // mathematically Phi(t,.) is nondecreasing; allow ulp-level jitter
        // where the two evaluation branches meet
        const double ry = cubic_flow(t, std::max(x, y));
        const double rx = cubic_flow(t, std::min(x, y));
        const double slack = 4e-15 * std::max({1.0, std::abs(rx), std::abs(ry)});
        REQUIRE(rx <= ry + slack);
    }
}

TEST_CASE("cubic flow displacement bound") {
    Sweep sweep(103);
    for (int i = 0; i < 100000; ++i) {
        const double t = sweep.log_uniform(1e-6, 1.0);
        const double x = sweep.uniform(-50.0, 50.0);
        const double disp = std::abs(cubic_flow(t, x) - x);
        const double limit = flow_displacement_bound(t, std::abs(x * x * x), 0.0);
        // disp is a difference of near-equal doubles, so grant ulp(x) slack
        const double slack = 64 * std::numeric_limits<double>::epsilon() * (std::abs(x) + 1);
        REQUIRE(disp <= limit * (1 + 1e-9) + slack);
    }
}

TEST_CASE("radial flow reduces to the cubic flow at n=1, d=1") {
    Sweep sweep(104);
    for (int i = 0; i < 100000; ++i) {
        const double t = sweep.log_uniform(1e-6, 10.0);
        double x = sweep.log_uniform(1e-8, 1e10);
        if (sweep.uniform(0, 1) < 0.5) x = -x;
        double out;
        radial_poly_flow(t, &x, 1, 1, &out);
        const double ref = cubic_flow(t, x);
        REQUIRE_THAT(out, Catch::Matchers::WithinRel(ref, 1e-14));
    }
    REQUIRE_THAT(radial_poly_flow(0.5, std::vector<double>{1.0}, 1)[0],
                 Catch::Matchers::WithinAbs(0.7071067811865476, 1e-13));
}

TEST_CASE("radial flow closed form, direction preservation, bound") {
    // n=2, t=1, ||x||=1: norm = 5^{-1/4}, cross-checked against a
    // 10^6-substep fixed-step RK4 run (0.6687403049763933)
    const std::vector<double> x{0.6, 0.8};
    const auto y = radial_poly_flow(1.0, x, 2);
    REQUIRE_THAT(y[0], Catch::Matchers::WithinAbs(0.6 * 0.6687403049764220, 1e-10));
    REQUIRE_THAT(y[1], Catch::Matchers::WithinAbs(0.8 * 0.6687403049764220, 1e-10));
    REQUIRE_THAT(std::hypot(y[0], y[1]),
                 Catch::Matchers::WithinAbs(0.6687403049764220, 1e-12));
    // direction unchanged
    REQUIRE_THAT(y[1] / y[0], Catch::Matchers::WithinRel(0.8 / 0.6, 1e-12));

    const auto zero = radial_poly_flow(3.0, std::vector<double>{0.0, 0.0, 0.0}, 4);
    for (double v : zero) REQUIRE(v == 0.0);

    Sweep sweep(105);
    for (int i = 0; i < 100000; ++i) {
        const double t = sweep.log_uniform(1e-6, 1.0);
        const int n = 1 + static_cast<int>(sweep.uniform(0, 3.999));
        double x2[2] = {sweep.uniform(-1e6, 1e6), sweep.uniform(-1e6, 1e6)};
        double out2[2];
        radial_poly_flow(t, x2, 2, n, out2);
        const double norm_in = std::hypot(x2[0], x2[1]);
        const double norm_out = std::hypot(out2[0], out2[1]);
        REQUIRE(norm_out <= norm_in * (1 + 1e-15)); // contraction
        REQUIRE(norm_out <= radial_poly_bound(t, n));
    }
}

TEST_CASE("analytic semigroup identity") {
    Sweep sweep(106);
    for (int i = 0; i < 100000; ++i) {
        const double s = sweep.log_uniform(1e-4, 1.0);
        const double t = sweep.log_uniform(1e-4, 1.0);
        const double x = sweep.uniform(-100.0, 100.0);
        const double once = cubic_flow(s + t, x);
        const double twice = cubic_flow(s, cubic_flow(t, x));
        REQUIRE_THAT(twice, Catch::Matchers::WithinRel(once, 1e-12));

        double v[2] = {x, sweep.uniform(-100.0, 100.0)};
        double a[2], b[2], c[2];
        radial_poly_flow(s + t, v, 2, 2, a);
        radial_poly_flow(t, v, 2, 2, b);
        radial_poly_flow(s, b, 2, 2, c);
        for (int d = 0; d < 2; ++d)
            REQUIRE_THAT(c[d], Catch::Matchers::WithinRel(a[d], 1e-12));
    }
}

TEST_CASE("rk4 flow matches the cubic closed form") {
    REQUIRE(rk4_flow(0.0, {3.0}, cubic_drift) == std::vector<double>{3.0});
    const auto y = rk4_flow(0.05, {3.0}, cubic_drift, 1e-10);
    REQUIRE_THAT(y[0], Catch::Matchers::WithinAbs(cubic_flow(0.05, 3.0), 1e-8));

    Sweep sweep(107);
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        const double t = sweep.uniform(0.0, 0.1);
        const double x = sweep.uniform(-100.0, 100.0);
        const auto r = rk4_flow(t, {x}, cubic_drift, 1e-10);
        worst = std::max(worst, std::abs(r[0] - cubic_flow(t, x)));
    }
    REQUIRE(worst < 1e-8);
}

TEST_CASE("rk4 flow matches the frozen-Lorenz reference") {
    // reference: fixed-step classical RK4 with 10^6 substeps
    const auto y = rk4_flow(0.01, {2.0, -1.0}, lorenz_drift, 1e-10, 1L << 20, 0.5, 0.0);
    REQUIRE_THAT(y[0], Catch::Matchers::WithinAbs(1.938487745886619, 1e-8));
    REQUIRE_THAT(y[1], Catch::Matchers::WithinAbs(-0.9853390879919288, 1e-8));
}

TEST_CASE("rk4 semigroup within 10 tol") {
    Sweep sweep(108);
    const double tol = 1e-10;
    for (int i = 0; i < 200; ++i) {
        const double s = sweep.uniform(0.001, 0.05);
        const double t = sweep.uniform(0.001, 0.05);
        const std::vector<double> x{sweep.uniform(-3, 3), sweep.uniform(-3, 3)};
        const auto once = rk4_flow(s + t, x, lorenz_drift, tol, 1L << 20, 0.5, 0.0);
        const auto mid = rk4_flow(t, x, lorenz_drift, tol, 1L << 20, 0.5, 0.0);
        const auto twice = rk4_flow(s, mid, lorenz_drift, tol, 1L << 20, 0.5, 0.0);
        for (int d = 0; d < 2; ++d) REQUIRE_THAT(twice[d], Catch::Matchers::WithinAbs(once[d], 10 * tol));
    }
}

TEST_CASE("rk4 flow signals divergence on a hypothesis-violating drift") {
    const auto anti_drift = [](const double* x, double* out) { out[0] = +x[0] * x[0] * x[0]; };
    // A = +x^3 explodes in finite time; the integrator must give up rather
    // than return garbage
    REQUIRE_THROWS_AS(rk4_flow(1.0, {3.0}, anti_drift, 1e-10, 1L << 14), FlowDivergence);
    // and an unattainable substep budget also raises
    REQUIRE_THROWS_AS(rk4_flow(1.0, {3.0}, cubic_drift, 1e-16, 8), FlowDivergence);
}

TEST_CASE("flow map dispatch") {
    const auto cubic = FlowMap::cubic();
    REQUIRE(cubic.evaluate(0.5, {1.0})[0] == cubic_flow(0.5, 1.0));
    REQUIRE(cubic.has_hard_bound());
    REQUIRE_THAT(cubic.bound(0.01), Catch::Matchers::WithinRel(7.0710678118654755, 1e-15));

    const auto radial = FlowMap::radial(2, 2);
    const auto y = radial.evaluate(1.0, {0.6, 0.8});
    REQUIRE_THAT(std::hypot(y[0], y[1]),
                 Catch::Matchers::WithinAbs(0.6687403049764220, 1e-12));

    const auto numeric = FlowMap::numeric(2, lorenz_drift, 0.5, 0.0);
    REQUIRE_FALSE(numeric.has_hard_bound());
    REQUIRE(std::isinf(numeric.bound(0.01)));
    const auto z = numeric.evaluate(0.01, {2.0, -1.0});
    REQUIRE_THAT(z[0], Catch::Matchers::WithinAbs(1.938487745886619, 1e-8));

    // norm-bound helper limits
    REQUIRE_THAT(flow_norm_bound(2.0, 3.0, 0.0, 1.5),
                 Catch::Matchers::WithinRel(3.0 + 2.0 * 1.5, 1e-15));
}
