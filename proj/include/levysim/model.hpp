#pragma once

// Coefficient bundles for the SDE
//
//   dX = A(X) dt + a(X) dt + b(X) dB + c(X-) dZ
//
// together with the structural constants (kappa, chi, L, C1, C2) under which
// the schemes' moment and convergence guarantees hold, the solution flow of
// A, and the noise layout.  Hypotheses are *declared* by the model and
// *spot-checked* by sampling (check_hypotheses): the coefficients are opaque
// callables, so the universally quantified conditions can only be falsified,
// not proven, at runtime.  The built-in registry carries the example models
// with honest constants verified in closed form in the test suite.

#include "flow.hpp"
#include "noise.hpp"
#include "philox.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace levysim {

// x -> row-major matrix (the caller knows the shape)
using MatrixFn = std::function<void(const double*, double*)>;

struct SdeModel {
    std::string name;
    int dim = 1;

    DriftFn driftA;        // superlinear dissipative part A, required
    MatrixFn driftA_grad;  // optional Jacobian of A (row-major dim x dim)
    DriftFn drifta;        // bounded Lipschitz part a; null means a == 0

    // Diffusion and jump coefficients.  A coefficient is either a constant
    // matrix (the *_const cache is used and the callable may be null) or a
    // callable filling a row-major dim x (brownian_dim | levy_dim) matrix.
    // With the matching noise dimension zero the coefficient is absent.
    MatrixFn diffusion_b;
    MatrixFn jump_c;
    bool b_is_const = false;
    bool c_is_const = false;
    std::vector<double> b_const;
    std::vector<double> c_const;

    // declared sup norms (Frobenius for matrices); check_hypotheses verifies
    double a_sup = 0.0;
    double b_sup = 0.0;
    double c_sup = 0.0;

    // structural constants:  <A(x),x> <= -C1 ||x||^{1+kappa} + C2,
    // <A(x)-A(y),x-y> <= L ||x-y||^2,  ||A_x(x)|| <= const (1+||x||^chi)
    double kappa = 3.0;
    double chi = 2.0;
    double L = 0.0;
    double C1 = 1.0;
    double C2 = 0.0;

    FlowMap flow;
    NoiseSpec noise;
    std::map<std::string, double> params; // resolved construction parameters

    bool has_a() const { return static_cast<bool>(drifta); }
    int brownian_dim() const { return noise.brownian_dim; }
    int levy_dim() const { return noise.levy_dim; }

    // Pointer to the dim x brownian_dim matrix b(x); scratch backs the
    // non-constant case.  Null when there is no Brownian term.
    const double* b_matrix(const double* x, std::vector<double>& scratch) const {
        if (noise.brownian_dim == 0) return nullptr;
        if (b_is_const) return b_const.data();
        scratch.resize(static_cast<std::size_t>(dim) * noise.brownian_dim);
        diffusion_b(x, scratch.data());
        return scratch.data();
    }

    const double* c_matrix(const double* x, std::vector<double>& scratch) const {
        if (noise.levy_dim == 0) return nullptr;
        if (c_is_const) return c_const.data();
        scratch.resize(static_cast<std::size_t>(dim) * noise.levy_dim);
        jump_c(x, scratch.data());
        return scratch.data();
    }

    void validate() const {
        if (dim < 1) throw std::invalid_argument("SdeModel: dim must be >= 1");
        if (!driftA) throw std::invalid_argument("SdeModel: driftA is required");
        if (!(kappa > 1.0)) throw std::invalid_argument("SdeModel: kappa must exceed 1");
        if (chi < 0.0 || L < 0.0 || C2 < 0.0 || !(C1 > 0.0))
            throw std::invalid_argument("SdeModel: invalid structural constants");
        if (kappa > chi + 1.0 + 1e-12)
            throw std::invalid_argument("SdeModel: kappa must not exceed chi + 1");
        if (a_sup < 0 || b_sup < 0 || c_sup < 0)
            throw std::invalid_argument("SdeModel: negative sup norm");
        noise.validate();
        if (flow.dim != dim) throw std::invalid_argument("SdeModel: flow dimension mismatch");
        const auto need = [this](bool is_const, const MatrixFn& fn,
                                 const std::vector<double>& cache, int cols, const char* what) {
            if (cols == 0) return;
            if (is_const) {
                if (cache.size() != static_cast<std::size_t>(dim) * cols)
                    throw std::invalid_argument(std::string("SdeModel: wrong ") + what +
                                                " constant-matrix size");
            } else if (!fn) {
                throw std::invalid_argument(std::string("SdeModel: missing ") + what +
                                            " coefficient");
            }
        };
        need(b_is_const, diffusion_b, b_const, noise.brownian_dim, "diffusion");
        need(c_is_const, jump_c, c_const, noise.levy_dim, "jump");
    }
};

// Rate-relevant exponents an experiment runs under; the model supplies
// kappa and chi, these are the free knobs.
struct RateParams {
    double p = 0.99;          // finite noise moment
    double p_X = 0.5;         // target state moment, in (0, p + kappa - 1)
    double q = 0.5;           // error moment, in (0, p)
    double lambda_exp = 0.0;  // exponential-moment weight
    double epsilon_hess = 1.0; // Hessian-condition constant; recorded, not checked
};

// --- hypothesis spot-checks ----------------------------------------------

struct HypothesisCheck {
    double margin = 0.0; // worst (most negative) slack observed; >= 0 is clean
    bool pass = true;
};

struct HypothesisReport {
    HypothesisCheck dissipativity;
    HypothesisCheck one_sided_lipschitz;
    HypothesisCheck a_bound;
    HypothesisCheck b_bound;
    HypothesisCheck c_bound;
    bool all_pass = true;
    long n_samples = 0;
    double radius = 0.0;
};

namespace detail {

inline double dot(const double* u, const double* v, int d) {
    double s = 0;
    for (int i = 0; i < d; ++i) s += u[i] * v[i];
    return s;
}

inline double frobenius(const double* m, int rows, int cols) {
    double s = 0;
    for (int i = 0; i < rows * cols; ++i) s += m[i] * m[i];
    return std::sqrt(s);
}

// uniform point in the d-ball of the given radius
inline void sample_ball(CellRng& rng, int d, double radius, double* out) {
    double norm2 = 0;
    for (int i = 0; i < d; ++i) {
        out[i] = rng.next_normal();
        norm2 += out[i] * out[i];
    }
    if (norm2 == 0) { out[0] = 1; norm2 = 1; }
    const double r = radius * std::pow(rng.next_uniform(), 1.0 / d);
    const double s = r / std::sqrt(norm2);
    for (int i = 0; i < d; ++i) out[i] *= s;
}

} // namespace detail

// Samples points (and consecutive pairs) uniformly in the ball and records
// the worst slack of each declared inequality.  Slacks are compared against
// a tolerance relative to the largest term magnitude encountered, since at
// radius 10^3 and kappa = 3 the terms reach 10^12 and honest rounding noise
// scales with them.
inline HypothesisReport check_hypotheses(const SdeModel& model, long n_samples,
                                         double radius, const StreamKey& key) {
    if (n_samples < 1) throw std::invalid_argument("check_hypotheses: n_samples must be >= 1");
    const int d = model.dim;
    CellRng rng(key);

    std::vector<double> x(d), prev(d), ax(d), aprev(d), work(d);
    std::vector<double> mat_scratch;

    double diss_margin = std::numeric_limits<double>::infinity(), diss_scale = 0;
    double lip_margin = std::numeric_limits<double>::infinity(), lip_scale = 0;
    double a_max = 0, b_max = 0, c_max = 0;

    for (long i = 0; i < n_samples; ++i) {
        detail::sample_ball(rng, d, radius, x.data());
        model.driftA(x.data(), ax.data());

        const double nrm = std::sqrt(detail::dot(x.data(), x.data(), d));
        const double lhs = detail::dot(ax.data(), x.data(), d);
        const double diss_rhs = -model.C1 * std::pow(nrm, 1.0 + model.kappa) + model.C2;
        diss_margin = std::min(diss_margin, diss_rhs - lhs);
        diss_scale = std::max(diss_scale, std::abs(lhs) + std::abs(diss_rhs) + model.C2);

        if (i > 0) {
            double diff2 = 0, cross = 0;
            for (int j = 0; j < d; ++j) {
                const double dx = x[j] - prev[j];
                diff2 += dx * dx;
                cross += (ax[j] - aprev[j]) * dx;
            }
            lip_margin = std::min(lip_margin, model.L * diff2 - cross);
            lip_scale = std::max(lip_scale, std::abs(cross) + model.L * diff2);
        }

        if (model.has_a()) {
            model.drifta(x.data(), work.data());
            a_max = std::max(a_max, std::sqrt(detail::dot(work.data(), work.data(), d)));
        }
        if (const double* b = model.b_matrix(x.data(), mat_scratch))
            b_max = std::max(b_max, detail::frobenius(b, d, model.brownian_dim()));
        if (const double* c = model.c_matrix(x.data(), mat_scratch))
            c_max = std::max(c_max, detail::frobenius(c, d, model.levy_dim()));

        std::swap(x, prev);
        std::swap(ax, aprev);
    }

    constexpr double rel = 1e-12;
    HypothesisReport rep;
    rep.n_samples = n_samples;
    rep.radius = radius;
    rep.dissipativity = {diss_margin, diss_margin >= -rel * diss_scale};
    if (n_samples > 1)
        rep.one_sided_lipschitz = {lip_margin, lip_margin >= -rel * lip_scale};
    rep.a_bound = {model.a_sup - a_max, a_max <= model.a_sup * (1 + rel)};
    rep.b_bound = {model.b_sup - b_max, b_max <= model.b_sup * (1 + rel)};
    rep.c_bound = {model.c_sup - c_max, c_max <= model.c_sup * (1 + rel)};
    rep.all_pass = rep.dissipativity.pass && rep.one_sided_lipschitz.pass &&
                   rep.a_bound.pass && rep.b_bound.pass && rep.c_bound.pass;
    return rep;
}

// --- built-in registry ----------------------------------------------------

namespace detail {

// reads keys with defaults and rejects unknown ones, so config typos fail
// loudly instead of silently running the default experiment
class ParamReader {
public:
    explicit ParamReader(const std::map<std::string, double>& params) : params_(params) {}

    double get(const std::string& key, double fallback) {
        seen_.push_back(key);
        const auto it = params_.find(key);
        return it == params_.end() ? fallback : it->second;
    }

    long get_int(const std::string& key, long fallback) {
        const double v = get(key, static_cast<double>(fallback));
        const long n = std::lround(v);
        if (std::abs(v - static_cast<double>(n)) > 1e-9)
            throw std::invalid_argument("model parameter '" + key + "' must be an integer");
        return n;
    }

    void finish() const {
        for (const auto& [key, value] : params_) {
            (void)value;
            bool known = false;
            for (const auto& s : seen_)
                if (s == key) { known = true; break; }
            if (!known) throw std::invalid_argument("unknown model parameter '" + key + "'");
        }
    }

private:
    const std::map<std::string, double>& params_;
    std::vector<std::string> seen_;
};

inline void record(SdeModel& m, ParamReader& reader) {
    reader.finish();
    m.validate();
}

} // namespace detail

inline const std::vector<std::string>& builtin_model_names() {
    static const std::vector<std::string> names{
        "cauchy_cubic", "sine_cubic", "gaussian_cubic", "radial_poly", "frozen_lorenz"};
    return names;
}

// Constructs one of the example models.  Accepted parameters:
//   cauchy_cubic   p (noise moment, default 0.99)
//   sine_cubic     p
//   gaussian_cubic sigma (diffusion, default 1)
//   radial_poly    n (default 2), dim (default 2), sigma (default 1)
//   frozen_lorenz  n (default 1), b (default 1), c (default 0.5),
//                  sigma (default 1)
inline SdeModel make_builtin_model(const std::string& name,
                                   const std::map<std::string, double>& params = {}) {
    detail::ParamReader reader(params);
    SdeModel m;
    m.name = name;

    const auto cubic_scalar = [&m](detail::ParamReader& r, bool with_sine) {
        m.dim = 1;
        m.driftA = [](const double* x, double* out) { out[0] = -x[0] * x[0] * x[0]; };
        m.driftA_grad = [](const double* x, double* out) { out[0] = -3.0 * x[0] * x[0]; };
        if (with_sine) {
            m.drifta = [](const double* x, double* out) { out[0] = std::sin(x[0]); };
            m.a_sup = 1.0;
        }
        m.c_is_const = true;
        m.c_const = {1.0};
        m.c_sup = 1.0;
        m.kappa = 3.0;
        m.chi = 2.0;
        m.L = 0.0;
        m.C1 = 1.0;
        m.C2 = 0.0;
        m.flow = FlowMap::cubic();
        m.noise.brownian_dim = 0;
        m.noise.levy_kind = LevyKind::Cauchy;
        m.noise.levy_dim = 1;
        m.noise.p_moment = r.get("p", 0.99);
        m.params["p"] = m.noise.p_moment;
    };

    if (name == "cauchy_cubic") {
        cubic_scalar(reader, false);
    } else if (name == "sine_cubic") {
        cubic_scalar(reader, true);
    } else if (name == "gaussian_cubic") {
        const double sigma = reader.get("sigma", 1.0);
        if (!(sigma > 0)) throw std::invalid_argument("gaussian_cubic: sigma must be positive");
        m.dim = 1;
        m.driftA = [](const double* x, double* out) { out[0] = -x[0] * x[0] * x[0]; };
        m.driftA_grad = [](const double* x, double* out) { out[0] = -3.0 * x[0] * x[0]; };
        m.b_is_const = true;
        m.b_const = {sigma};
        m.b_sup = sigma;
        m.kappa = 3.0;
        m.chi = 2.0;
        m.L = 0.0;
        m.C1 = 1.0;
        m.C2 = 0.0;
        m.flow = FlowMap::cubic();
        m.noise.brownian_dim = 1;
        m.noise.levy_kind = LevyKind::None;
        m.noise.levy_dim = 0;
        m.noise.p_moment = std::numeric_limits<double>::infinity();
        m.params["sigma"] = sigma;
    } else if (name == "radial_poly") {
        const long n = reader.get_int("n", 2);
        const long dim = reader.get_int("dim", 2);
        const double sigma = reader.get("sigma", 1.0);
        if (n < 1 || dim < 1) throw std::invalid_argument("radial_poly: n and dim must be >= 1");
        if (!(sigma > 0)) throw std::invalid_argument("radial_poly: sigma must be positive");
        m.dim = static_cast<int>(dim);
        m.driftA = [d = m.dim, n](const double* x, double* out) {
            double r2 = 0;
            for (int i = 0; i < d; ++i) r2 += x[i] * x[i];
            const double f = -std::pow(r2, static_cast<double>(n));
            for (int i = 0; i < d; ++i) out[i] = f * x[i];
        };
        m.b_is_const = true;
        m.b_const.assign(static_cast<std::size_t>(m.dim) * m.dim, 0.0);
        for (int i = 0; i < m.dim; ++i) m.b_const[i * m.dim + i] = sigma;
        m.b_sup = sigma * std::sqrt(static_cast<double>(m.dim));
        m.kappa = 2.0 * n + 1.0;
        m.chi = 2.0 * n;
        m.L = 0.0;
        m.C1 = 1.0;
        m.C2 = 0.0;
        m.flow = FlowMap::radial(m.dim, static_cast<int>(n));
        m.noise.brownian_dim = m.dim;
        m.noise.levy_kind = LevyKind::None;
        m.noise.levy_dim = 0;
        m.noise.p_moment = std::numeric_limits<double>::infinity();
        m.params = {{"n", double(n)}, {"dim", double(dim)}, {"sigma", sigma}};
    } else if (name == "frozen_lorenz") {
        const long n = reader.get_int("n", 1);
        const double b = reader.get("b", 1.0);
        const double c = reader.get("c", 0.5);
        const double sigma = reader.get("sigma", 1.0);
        if (n < 1) throw std::invalid_argument("frozen_lorenz: n must be >= 1");
        if (!(b > 0)) throw std::invalid_argument("frozen_lorenz: b must be positive");
        if (!(sigma > 0)) throw std::invalid_argument("frozen_lorenz: sigma must be positive");
        m.dim = 2;
        const double expo = 2.0 * n + 1.0;
        m.driftA = [expo, b, c](const double* v, double* out) {
            const double y = v[0], z = v[1];
            out[0] = -std::pow(std::abs(y), expo - 1.0) * y + c * y - b * c * z;
            out[1] = -std::pow(std::abs(z), expo - 1.0) * z + b * c * y + c * z;
        };
        m.driftA_grad = [expo, b, c](const double* v, double* out) {
            out[0] = -expo * std::pow(std::abs(v[0]), expo - 1.0) + c;
            out[1] = -b * c;
            out[2] = b * c;
            out[3] = -expo * std::pow(std::abs(v[1]), expo - 1.0) + c;
        };
        m.b_is_const = true;
        m.b_const = {sigma, 0.0, 0.0, sigma};
        m.b_sup = sigma * std::sqrt(2.0);
        m.kappa = expo;
        m.chi = 2.0 * n;
        m.L = std::max(c, 0.0);
        // <A(v),v> = -(y^{2n+2} + z^{2n+2}) + c ||v||^2  and the power-mean
        // inequality gives y^{2n+2} + z^{2n+2} >= 2^{-n} ||v||^{2n+2}.  For
        // c <= 0 that is dissipativity with C1 = 2^{-n} outright; for c > 0
        // give up half of C1 and absorb the quadratic term into
        // C2 = max_u (c u - 2^{-n-1} u^{n+1}) attained at
        // u* = (2^{n+1} c / (n+1))^{1/n}.
        m.C1 = (c > 0 ? 0.5 : 1.0) * std::pow(2.0, -static_cast<double>(n));
        if (c > 0) {
            const double ustar = std::pow(std::pow(2.0, n + 1.0) * c / (n + 1.0), 1.0 / n);
            m.C2 = c * ustar * n / (n + 1.0);
        }
        m.flow = FlowMap::numeric(2, m.driftA, m.L, 0.0);
        m.noise.brownian_dim = 2;
        m.noise.levy_kind = LevyKind::None;
        m.noise.levy_dim = 0;
        m.noise.p_moment = std::numeric_limits<double>::infinity();
        m.params = {{"n", double(n)}, {"b", b}, {"c", c}, {"sigma", sigma}};
    } else {
        throw std::invalid_argument("unknown model '" + name + "'; built-ins: cauchy_cubic, "
                                    "sine_cubic, gaussian_cubic, radial_poly, frozen_lorenz");
    }

    detail::record(m, reader);
    return m;
}

} // namespace levysim
