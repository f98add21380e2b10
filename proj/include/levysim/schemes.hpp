#pragma once

// One-step maps and path integrators for the five schemes.
//
// Steppers are pure: state in, state out, no hidden RNG.  Non-finite states
// are recorded rather than raised — the NaN census of the explicit Euler
// scheme is a first-class measurement here, not an error condition.  The
// splitting stepper inherits the hard pathwise bound of the analytic flows:
// whatever the jump increment does, the flow pulls the state back inside
// the return radius (1/sqrt(2h) in the cubic case).

#include "model.hpp"
#include "noise.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace levysim {

struct Grid {
    double T = 1.0;
    long n = 1;
    double h = 1.0;

    Grid() = default;
    Grid(double T_, long n_) : T(T_), n(n_), h(T_ / static_cast<double>(n_)) {
        if (!(T > 0) || n < 1) throw std::invalid_argument("Grid: need T > 0 and n >= 1");
    }

    // all time bookkeeping is index-based; t_k = k h is derived, never accumulated
    double time(long k) const { return static_cast<double>(k) * h; }
};

enum class SchemeKind { ExplicitEuler, TamedEuler, Splitting, ReverseSplitA, ReverseSplitB };

inline const char* scheme_name(SchemeKind s) {
    switch (s) {
    case SchemeKind::ExplicitEuler: return "euler";
    case SchemeKind::TamedEuler: return "tamed";
    case SchemeKind::Splitting: return "splitting";
    case SchemeKind::ReverseSplitA: return "reverse_a";
    case SchemeKind::ReverseSplitB: return "reverse_b";
    }
    return "?";
}

inline SchemeKind parse_scheme(const std::string& s) {
    if (s == "euler") return SchemeKind::ExplicitEuler;
    if (s == "tamed") return SchemeKind::TamedEuler;
    if (s == "splitting") return SchemeKind::Splitting;
    if (s == "reverse_a") return SchemeKind::ReverseSplitA;
    if (s == "reverse_b") return SchemeKind::ReverseSplitB;
    throw std::invalid_argument("unknown scheme '" + s +
                                "' (euler, tamed, splitting, reverse_a, reverse_b)");
}

enum class PathStatus { Ok, NonFinite, FlowDiverged };

struct PathOutcome {
    PathStatus status = PathStatus::Ok;
    long first_bad_index = -1; // first grid index whose state is unusable
};

struct Trajectory {
    SchemeKind scheme = SchemeKind::Splitting;
    int dim = 1;
    std::vector<double> states; // (n+1) x dim row-major; rows past a bad index are zero
    PathStatus status = PathStatus::Ok;
    long first_bad_index = -1;

    const double* state(long k) const { return states.data() + k * dim; }
    long n_states() const { return static_cast<long>(states.size()) / dim; }
};

// scratch buffers reused across steps of one path
struct StepWorkspace {
    std::vector<double> drift, aux, y, mat;
};

namespace detail {

// acc += M v with M row-major rows x cols
inline void matvec_add(const double* M, int rows, int cols, const double* v, double* acc) {
    for (int i = 0; i < rows; ++i) {
        double s = 0;
        for (int j = 0; j < cols; ++j) s += M[i * cols + j] * v[j];
        acc[i] += s;
    }
}

// out += a(at) h + b(at) dB + c(at) dZ, coefficients evaluated at `at`
inline void add_lower_order_terms(const SdeModel& m, const double* at, double h,
                                  const double* dB, const double* dZ, double* out,
                                  StepWorkspace& ws) {
    if (m.has_a()) {
        ws.aux.resize(m.dim);
        m.drifta(at, ws.aux.data());
        for (int i = 0; i < m.dim; ++i) out[i] += ws.aux[i] * h;
    }
    if (const double* b = m.b_matrix(at, ws.mat))
        matvec_add(b, m.dim, m.brownian_dim(), dB, out);
    if (const double* c = m.c_matrix(at, ws.mat))
        matvec_add(c, m.dim, m.levy_dim(), dZ, out);
}

} // namespace detail

// x + (A(x)+a(x)) h + b(x)dB + c(x)dZ; non-finite results propagate untouched
inline void step_explicit_euler(const SdeModel& m, double h, const double* x,
                                const double* dB, const double* dZ, double* out,
                                StepWorkspace& ws) {
    ws.drift.resize(m.dim);
    m.driftA(x, ws.drift.data());
    for (int i = 0; i < m.dim; ++i) out[i] = x[i] + ws.drift[i] * h;
    detail::add_lower_order_terms(m, x, h, dB, dZ, out, ws);
}

// x + (A+a)(x) h / (1 + ||(A+a)(x)|| h) + b(x)dB + c(x)dZ
inline void step_tamed_euler(const SdeModel& m, double h, const double* x,
                             const double* dB, const double* dZ, double* out,
                             StepWorkspace& ws) {
    ws.drift.resize(m.dim);
    m.driftA(x, ws.drift.data());
    if (m.has_a()) {
        ws.aux.resize(m.dim);
        m.drifta(x, ws.aux.data());
        for (int i = 0; i < m.dim; ++i) ws.drift[i] += ws.aux[i];
    }
    double norm2 = 0;
    for (int i = 0; i < m.dim; ++i) norm2 += ws.drift[i] * ws.drift[i];
    const double scale = h / (1.0 + std::sqrt(norm2) * h);
    for (int i = 0; i < m.dim; ++i) out[i] = x[i] + ws.drift[i] * scale;

    if (const double* b = m.b_matrix(x, ws.mat))
        detail::matvec_add(b, m.dim, m.brownian_dim(), dB, out);
    if (const double* c = m.c_matrix(x, ws.mat))
        detail::matvec_add(c, m.dim, m.levy_dim(), dZ, out);
}

// Phi(h, x + a(x)h + b(x)dB + c(x)dZ): noise first, then the exact flow
inline void step_splitting(const SdeModel& m, double h, const double* x,
                           const double* dB, const double* dZ, double* out,
                           StepWorkspace& ws) {
    ws.y.assign(x, x + m.dim);
    detail::add_lower_order_terms(m, x, h, dB, dZ, ws.y.data(), ws);
    m.flow.evaluate(h, ws.y.data(), out);
}

// Phi(h,x) + a(x)h + b(x)dB + c(x)dZ: coefficients at the PRE-flow state
inline void step_reverse_a(const SdeModel& m, double h, const double* x,
                           const double* dB, const double* dZ, double* out,
                           StepWorkspace& ws) {
    m.flow.evaluate(h, x, out);
    detail::add_lower_order_terms(m, x, h, dB, dZ, out, ws);
}

// Phi(h,x) + a(y)h + b(y)dB + c(y)dZ with y = Phi(h,x): POST-flow coefficients
inline void step_reverse_b(const SdeModel& m, double h, const double* x,
                           const double* dB, const double* dZ, double* out,
                           StepWorkspace& ws) {
    m.flow.evaluate(h, x, out);
    ws.y.assign(out, out + m.dim);
    detail::add_lower_order_terms(m, ws.y.data(), h, dB, dZ, out, ws);
}

inline void step_scheme(SchemeKind scheme, const SdeModel& m, double h, const double* x,
                        const double* dB, const double* dZ, double* out, StepWorkspace& ws) {
    switch (scheme) {
    case SchemeKind::ExplicitEuler: step_explicit_euler(m, h, x, dB, dZ, out, ws); return;
    case SchemeKind::TamedEuler: step_tamed_euler(m, h, x, dB, dZ, out, ws); return;
    case SchemeKind::Splitting: step_splitting(m, h, x, dB, dZ, out, ws); return;
    case SchemeKind::ReverseSplitA: step_reverse_a(m, h, x, dB, dZ, out, ws); return;
    case SchemeKind::ReverseSplitB: step_reverse_b(m, h, x, dB, dZ, out, ws); return;
    }
}

// convenience overloads in spec order (x, dB, dZ, h, model)
namespace detail {
template <SchemeKind S>
std::vector<double> step_vec(const std::vector<double>& x, const std::vector<double>& dB,
                             const std::vector<double>& dZ, double h, const SdeModel& m) {
    std::vector<double> out(m.dim);
    StepWorkspace ws;
    step_scheme(S, m, h, x.data(), dB.empty() ? nullptr : dB.data(),
                dZ.empty() ? nullptr : dZ.data(), out.data(), ws);
    return out;
}
} // namespace detail

inline std::vector<double> step_explicit_euler(const std::vector<double>& x,
                                               const std::vector<double>& dB,
                                               const std::vector<double>& dZ, double h,
                                               const SdeModel& m) {
    return detail::step_vec<SchemeKind::ExplicitEuler>(x, dB, dZ, h, m);
}
inline std::vector<double> step_tamed_euler(const std::vector<double>& x,
                                            const std::vector<double>& dB,
                                            const std::vector<double>& dZ, double h,
                                            const SdeModel& m) {
    return detail::step_vec<SchemeKind::TamedEuler>(x, dB, dZ, h, m);
}
inline std::vector<double> step_splitting(const std::vector<double>& x,
                                          const std::vector<double>& dB,
                                          const std::vector<double>& dZ, double h,
                                          const SdeModel& m) {
    return detail::step_vec<SchemeKind::Splitting>(x, dB, dZ, h, m);
}
inline std::vector<double> step_reverse_a(const std::vector<double>& x,
                                          const std::vector<double>& dB,
                                          const std::vector<double>& dZ, double h,
                                          const SdeModel& m) {
    return detail::step_vec<SchemeKind::ReverseSplitA>(x, dB, dZ, h, m);
}
inline std::vector<double> step_reverse_b(const std::vector<double>& x,
                                          const std::vector<double>& dB,
                                          const std::vector<double>& dZ, double h,
                                          const SdeModel& m) {
    return detail::step_vec<SchemeKind::ReverseSplitB>(x, dB, dZ, h, m);
}

namespace detail {

inline bool all_finite(const double* x, int dim) {
    for (int i = 0; i < dim; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

inline void check_path_args(const SdeModel& m, const Grid& grid, const NoiseGrid& noise,
                            std::size_t x0_size) {
    if (x0_size != static_cast<std::size_t>(m.dim))
        throw std::invalid_argument("simulate_path: x0 dimension mismatch");
    if (noise.n_steps != grid.n)
        throw std::invalid_argument("simulate_path: noise grid has wrong step count");
    if (noise.brownian_dim != m.brownian_dim() || noise.levy_dim != m.levy_dim())
        throw std::invalid_argument("simulate_path: noise dimensions do not match the model");
    if (std::abs(noise.h - grid.h) > 1e-9 * grid.h)
        throw std::invalid_argument("simulate_path: noise step size does not match the grid");
}

} // namespace detail

// Runs one path, handing each usable state to visit(k, x_ptr) for
// k = 0..n (stopping early on a bad state).  This is the streaming core:
// ensemble statistics consume states here without materializing paths.
template <class Visitor>
PathOutcome run_path_visit(const SdeModel& model, SchemeKind scheme, const Grid& grid,
                           const NoiseGrid& noise, const double* x0, Visitor&& visit) {
    const int dim = model.dim;
    PathOutcome outcome;

    std::vector<double> cur(x0, x0 + dim), next(dim);
    StepWorkspace ws;

    if (!detail::all_finite(cur.data(), dim)) {
        outcome.status = PathStatus::NonFinite;
        outcome.first_bad_index = 0;
        return outcome;
    }
    visit(0L, static_cast<const double*>(cur.data()));

    for (long k = 0; k < grid.n; ++k) {
        try {
            step_scheme(scheme, model, grid.h, cur.data(), noise.dB_row(k), noise.dZ_row(k),
                        next.data(), ws);
        } catch (const FlowDivergence&) {
            outcome.status = PathStatus::FlowDiverged;
            outcome.first_bad_index = k + 1;
            return outcome;
        }
        if (!detail::all_finite(next.data(), dim)) {
            outcome.status = PathStatus::NonFinite;
            outcome.first_bad_index = k + 1;
            return outcome;
        }
        cur.swap(next);
        visit(k + 1, static_cast<const double*>(cur.data()));
    }
    return outcome;
}

inline Trajectory simulate_path(const SdeModel& model, SchemeKind scheme, const Grid& grid,
                                const NoiseGrid& noise, const std::vector<double>& x0) {
    detail::check_path_args(model, grid, noise, x0.size());
    Trajectory traj;
    traj.scheme = scheme;
    traj.dim = model.dim;
    traj.states.assign(static_cast<std::size_t>(grid.n + 1) * model.dim, 0.0);
    const auto outcome = run_path_visit(
        model, scheme, grid, noise, x0.data(), [&](long k, const double* x) {
            std::copy(x, x + model.dim, traj.states.begin() + k * model.dim);
        });
    if (outcome.status == PathStatus::NonFinite && outcome.first_bad_index == 0)
        std::copy(x0.begin(), x0.end(), traj.states.begin()); // keep states[0] = x0
    traj.status = outcome.status;
    traj.first_bad_index = outcome.first_bad_index;
    return traj;
}

} // namespace levysim
