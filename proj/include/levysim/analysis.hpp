#pragma once

// Rate formulas, the stationary-law oracle for the scalar cubic/Cauchy model,
// and the coupled-path strong-error estimator.

#include "montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace levysim {

// --- closed-form rate exponents ----------------------------------------------

namespace detail {

inline void require_pq(double p, double q, double chi) {
    if (!(q > 0) || !(q < p))
        throw std::invalid_argument("rate formula requires 0 < q < p");
    if (!(chi >= 0)) throw std::invalid_argument("rate formula requires chi >= 0");
}

} // namespace detail

// Exponent of h for the supremum-outside error sup_t E||X^n_t - X_t||^q.
// chi = 0 (globally Lipschitz drift) drops the (p-q)/chi term entirely.
inline double rate_bar_delta(double p, double q, double chi) {
    detail::require_pq(p, q, chi);
    const double growth = chi == 0 ? std::numeric_limits<double>::infinity() : (p - q) / chi;
    return std::min({growth, q / 2, 1.0});
}

// Exponent for the supremum-inside error E sup_t ||X^n_t - X_t||^q.
inline double rate_delta_sup(double p, double q, double chi) {
    detail::require_pq(p, q, chi);
    const double growth = chi == 0 ? std::numeric_limits<double>::infinity() : (p - q) / chi;
    return std::min({growth, q / 4, 0.5});
}

// Open supremum of admissible tail-improvement exponents gamma for moments of
// order p_X in [p, p+kappa-1). Any gamma strictly below the returned value is
// admissible; the value itself is not.
inline double rate_gamma_sup(double p, double kappa, double chi, double p_X) {
    if (!(p > 0) || !(kappa > 1) || !(chi >= 0))
        throw std::invalid_argument("rate_gamma_sup: need p > 0, kappa > 1, chi >= 0");
    if (!(p_X >= p) || !(p_X < p + kappa - 1))
        throw std::invalid_argument("rate_gamma_sup: need p <= p_X < p + kappa - 1");
    const double excess = p + kappa - 1 - p_X;
    if (p <= chi + 2) return p * excess / ((chi + 2) * (kappa - 1) + chi * p);
    return excess / (kappa + chi - 1);
}

// Critical exponential-moment parameter 2 C_diss / sup||b||^2; a vanishing
// diffusion bound means every lambda is admissible.
inline double lambda_threshold(double C_diss, double b_sup) {
    if (!(C_diss > 0)) throw std::invalid_argument("lambda_threshold: C_diss must be > 0");
    if (!(b_sup >= 0)) throw std::invalid_argument("lambda_threshold: b_sup must be >= 0");
    if (b_sup == 0) return std::numeric_limits<double>::infinity();
    return 2 * C_diss / (b_sup * b_sup);
}

// Order of the truncation bias h^{(p+kappa-1-p_X)/(kappa-1)} when a moment of
// order p_X is read off a scheme whose tails only integrate up to p+kappa-1.
inline double systematic_error_order(double p_X, double kappa, double p) {
    if (!(kappa > 1)) throw std::invalid_argument("systematic_error_order: kappa must be > 1");
    if (!(p_X <= p + kappa - 1))
        throw std::invalid_argument("systematic_error_order: need p_X <= p + kappa - 1");
    return (p + kappa - 1 - p_X) / (kappa - 1);
}

struct RatePrediction {
    double bar_delta = 0;     // sup-outside rate
    double delta_sup = 0;     // sup-inside rate
    double gamma_sup = std::numeric_limits<double>::quiet_NaN(); // NaN when p_X < p
    double lambda_threshold = 0;
    double gaussian_rate = 0; // q/2, the rate in force when the noise is Brownian only
};

inline RatePrediction predict_rates(const SdeModel& model, const RateParams& params) {
    RatePrediction out;
    out.bar_delta = rate_bar_delta(params.p, params.q, model.chi);
    out.delta_sup = rate_delta_sup(params.p, params.q, model.chi);
    // the tail-improvement statement speaks only to moment orders at or above p
    if (params.p_X >= params.p && params.p_X < params.p + model.kappa - 1)
        out.gamma_sup = rate_gamma_sup(params.p, model.kappa, model.chi, params.p_X);
    out.lambda_threshold = levysim::lambda_threshold(model.C1, model.b_sup);
    out.gaussian_rate = params.q / 2;
    return out;
}

// --- stationary law of the scalar cubic/Cauchy model --------------------------

inline double stationary_density(double x) {
    const double x2 = x * x;
    return 1.0 / (std::numbers::pi * (x2 * x2 - x2 + 1.0));
}

namespace detail {

// Gauss7/Kronrod15 pair on [a, b]: returns (integral, error estimate).
template <class F>
std::pair<double, double> gk15(F&& f, double a, double b) {
    static constexpr double xgk[8] = {
        0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
        0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
    static constexpr double wgk[8] = {
        0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
        0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
    static constexpr double wg[4] = {0.129484966168870, 0.279705391489277,
                                     0.381830050505119, 0.417959183673469};
    const double mid = 0.5 * (a + b), hw = 0.5 * (b - a);
    const double fc = f(mid);
    double kronrod = wgk[7] * fc;
    double gauss = wg[3] * fc;
    for (int i = 0; i < 7; ++i) {
        const double dx = hw * xgk[i];
        const double pair_sum = f(mid - dx) + f(mid + dx);
        kronrod += wgk[i] * pair_sum;
        if (i % 2 == 1) gauss += wg[i / 2] * pair_sum; // Gauss nodes interleave
    }
    return {kronrod * hw, std::abs((kronrod - gauss) * hw)};
}

// Bisecting adaptive driver to an absolute tolerance.
template <class F>
double adaptive_quadrature(F&& f, double a, double b, double tol) {
    struct Panel {
        double a, b, tol;
    };
    std::vector<Panel> stack{{a, b, tol}};
    CompSum total;
    long panels = 0;
    while (!stack.empty()) {
        const Panel panel = stack.back();
        stack.pop_back();
        const auto [value, err] = gk15(f, panel.a, panel.b);
        const double width = panel.b - panel.a;
        // the relative floor stops deep panels from chasing tolerances below
        // what the estimator can resolve (long truncation ranges shrink the
        // per-panel share geometrically)
        if (err <= panel.tol || err <= 1e-14 * std::abs(value) ||
            width <= 1e-14 * (std::abs(panel.a) + std::abs(panel.b))) {
            total.add(value);
        } else {
            const double mid = 0.5 * (panel.a + panel.b);
            stack.push_back({panel.a, mid, 0.5 * panel.tol});
            stack.push_back({mid, panel.b, 0.5 * panel.tol});
        }
        if (++panels > 200000)
            throw std::runtime_error("adaptive_quadrature: failed to converge");
    }
    return total.total();
}

// Tail integral of x^p / (pi (x^4 - x^2 + 1)) from M to infinity, M >= 10.
// Expanding 1/(1 - u + u^2) = (1 + u)/(1 + u^3) in u = x^{-2} gives the
// alternating-pair series 1 + u - u^3 - u^4 + u^6 + u^7 - ...; each term
// integrates in closed form and at u <= 10^{-2} eight terms land far below
// double precision.
inline double stationary_tail(double M, double p) {
    static constexpr int expo[8] = {0, 1, 3, 4, 6, 7, 9, 10};
    static constexpr double sign[8] = {1, 1, -1, -1, 1, 1, -1, -1};
    double tail = 0;
    for (int i = 0; i < 8; ++i) {
        const double a = 3.0 + 2.0 * expo[i] - p; // > 0 for p < 3
        tail += sign[i] * std::pow(M, -a) / a;
    }
    return tail / std::numbers::pi;
}

} // namespace detail

// Absolute moment E|X|^{p_X} of the stationary law, over the whole line when
// K is absent (needs p_X < 3: the density decays like x^{-4}) or truncated to
// [-K, K]. Absolute accuracy 1e-9 or better.
inline double stationary_moment(double p_X, std::optional<double> K = std::nullopt) {
    if (!(p_X > 0)) throw std::invalid_argument("stationary_moment: p_X must be > 0");
    const auto integrand = [p_X](double x) {
        return std::pow(x, p_X) * stationary_density(x);
    };
    constexpr double tol = 1e-11; // headroom under the documented 1e-9
    if (K) {
        if (!(*K >= 0)) throw std::invalid_argument("stationary_moment: K must be >= 0");
        if (*K == 0) return 0.0;
        return 2 * detail::adaptive_quadrature(integrand, 0.0, *K, tol);
    }
    if (p_X >= 3)
        throw std::domain_error("stationary_moment: E|X|^p diverges for p >= 3");
    const double M = 10.0;
    return 2 * (detail::adaptive_quadrature(integrand, 0.0, M, tol) +
                detail::stationary_tail(M, p_X));
}

// --- coupled-path strong-error estimator --------------------------------------

enum class ErrorMode { SupOfMean, MeanOfSup };

inline const char* error_mode_name(ErrorMode mode) {
    return mode == ErrorMode::SupOfMean ? "sup_of_mean" : "mean_of_sup";
}

inline ErrorMode parse_error_mode(const std::string& name) {
    if (name == "sup_of_mean") return ErrorMode::SupOfMean;
    if (name == "mean_of_sup") return ErrorMode::MeanOfSup;
    throw std::invalid_argument("unknown error mode '" + name +
                                "' (expected sup_of_mean or mean_of_sup)");
}

struct ErrorPoint {
    long n = 0;
    double h = 0;
    double error_q = 0;
    double std_error = 0;
};

struct ErrorCurve {
    std::vector<ErrorPoint> points;
    double fitted_slope = std::numeric_limits<double>::quiet_NaN();
    double fit_intercept = std::numeric_limits<double>::quiet_NaN();
    double q = 0;
    ErrorMode mode = ErrorMode::SupOfMean;
    long ref_divergences = 0; // reference paths censored from the whole study
};

struct StrongErrorConfig {
    SdeModel model;
    SchemeKind scheme = SchemeKind::Splitting;
    double q = 0.5;
    std::vector<long> n_list;
    long n_ref = 0;
    long N_paths = 1000;
    double T = 1.0;
    std::vector<double> x0; // empty means the origin
    std::uint64_t master_seed = 0;
    ErrorMode mode = ErrorMode::SupOfMean;
    int workers = 1;
};

// Predicted log-log slope for a coupled-path study against a same-scheme
// finest-grid reference: Brownian-only models converge at q/2 in either
// metric; with jumps the two metrics split into the two rate exponents.
inline double predicted_slope(const SdeModel& model, ErrorMode mode, double q, double p) {
    if (model.levy_dim() == 0) return q / 2;
    return mode == ErrorMode::SupOfMean ? rate_bar_delta(p, q, model.chi)
                                        : rate_delta_sup(p, q, model.chi);
}

namespace detail {

struct LevelPartial {
    std::vector<CompSum> idx_sum, idx_sum2; // per shared grid index, [n+1]
    std::vector<long> idx_count;
    CompSum sup_sum, sup_sum2; // per-path sup statistics
    long sup_count = 0;
    long censored = 0; // coarse paths that went non-finite or diverged

    void init(long n) {
        idx_sum.assign(n + 1, {});
        idx_sum2.assign(n + 1, {});
        idx_count.assign(n + 1, 0);
        sup_sum = sup_sum2 = {};
        sup_count = 0;
        censored = 0;
    }

    void merge_from(const LevelPartial& o) {
        for (std::size_t k = 0; k < idx_sum.size(); ++k) {
            idx_sum[k].add(o.idx_sum[k]);
            idx_sum2[k].add(o.idx_sum2[k]);
            idx_count[k] += o.idx_count[k];
        }
        sup_sum.add(o.sup_sum);
        sup_sum2.add(o.sup_sum2);
        sup_count += o.sup_count;
        censored += o.censored;
    }
};

struct StudyPartial {
    long n_paths = 0;
    long ref_bad = 0;
    std::vector<LevelPartial> levels;

    void init(const std::vector<long>& n_list) {
        n_paths = 0;
        ref_bad = 0;
        levels.resize(n_list.size());
        for (std::size_t i = 0; i < n_list.size(); ++i) levels[i].init(n_list[i]);
    }

    void merge_from(const StudyPartial& o) {
        n_paths += o.n_paths;
        ref_bad += o.ref_bad;
        for (std::size_t i = 0; i < levels.size(); ++i) levels[i].merge_from(o.levels[i]);
    }
};

} // namespace detail

// Coarse-grid schemes against a finest-grid reference of the same scheme, all
// paths driven by one noise realization per path: the coarse increments are
// the aggregated fine increments, bitwise. The two modes probe different
// deviations. SupOfMean compares states at the shared (coarse) grid indices
// only. MeanOfSup takes each path's sup over the whole fine grid against the
// coarse path held piecewise constant between its nodes -- the discrete stand-
// in for a sup over continuous time, which is what the uniform-error rate
// speaks to (between nodes the reference's own fluctuation is part of the
// error, and for Brownian models it dominates at sqrt(h log) scale).
inline ErrorCurve strong_error_study(const StrongErrorConfig& config) {
    config.model.validate();
    if (config.n_list.empty()) throw std::invalid_argument("strong_error_study: empty n_list");
    if (config.n_ref < 1) throw std::invalid_argument("strong_error_study: n_ref must be >= 1");
    if (!(config.q > 0)) throw std::invalid_argument("strong_error_study: q must be > 0");
    if (config.N_paths < 1) throw std::invalid_argument("strong_error_study: N_paths >= 1");
    if (config.workers < 1) throw std::invalid_argument("strong_error_study: workers >= 1");
    for (long n : config.n_list)
        if (n < 1 || config.n_ref % n != 0)
            throw std::invalid_argument("strong_error_study: every n must divide n_ref");

    const Grid ref_grid(config.T, config.n_ref);
    std::vector<double> x0 = config.x0;
    if (x0.empty()) x0.assign(config.model.dim, 0.0);
    if (x0.size() != static_cast<std::size_t>(config.model.dim))
        throw std::invalid_argument("strong_error_study: x0 dimension mismatch");

    const int dim = config.model.dim;
    const auto& n_list = config.n_list;

    detail::StudyPartial zero;
    zero.init(n_list);
    detail::OrderedFoldT<detail::StudyPartial> fold(std::move(zero));
    const long n_blocks = (config.N_paths + detail::kPathBlock - 1) / detail::kPathBlock;
    std::atomic<long> next_block{0};

    long n_max = 0;
    for (long n : n_list) n_max = std::max(n_max, n);

    const auto worker_main = [&]() {
        auto fine = std::make_shared<NoiseGrid>();
        std::vector<double> ref_states((config.n_ref + 1) * dim);
        std::vector<double> coarse_states((n_max + 1) * dim);
        detail::StudyPartial partial;

        const auto deviation = [dim](const double* a, const double* b) {
            double s = 0;
            for (int c = 0; c < dim; ++c) {
                const double d = a[c] - b[c];
                s += d * d;
            }
            return std::sqrt(s);
        };

        for (;;) {
            const long b = next_block.fetch_add(1, std::memory_order_relaxed);
            if (b >= n_blocks) return;
            const long first = b * detail::kPathBlock;
            const long last = std::min(first + detail::kPathBlock, config.N_paths);
            partial.init(n_list);
            partial.n_paths = last - first;

            for (long path = first; path < last; ++path) {
                fill_noise_grid(config.model.noise, config.master_seed,
                                static_cast<std::uint64_t>(path), config.n_ref, ref_grid.h,
                                *fine);
                const auto ref_outcome = run_path_visit(
                    config.model, config.scheme, ref_grid, *fine, x0.data(),
                    [&](long k, const double* x) {
                        std::copy(x, x + dim, ref_states.begin() + k * dim);
                    });
                if (ref_outcome.status != PathStatus::Ok) {
                    // no trustworthy reference: the path drops out of every level
                    ++partial.ref_bad;
                    continue;
                }

                for (std::size_t i = 0; i < n_list.size(); ++i) {
                    const long ratio = config.n_ref / n_list[i];
                    const NoiseGrid coarse = aggregate_to_coarse(
                        std::shared_ptr<const NoiseGrid>(fine), ratio);
                    const Grid coarse_grid(config.T, n_list[i]);
                    auto& lvl = partial.levels[i];
                    long good_until = -1;
                    const auto outcome = run_path_visit(
                        config.model, config.scheme, coarse_grid, coarse, x0.data(),
                        [&](long k, const double* x) {
                            std::copy(x, x + dim, coarse_states.begin() + k * dim);
                            good_until = k;
                        });
                    if (config.mode == ErrorMode::SupOfMean) {
                        // shared coarse indices, censored from the first bad one
                        for (long k = 0; k <= good_until; ++k) {
                            const double dev = deviation(coarse_states.data() + k * dim,
                                                         ref_states.data() + k * ratio * dim);
                            const double devq = detail::pow_norm(dev, config.q);
                            lvl.idx_sum[k].add(devq);
                            lvl.idx_sum2[k].add(devq * devq);
                            ++lvl.idx_count[k];
                        }
                        if (outcome.status != PathStatus::Ok) ++lvl.censored;
                    } else if (outcome.status == PathStatus::Ok) {
                        // sup over every fine index, the coarse path held at
                        // its last node
                        double sup_dev = 0;
                        for (long kf = 0; kf <= config.n_ref; ++kf) {
                            const double dev =
                                deviation(coarse_states.data() + (kf / ratio) * dim,
                                          ref_states.data() + kf * dim);
                            sup_dev = std::max(sup_dev, dev);
                        }
                        const double supq = detail::pow_norm(sup_dev, config.q);
                        lvl.sup_sum.add(supq);
                        lvl.sup_sum2.add(supq * supq);
                        ++lvl.sup_count;
                    } else {
                        ++lvl.censored; // no full-path sup to take
                    }
                }
            }
            fold.submit(b, std::move(partial));
        }
    };

    if (config.workers == 1) {
        worker_main();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(config.workers);
        for (int w = 0; w < config.workers; ++w) pool.emplace_back(worker_main);
        for (auto& t : pool) t.join();
    }

    const detail::StudyPartial& g = fold.result();
    ErrorCurve curve;
    curve.q = config.q;
    curve.mode = config.mode;
    curve.ref_divergences = g.ref_bad;

    for (std::size_t i = 0; i < n_list.size(); ++i) {
        const auto& lvl = g.levels[i];
        ErrorPoint point;
        point.n = n_list[i];
        point.h = config.T / static_cast<double>(n_list[i]);
        if (config.mode == ErrorMode::MeanOfSup) {
            const auto stat =
                detail::finish_stat(config.q, lvl.sup_sum, lvl.sup_sum2, lvl.sup_count);
            point.error_q = lvl.sup_count > 0 ? stat.value
                                              : std::numeric_limits<double>::quiet_NaN();
            point.std_error = stat.std_error;
        } else {
            bool any = false;
            for (std::size_t k = 0; k < lvl.idx_sum.size(); ++k) {
                if (lvl.idx_count[k] <= 0) continue;
                const auto stat = detail::finish_stat(config.q, lvl.idx_sum[k],
                                                      lvl.idx_sum2[k], lvl.idx_count[k]);
                if (!any || stat.value > point.error_q) {
                    point.error_q = stat.value;
                    point.std_error = stat.std_error;
                }
                any = true;
            }
            if (!any) point.error_q = std::numeric_limits<double>::quiet_NaN();
        }
        curve.points.push_back(point);
    }

    // least squares of log error on log h, over the strictly positive errors
    // (an error of exactly zero only happens for the degenerate n = n_ref case)
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    long m = 0;
    for (const auto& point : curve.points) {
        if (!(point.error_q > 0) || !std::isfinite(point.error_q)) continue;
        const double lx = std::log(point.h), ly = std::log(point.error_q);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++m;
    }
    if (m >= 2) {
        const double denom = m * sxx - sx * sx;
        curve.fitted_slope = (m * sxy - sx * sy) / denom;
        curve.fit_intercept = (sy - curve.fitted_slope * sx) / m;
    }
    return curve;
}

} // namespace levysim
